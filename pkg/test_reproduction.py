"""N = 10³ 的复现与交叉检验，全部标记为 slow（pytest --runslow）"""
import numpy as np
import pytest

from api.models import RunConfig
from core.decay_service import DecayService
from core.dynamics import (
    first_derivative_at_zero,
    geometric_ladder,
    hamiltonian_moments,
    moment_table,
    mu_moment,
    sum_rule_report,
    survival_curve,
)
from core.initial_states import expansion_coefficients, gaussian_state
from core.propagation import Boundary, BoundaryKind, GridSpec, default_grid, propagate
from core.resonance import find_poles
from core.short_time import (
    FreeExponent,
    LeastSquares,
    VerdictKind,
    classify_cubic_sum,
    fit_short_time,
    fit_window_grid,
    predict_exponent,
)

pytestmark = pytest.mark.slow

LADDER = geometric_ladder(62, 1000, 5)


@pytest.fixture(scope="module")
def converged_poles(barrier, params):
    return find_poles(barrier, params, RunConfig().n_poles_reference, threads=8)


def _fit_curve(coeffs, poles, params, n_max=None):
    times = fit_window_grid(poles.lifetime_tau1)
    return survival_curve(coeffs, poles, params, times, n_max, threads=4)


@pytest.mark.parametrize("which", ["gaussian", "sine"])
def test_sum_rules_at_thousand_poles(which, reference_gaussian_coeffs, reference_sine_coeffs):
    coeffs = reference_gaussian_coeffs if which == "gaussian" else reference_sine_coeffs
    report = sum_rule_report(coeffs)
    assert report.closure_deviation < 1e-3
    assert report.first_residual < 1e-3
    assert report.inverse_residual < 1e-3


def test_gaussian_decays_quadratically(reference_gaussian_coeffs, reference_poles, params):
    diag = classify_cubic_sum(reference_gaussian_coeffs, LADDER)
    assert diag.verdict.kind is VerdictKind.VANISHES
    curve = _fit_curve(reference_gaussian_coeffs, reference_poles, params)
    fit = fit_short_time(curve, LeastSquares())
    assert fit.theta == 2.0
    assert fit.tau_star == pytest.approx(0.819, rel=0.05)
    free = fit_short_time(curve, FreeExponent())
    assert abs(free.theta - predict_exponent(diag)) < 0.1


def test_sine_decays_as_three_halves(reference_sine_coeffs, reference_poles, params):
    diag = classify_cubic_sum(reference_sine_coeffs, LADDER)
    assert diag.verdict.kind is VerdictKind.DIVERGES
    curve = _fit_curve(reference_sine_coeffs, reference_poles, params)
    fit = fit_short_time(curve, LeastSquares())
    assert fit.theta == 1.5
    assert fit.tau_star == pytest.approx(3.802, rel=0.05)
    free = fit_short_time(curve, FreeExponent())
    assert abs(free.theta - predict_exponent(diag)) < 0.1


@pytest.mark.parametrize("which", ["gaussian", "sine"])
def test_survival_is_converged_in_n(which, gaussian, sine, converged_poles, params):
    coeffs = expansion_coefficients(gaussian if which == "gaussian" else sine, converged_poles)
    times = np.linspace(0.0, 0.02 * converged_poles.lifetime_tau1, 101)
    thousand = survival_curve(coeffs, converged_poles, params, times, 1000, threads=4)
    full = survival_curve(coeffs, converged_poles, params, times, threads=4)
    assert full.n_used == 20000
    assert np.max(np.abs(thousand.probability - full.probability)) < 1e-4


def test_exponential_era_slope(reference_gaussian_coeffs, reference_poles, params):
    tau1 = reference_poles.lifetime_tau1
    times = np.linspace(0.5 * tau1, 3.0 * tau1, 26)
    curve = survival_curve(reference_gaussian_coeffs, reference_poles, params, times, threads=4)
    slope = np.polyfit(times, np.log(curve.probability), 1)[0]
    assert slope == pytest.approx(-1.0 / tau1, rel=0.05)


@pytest.mark.parametrize("fraction", [1 / 10, 1 / 5])
def test_fitted_time_matches_zeno_time(fraction, barrier, reference_poles, params):
    state = gaussian_state(7.5, 5.0 * fraction, barrier)
    service = DecayService()
    result = service.zeno_table([state], reference_poles, params, LADDER, threads=4)
    assert result["success"], result.get("message")
    row = result["rows"][0]
    assert row["theta"] == 2.0
    assert row["ratio"] == pytest.approx(1.0, rel=0.1)


def test_moment_dichotomy(reference_gaussian_coeffs, reference_sine_coeffs, params):
    even = [4, 6, 8]
    gaussian = moment_table(reference_gaussian_coeffs, even, LADDER)
    sine = moment_table(reference_sine_coeffs, even, LADDER)
    for j in even:
        assert abs(gaussian.growth(j)) < 0.2
        assert sine.growth(j) > 0.5
        assert np.all(np.diff(np.abs(sine.mu[j])) > 0)
    assert hamiltonian_moments(reference_gaussian_coeffs, params, LADDER).mean_H2.is_finite
    assert not hamiltonian_moments(reference_sine_coeffs, params, LADDER).mean_H2.is_finite


def test_first_derivative_matches_mean_energy(reference_gaussian_coeffs, reference_poles, params):
    coeffs = reference_gaussian_coeffs
    mean_h = params.hbar2_over_2m * mu_moment(coeffs, 2) / mu_moment(coeffs, 0)
    derivative = first_derivative_at_zero(coeffs, reference_poles, params)
    assert derivative == pytest.approx(-1j * mean_h / params.hbar, rel=1e-6)


def test_expansion_agrees_with_direct_propagation(gaussian, reference_gaussian_coeffs, reference_poles, barrier, params):
    grid = default_grid(barrier.total_length, params, dx=0.01, pad_factor=4.0)
    oracle = propagate(barrier, gaussian, grid, 5.0, params)
    curve = survival_curve(reference_gaussian_coeffs, reference_poles, params, oracle.times, threads=4)
    assert np.max(np.abs(curve.probability - oracle.survival)) < 1e-3


def test_expansion_agrees_with_direct_propagation_over_two_lifetimes(
    gaussian, reference_gaussian_coeffs, reference_poles, barrier, params
):
    # 吸收层吞掉出射波，传播到 2τ1 后按约 200 个时刻记录
    t_max = 2.0 * reference_poles.lifetime_tau1
    dx = 0.04
    grid = GridSpec(
        x_min=-45.0,
        x_max=barrier.total_length + 45.0,
        dx=dx,
        dt=0.5 * dx ** 2 / params.hbar_over_2m,
        boundary=Boundary(kind=BoundaryKind.ABSORBING_LAYER, width=30.0, strength=0.5),
    )
    oracle = propagate(barrier, gaussian, grid, t_max, params)
    assert oracle.times[-1] == pytest.approx(t_max, rel=1e-3)
    curve = survival_curve(reference_gaussian_coeffs, reference_poles, params, oracle.times, threads=4)
    assert np.max(np.abs(curve.probability - oracle.survival)) < 1e-3


def test_direct_propagation_of_sine_state(sine, reference_poles, barrier, params):
    grid = default_grid(barrier.total_length, params, dx=0.01, pad_factor=4.0)
    t_max = 1e-3 * reference_poles.lifetime_tau1
    oracle = propagate(barrier, sine, grid, t_max, params)
    fit = fit_short_time((oracle.times, oracle.survival), FreeExponent(window=(0.1 * t_max, t_max)))
    assert 1.35 <= fit.theta <= 1.65
