from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from core.dynamics import survival_curve
from core.errors import (
    InconclusiveVerdictError,
    InsufficientDataError,
    InvalidLadderError,
    WindowTooEarlyError,
)
from core.initial_states import CoefficientSet
from core.short_time import (
    CubicSumDiagnostic,
    FitMethod,
    FreeExponent,
    LeastSquares,
    TwoPoint,
    Verdict,
    VerdictKind,
    classify_cubic_sum,
    decide_verdict,
    fit_experimental,
    fit_short_time,
    fit_window_grid,
    predict_exponent,
    short_time_model,
)

LADDER = [16, 32, 64, 128, 256]


def _synthetic_coeffs(kappa, product) -> CoefficientSet:
    """只带 n, κ 与 CC̄ 的系数集合，用于检验判定规则"""
    kappa = np.asarray(kappa, dtype=complex)
    n = np.sign(kappa.real).astype(int) * np.rint(np.abs(kappa)).astype(int)
    c = np.sqrt(np.asarray(product, dtype=complex))
    return CoefficientSet(n=n, kappa=kappa, c=c, c_bar=c.copy(), source_state=None, poles=None)


def test_alternating_cubic_sum_converges():
    k = np.arange(1, 257, dtype=float)
    coeffs = _synthetic_coeffs(k, (-1.0) ** k / k ** 5)
    diag = classify_cubic_sum(coeffs, LADDER)
    assert diag.verdict.kind is VerdictKind.CONVERGES
    assert diag.verdict.limit.real == pytest.approx(-np.pi ** 2 / 12, abs=1e-4)
    assert predict_exponent(diag) == 1.5
    assert list(diag.to_frame().columns) == ["N", "re_P", "im_P", "abs_P"]


def test_growing_cubic_sum_diverges():
    k = np.arange(1, 257, dtype=float)
    diag = classify_cubic_sum(_synthetic_coeffs(k, 1.0 / k ** 3), LADDER)
    assert diag.verdict.kind is VerdictKind.DIVERGES
    assert diag.verdict.growth_exponent == pytest.approx(1.0, abs=1e-6)
    assert predict_exponent(diag) == 1.5


def test_symmetric_cubic_sum_vanishes():
    k = np.arange(1, 257, dtype=float)
    kappa = np.ravel(np.column_stack([k, -k]))
    product = np.repeat(1.0 / k ** 4, 2)
    diag = classify_cubic_sum(_synthetic_coeffs(kappa, product), LADDER)
    assert diag.verdict.kind is VerdictKind.VANISHES
    assert predict_exponent(diag) == 2.0


def test_oscillating_partial_sums_are_inconclusive():
    verdict, _, residual = decide_verdict(LADDER, [1.0, 10.0, 1.0, 10.0, 1.0], scale=1.0)
    assert verdict.kind is VerdictKind.INCONCLUSIVE
    assert residual > 0.1
    diag = CubicSumDiagnostic(partial_sums=[], verdict=verdict, confidence=residual, alpha=0.0, scale=1.0)
    with pytest.raises(InconclusiveVerdictError):
        predict_exponent(diag)


def test_ladder_checks():
    k = np.arange(1, 41, dtype=float)
    coeffs = _synthetic_coeffs(k, 1.0 / k ** 3)
    with pytest.raises(InvalidLadderError):
        classify_cubic_sum(coeffs, [5, 10, 20])
    with pytest.raises(InvalidLadderError):
        classify_cubic_sum(coeffs, [5, 10, 20, 40, 80])
    with pytest.raises(InvalidLadderError):
        classify_cubic_sum(coeffs, [2, 3, 10, 20, 40])


def test_verdict_to_dict():
    assert Verdict(VerdictKind.CONVERGES, limit=1 - 2j).to_dict() == {"kind": "converges", "limit": [1.0, -2.0]}
    assert Verdict(VerdictKind.DIVERGES, growth_exponent=0.9).to_dict() == {"kind": "diverges", "growth_exponent": 0.9}


def test_gaussian_cubic_sum_vanishes(gaussian_coeffs):
    diag = classify_cubic_sum(gaussian_coeffs, [16, 20, 25, 32, 40])
    assert diag.verdict.kind is VerdictKind.VANISHES
    assert predict_exponent(diag) == 2.0


def test_gaussian_short_time_fit_is_quadratic(gaussian_coeffs, barrier_poles, params):
    times = fit_window_grid(barrier_poles.lifetime_tau1)
    curve = survival_curve(gaussian_coeffs, barrier_poles, params, times)
    fit = fit_short_time(curve)
    assert fit.method is FitMethod.LEAST_SQUARES
    assert fit.theta == 2.0
    assert not fit.ambiguous
    assert 0.6 < fit.tau_star < 1.2
    assert fit.candidates[2.0][1] < fit.candidates[1.5][1]


def _power_law(theta, tau, t_lo=0.01, t_hi=0.5, points=40):
    t = np.geomspace(t_lo, t_hi, points)
    return t, short_time_model(t, tau, theta)


def test_least_squares_recovers_exact_power_law():
    t, s = _power_law(1.5, 2.0)
    fit = fit_short_time((t, s), LeastSquares(window=(0.01, 0.5)))
    assert fit.theta == 1.5
    assert fit.tau_star == pytest.approx(2.0, rel=1e-6)
    assert fit.free_theta == pytest.approx(1.5, rel=1e-9)


def test_two_point_fit():
    t, s = _power_law(1.5, 2.0)
    fit = fit_short_time((t, s), TwoPoint(t_a=0.1, t_b=0.4))
    assert fit.method is FitMethod.TWO_POINT
    assert fit.theta == 1.5
    assert fit.tau_star == pytest.approx(2.0, rel=1e-9)
    assert fit.free_theta == pytest.approx(1.5, rel=1e-9)
    with pytest.raises(InsufficientDataError):
        fit_short_time((t, s), TwoPoint(t_a=0.1, t_b=0.1))


def test_free_exponent_fit():
    t, s = _power_law(1.8, 3.0)
    fit = fit_short_time(pd.DataFrame({"t": t, "S": s}), FreeExponent(window=(0.01, 0.5)))
    assert fit.method is FitMethod.FREE_EXPONENT
    assert fit.theta == pytest.approx(1.8, rel=1e-9)
    assert fit.tau_star == pytest.approx(3.0, rel=1e-9)
    assert set(fit.to_dict()) == {
        "theta", "tau_star", "residual", "method", "window", "ambiguous", "free_theta", "candidates"
    }


def test_window_errors():
    t, s = _power_law(2.0, 1.0)
    with pytest.raises(InsufficientDataError):
        fit_short_time((t, s), LeastSquares(window=(0.6, 0.9)))
    with pytest.raises(WindowTooEarlyError):
        fit_short_time((t, np.ones_like(t)), LeastSquares(window=(0.01, 0.5)))


def test_experimental_fit_prefers_true_exponent():
    t = np.linspace(0.6, 6.0, 20)
    rows = [(ti, si, 0.01) for ti, si in zip(t, short_time_model(t, 12.55, 2.0))]
    fits = fit_experimental(rows)
    by_theta = {f.theta: f for f in fits}
    assert by_theta[2.0].tau_star == pytest.approx(12.55, rel=1e-6)
    assert by_theta[2.0].residual < by_theta[1.5].residual


def test_experimental_fit_needs_two_points():
    with pytest.raises(InsufficientDataError):
        fit_experimental(pd.DataFrame({"t": [0.0, 1.0], "S": [1.0, 0.9]}))


def _crossover_curve(tau=0.5, tau1=640.0):
    """短时严格二次，t ≳ τ 后转为 t^{3/2} 的曲线"""
    times = fit_window_grid(tau1)
    x = times / tau
    return SimpleNamespace(times=times, probability=np.exp(-(x ** 2) / (1.0 + x ** 2) ** 0.25), tau1=tau1)


def test_default_window_stays_in_short_time_regime():
    curve = _crossover_curve()
    fit = fit_short_time(curve)
    # 默认窗口上限 0.64 fs 处 1 - S ≈ 0.8，截断后只剩 1 - S <= 1e-2 的部分
    assert fit.window[1] < 0.06
    assert 1.0 - np.exp(-((fit.window[1] / 0.5) ** 2)) <= 1.1e-2
    assert fit.theta == 2.0
    assert not fit.ambiguous
    assert fit.tau_star == pytest.approx(0.5, rel=0.02)
    assert fit.free_theta == pytest.approx(2.0, abs=0.05)
    free = fit_short_time(curve, FreeExponent())
    assert free.window == fit.window
    assert free.theta == pytest.approx(2.0, abs=0.05)


def test_default_window_without_short_time_points():
    t = np.geomspace(1.0, 10.0, 20)
    with pytest.raises(InsufficientDataError):
        fit_short_time((t, np.full_like(t, 0.5)))


def test_one_over_n_tail_is_divergent_even_when_partial_sums_settle():
    # 配对项 iχ(n)/n，χ 以 3 为周期取 (1, 1, -2)：部分和振荡着趋于 i·ln3
    k = np.arange(1, 257, dtype=float)
    chi = np.array([-2.0, 1.0, 1.0])[k.astype(int) % 3]
    diag = classify_cubic_sum(_synthetic_coeffs(k, 1j * chi / k ** 4), LADDER)
    assert diag.verdict.kind is VerdictKind.DIVERGES
    assert diag.tail_exponent == pytest.approx(1.0, abs=0.1)
    assert abs(diag.partial_sums[-1][1] - 1j * np.log(3.0)) < 0.02
    assert predict_exponent(diag) == 1.5
    without_tail, *_ = decide_verdict(LADDER, [p for _, p in diag.partial_sums], diag.scale)
    assert without_tail.kind is VerdictKind.CONVERGES
