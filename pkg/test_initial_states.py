import numpy as np
import pytest
from scipy.integrate import quad

from core.errors import InvalidSpecError, ProvenanceError
from core.initial_states import StateKind, expansion_coefficients, gaussian_state, sinusoidal_state
from core.potential import DoubleBarrierSpec, build_double_barrier
from core.resonance import evaluate_state


def _breaks(state):
    lo, hi = state.support
    return [x for x in (5.0, 10.0) if lo < x < hi] or None


def _norm(state):
    lo, hi = state.support
    return quad(lambda x: state.evaluate(x) ** 2, lo, hi, points=_breaks(state), epsabs=1e-13, limit=200)[0]


def _overlap_quadrature(state, resonant):
    lo, hi = state.support
    breaks = _breaks(state)

    def part(fn):
        return quad(lambda x: state.evaluate(x) * fn(evaluate_state(resonant, x)), lo, hi,
                    points=breaks, epsabs=1e-13, epsrel=1e-12, limit=400)[0]

    return complex(part(np.real), part(np.imag))


def test_gaussian_is_normalized_on_support(gaussian):
    assert gaussian.kind is StateKind.GAUSSIAN
    assert gaussian.x0 == 7.5 and gaussian.sigma == 0.5
    assert not gaussian.cutoff_warning
    assert _norm(gaussian) == pytest.approx(1.0, rel=1e-10)


def test_wide_gaussian_is_renormalized_with_warning(barrier):
    state = gaussian_state(7.5, 5.0, barrier)
    assert state.cutoff_warning
    assert state.cutoff_mass > 1e-3
    assert _norm(state) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("x0, sigma", [(0.0, 0.5), (15.0, 0.5), (7.5, 0.0), (7.5, -1.0)])
def test_invalid_gaussian(barrier, x0, sigma):
    with pytest.raises(InvalidSpecError):
        gaussian_state(x0, sigma, barrier)


def test_sine_state(sine):
    assert sine.kind is StateKind.SINUSOIDAL
    assert sine.wavenumber == pytest.approx(np.pi / 5.0)
    assert sine.evaluate(2.0) == 0.0
    assert sine.evaluate(12.0) == 0.0
    assert sine.evaluate(7.5) == pytest.approx(np.sqrt(2.0 / 5.0))
    assert _norm(sine) == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(InvalidSpecError):
        sinusoidal_state(0, DoubleBarrierSpec(5.0, 5.0, 0.23))


def test_derivative_matches_finite_difference(gaussian, sine):
    h = 1e-6
    for state, x in ((gaussian, 7.1), (sine, 6.3)):
        numeric = (state.evaluate(x + h) - state.evaluate(x - h)) / (2 * h)
        assert state.derivative(x) == pytest.approx(numeric, rel=1e-6)


def test_gaussian_coefficients_match_quadrature(gaussian_coeffs, barrier_poles):
    for i in (0, 1, 4, 9):
        expected = _overlap_quadrature(gaussian_coeffs.source_state, barrier_poles.resonances[i])
        got = gaussian_coeffs.c[gaussian_coeffs.n == i + 1][0]
        assert got == pytest.approx(expected, rel=1e-8, abs=1e-12)


def test_sine_coefficients_match_quadrature(sine_coeffs, barrier_poles):
    for i in (0, 1, 2, 7):
        expected = _overlap_quadrature(sine_coeffs.source_state, barrier_poles.resonances[i])
        got = sine_coeffs.c[sine_coeffs.n == i + 1][0]
        assert got == pytest.approx(expected, rel=1e-8, abs=1e-12)


def test_coefficient_symmetries(gaussian_coeffs):
    np.testing.assert_array_equal(gaussian_coeffs.c_bar, gaussian_coeffs.c)
    for k in range(1, 6):
        c_plus = gaussian_coeffs.c[gaussian_coeffs.n == k][0]
        c_minus = gaussian_coeffs.c[gaussian_coeffs.n == -k][0]
        assert c_minus == np.conj(c_plus)


def test_closure_sum_rule(gaussian_coeffs):
    assert 0.5 * np.sum(gaussian_coeffs.product) == pytest.approx(1.0, abs=1e-3)


def test_indices_sorted_by_modulus(gaussian_coeffs):
    idx = gaussian_coeffs.indices(10)
    moduli = np.abs(gaussian_coeffs.kappa[idx])
    assert np.all(np.diff(moduli) >= 0)
    assert np.all(np.abs(gaussian_coeffs.n[idx]) <= 10)
    assert len(gaussian_coeffs.states(10)) == len(idx)
    with pytest.raises(InvalidSpecError):
        gaussian_coeffs.indices(gaussian_coeffs.pole_count + 1)


def test_entries_and_pole_count(gaussian_coeffs):
    assert gaussian_coeffs.pole_count == 40
    first = gaussian_coeffs.entries[0]
    assert first.product == pytest.approx(first.c * first.c_bar)


def test_truncated_coefficient_set(gaussian, barrier_poles):
    coeffs = expansion_coefficients(gaussian, barrier_poles, n_max=5)
    assert coeffs.pole_count == 5
    assert len(coeffs.n) == len(barrier_poles.imaginary) + 10


def test_provenance_checked(barrier_poles):
    other = build_double_barrier(DoubleBarrierSpec(5.0, 6.0, 0.23))
    with pytest.raises(ProvenanceError):
        expansion_coefficients(gaussian_state(8.0, 0.5, other), barrier_poles)


def test_describe(gaussian, sine):
    assert gaussian.describe() == {"kind": "gaussian", "x0_nm": 7.5, "sigma_nm": 0.5}
    assert sine.describe() == {"kind": "sinusoidal", "j": 1, "window_nm": [5.0, 10.0]}
