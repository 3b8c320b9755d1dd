import numpy as np
import pytest

from core.errors import InvalidSpecError
from core.potential import (
    HBAR2_OVER_2ME,
    REFERENCE_DOUBLE_BARRIER,
    DoubleBarrierSpec,
    PhysicalParams,
    build_double_barrier,
    build_piecewise,
    default_physical_params,
    evaluate_potential,
)


def test_default_params_match_effective_mass():
    params = default_physical_params()
    assert params.hbar2_over_2m == pytest.approx(0.568654, rel=1e-5)
    assert params.hbar_over_2m == pytest.approx(0.86394, rel=1e-4)
    assert params.mass_ratio == 0.067


def test_inconsistent_params_rejected():
    with pytest.raises(InvalidSpecError):
        PhysicalParams(hbar=0.6582119569, mass_ratio=0.067, hbar2_over_2m=1.0)
    with pytest.raises(InvalidSpecError):
        default_physical_params(0.0)


def test_params_scale_with_mass():
    light = default_physical_params(0.067)
    heavy = default_physical_params(0.134)
    assert heavy.hbar2_over_2m == pytest.approx(light.hbar2_over_2m / 2, rel=1e-14)
    assert light.hbar2_over_2m == pytest.approx(HBAR2_OVER_2ME / 0.067, rel=1e-14)


def test_double_barrier_layout():
    p = build_double_barrier(REFERENCE_DOUBLE_BARRIER)
    assert p.total_length == 15.0
    assert list(p.edges) == [0.0, 5.0, 10.0]
    assert list(p.heights) == [0.23, 0.0, 0.23]
    assert p.interfaces == [5.0, 10.0]


def test_evaluate_potential_interfaces_belong_to_right_segment():
    p = build_double_barrier(REFERENCE_DOUBLE_BARRIER)
    assert evaluate_potential(p, 0.0) == 0.23
    assert evaluate_potential(p, 5.0) == 0.0
    assert evaluate_potential(p, 10.0) == 0.23
    assert evaluate_potential(p, 15.0) == 0.23
    assert evaluate_potential(p, -0.1) == 0.0
    assert evaluate_potential(p, 15.1) == 0.0
    values = evaluate_potential(p, np.array([2.5, 7.5, 12.5]))
    np.testing.assert_array_equal(values, [0.23, 0.0, 0.23])


@pytest.mark.parametrize(
    "segments",
    [
        [],
        [(0.5, 1.0, 0.1)],
        [(0.0, 1.0, 0.1), (1.5, 2.0, 0.1)],
        [(0.0, 1.0, 0.1), (1.0, 1.0, 0.2)],
        [(0.0, 1.0, float("nan"))],
    ],
)
def test_invalid_piecewise_rejected(segments):
    with pytest.raises(InvalidSpecError):
        build_piecewise(segments)


def test_double_barrier_spec_validation():
    with pytest.raises(InvalidSpecError):
        DoubleBarrierSpec(barrier_width=0.0, well_width=5.0, barrier_height=0.23)
    with pytest.raises(InvalidSpecError):
        DoubleBarrierSpec(barrier_width=5.0, well_width=5.0, barrier_height=-0.1)


def test_to_dict_is_json_ready():
    p = build_piecewise([(0.0, 2.0, 0.1), (2.0, 3.0, -0.05)])
    assert p.to_dict() == {
        "segments": [
            {"x_lo": 0.0, "x_hi": 2.0, "height_eV": 0.1},
            {"x_lo": 2.0, "x_hi": 3.0, "height_eV": -0.05},
        ]
    }
