import dataclasses

import numpy as np
import pytest

from core.errors import InvalidSpecError
from core.initial_states import gaussian_state
from core.potential import build_piecewise
from core.propagation import (
    Boundary,
    BoundaryKind,
    GridSpec,
    compare,
    default_grid,
    free_gaussian_survival,
    propagate,
)


@pytest.fixture(scope="module")
def free_line():
    return build_piecewise([(0.0, 10.0, 0.0)])


def _grid(params, x_min, x_max, dx, boundary=None):
    return GridSpec(
        x_min=x_min,
        x_max=x_max,
        dx=dx,
        dt=0.5 * dx ** 2 / params.hbar_over_2m,
        boundary=boundary or Boundary(),
    )


def test_free_gaussian_spreads_as_expected(free_line, params):
    state = gaussian_state(5.0, 1.0, free_line)
    result = propagate(free_line, state, _grid(params, -15.0, 25.0, 0.02), 1.0, params)
    assert result.survival[0] == pytest.approx(1.0, abs=1e-6)
    expected = free_gaussian_survival(result.times, 1.0, params)
    np.testing.assert_allclose(result.survival, expected, atol=1e-3)
    # Crank–Nicolson 是幺正的
    np.testing.assert_allclose(result.total_norm, 1.0, atol=1e-9)
    assert not result.contaminated
    assert result.times[-1] == pytest.approx(1.0, rel=1e-3)
    assert list(result.to_frame().columns) == ["t_fs", "S_oracle"]


def test_free_gaussian_closed_form(params):
    assert free_gaussian_survival(0.0, 1.0, params) == 1.0
    t = 2.0 / params.hbar_over_2m
    assert free_gaussian_survival(t, 1.0, params) == pytest.approx(1.0 / np.sqrt(2.0))


def test_small_box_is_flagged_as_contaminated(free_line, params):
    state = gaussian_state(2.0, 0.3, free_line)
    result = propagate(free_line, state, _grid(params, -1.0, 11.0, 0.02), 2.0, params)
    assert result.contaminated
    assert 0.0 < result.contamination_time <= 2.0


def test_absorbing_layer_removes_outgoing_flux(free_line, params):
    layer = Boundary(kind=BoundaryKind.ABSORBING_LAYER, width=5.0, strength=1.0)
    state = gaussian_state(5.0, 0.3, free_line)
    result = propagate(free_line, state, _grid(params, -10.0, 20.0, 0.05, layer), 5.0, params)
    assert result.total_norm[0] == pytest.approx(1.0, abs=1e-9)
    assert result.total_norm[-1] < 0.99
    assert np.all(np.diff(result.total_norm) <= 1e-12)
    assert not result.contaminated


def test_snapshots_cover_the_box(free_line, params):
    state = gaussian_state(5.0, 1.0, free_line)
    grid = _grid(params, -5.0, 15.0, 0.05)
    result = propagate(free_line, state, grid, 0.05, params, record_every=5, keep_snapshots=True)
    assert result.snapshots.shape == (len(result.times), len(result.x_box))
    assert result.x_box.min() >= 0.0 and result.x_box.max() <= 10.0
    np.testing.assert_allclose(result.snapshots[0].real, state.evaluate(result.x_box), rtol=1e-6, atol=1e-9)


def test_default_grid(params):
    grid = default_grid(15.0, params)
    assert grid.x_min == -600.0 and grid.x_max == 615.0
    assert grid.dt == pytest.approx(0.5 * 0.02 ** 2 / params.hbar_over_2m)
    assert grid.boundary.kind is BoundaryKind.LARGE_BOX
    grid.validate(15.0, params)


def test_grid_validation(free_line, params):
    state = gaussian_state(5.0, 1.0, free_line)
    good = _grid(params, -5.0, 15.0, 0.05)
    bad_grids = [
        dataclasses.replace(good, dt=good.dt * 1.5),
        dataclasses.replace(good, x_min=1.0),
        dataclasses.replace(good, x_max=9.0),
        dataclasses.replace(good, dx=0.0),
        dataclasses.replace(good, boundary=Boundary(BoundaryKind.ABSORBING_LAYER, width=6.0, strength=1.0)),
        dataclasses.replace(good, boundary=Boundary(BoundaryKind.ABSORBING_LAYER, width=2.0, strength=0.0)),
    ]
    for grid in bad_grids:
        with pytest.raises(InvalidSpecError):
            propagate(free_line, state, grid, 0.1, params)
    with pytest.raises(InvalidSpecError):
        propagate(free_line, state, good, 0.0, params)


def test_compare_interpolates_on_common_range():
    report = compare([0.0, 1.0, 2.0, 3.0], [1.0, 0.9, 0.8, 0.7], [0.5, 2.5], [0.95, 0.75])
    assert report.points == 2
    assert report.t_range == (1.0, 2.0)
    assert report.max_deviation == pytest.approx(0.0, abs=1e-12)
    assert set(report.to_dict()) == {"max_deviation", "median_deviation", "points", "t_range_fs"}
    with pytest.raises(InvalidSpecError):
        compare([0.0, 1.0], [1.0, 0.9], [5.0, 6.0], [0.5, 0.4])
