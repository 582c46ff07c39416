import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from chemosim.domain import Region, build_grid, indicator, laplacian, source_profile
from chemosim.errors import BadResolution, EmptyRegion, GridMismatch, ValidationError


def test_reference_2d_grid():
    g = build_grid(2, 1.0, 50)
    assert g.h == 0.02
    assert g.shape == (51, 51)
    assert g.n_nodes == 2601


def test_smallest_legal_grid():
    g = build_grid(1, 1.0, 2)
    assert np.array_equal(g.axis_coords(), [0.0, 0.5, 1.0])


def test_reference_1d_grid():
    g = build_grid(1, 1.0, 50)
    assert g.axis_coords().shape == (51,)


def test_bad_resolution():
    with pytest.raises(BadResolution):
        build_grid(1, 1.0, 1)
    with pytest.raises(ValidationError):
        build_grid(3, 1.0, 10)
    with pytest.raises(ValidationError):
        build_grid(1, 0.0, 10)


def test_field_shape_checked():
    g = build_grid(1, 1.0, 10)
    with pytest.raises(GridMismatch):
        laplacian(g, np.zeros(10))  # needs 11 nodes


@pytest.mark.parametrize("dim", [1, 2])
def test_laplacian_annihilates_constants(dim):
    g = build_grid(dim, 1.0, 12)
    out = laplacian(g, g.full(3.7))
    assert np.all(out == 0.0)


def test_laplacian_exact_on_quadratics():
    g = build_grid(1, 1.0, 10)
    x = g.axis_coords()
    out = laplacian(g, x * x)
    assert np.allclose(out[1:-1], 2.0, atol=1e-10)


@pytest.mark.parametrize("dim", [1, 2])
def test_laplacian_convergence_order(dim):
    # cosine modes satisfy the no-flux condition, so the reflected-ghost
    # closure is exactly compatible and second order should survive
    errors = {}
    for n in (50, 100):
        g = build_grid(dim, 1.0, n)
        x = g.axis_coords()
        if dim == 1:
            u = np.cos(np.pi * x)
            exact = -np.pi ** 2 * u
        else:
            u = np.outer(np.cos(np.pi * x), np.cos(np.pi * x))
            exact = -2.0 * np.pi ** 2 * u
        errors[n] = np.max(np.abs(laplacian(g, u) - exact))
    order = math.log2(errors[50] / errors[100])
    assert 1.9 <= order <= 2.1


field_elements = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False,
                           allow_infinity=False)


@settings(deadline=None)
@given(data=st.data(), dim=st.sampled_from([1, 2]),
       n=st.integers(min_value=2, max_value=20),
       length=st.floats(min_value=1.0, max_value=2.0))
def test_laplacian_discrete_conservation(data, dim, n, length):
    # no-flux compatibility: the quadrature-weighted sum of the closed
    # Laplacian telescopes to zero for every field
    g = build_grid(dim, length, n)
    u = data.draw(hnp.arrays(np.float64, g.shape, elements=field_elements))
    total = g.integrate(laplacian(g, u))
    assert abs(total) <= 1e-12 * max(1.0, np.max(np.abs(u)))


@settings(deadline=None)
@given(data=st.data(), dim=st.sampled_from([1, 2]),
       n=st.integers(min_value=2, max_value=16),
       a=st.floats(min_value=-100.0, max_value=100.0),
       b=st.floats(min_value=-100.0, max_value=100.0))
def test_laplacian_linearity(data, dim, n, a, b):
    g = build_grid(dim, 1.0, n)
    u = data.draw(hnp.arrays(np.float64, g.shape, elements=field_elements))
    v = data.draw(hnp.arrays(np.float64, g.shape, elements=field_elements))
    lhs = laplacian(g, a * u + b * v)
    rhs = a * laplacian(g, u) + b * laplacian(g, v)
    scale = (abs(a) * np.max(np.abs(u)) + abs(b) * np.max(np.abs(v)) + 1.0) / g.h ** 2
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def brute_force_nodes(region, grid):
    """Independent oracle: pure-python scan of node inclusion."""
    coords = [i * grid.h for i in range(grid.n + 1)]
    eps = 1e-12
    inside = []
    if grid.dim == 1:
        for i, x in enumerate(coords):
            if region.lo[0] - eps <= x <= region.hi[0] + eps:
                inside.append((i,))
    else:
        for i, x in enumerate(coords):
            for j, y in enumerate(coords):
                if (region.lo[0] - eps <= x <= region.hi[0] + eps
                        and region.lo[1] - eps <= y <= region.hi[1] + eps):
                    inside.append((i, j))
    return inside


def test_indicator_centered_square_matches_node_scan():
    g = build_grid(2, 1.0, 50)
    region = Region.box(0.45, 0.55, 0.45, 0.55)
    chi = indicator(region, g)
    inside = brute_force_nodes(region, g)
    assert chi.sum() == len(inside) == 25  # 5 nodes per axis: 0.46 .. 0.54
    for idx in inside:
        assert chi[idx] == 1.0


def test_indicator_left_interval_matches_node_scan():
    g = build_grid(1, 1.0, 50)
    region = Region.interval(0.0, 0.1)
    chi = indicator(region, g)
    inside = brute_force_nodes(region, g)
    assert chi.sum() == len(inside) == 6
    assert np.array_equal(np.nonzero(chi)[0], np.arange(6))


def test_indicator_whole_domain():
    g = build_grid(2, 1.0, 10)
    chi = indicator(Region.box(0.0, 1.0, 0.0, 1.0), g)
    assert np.all(chi == 1.0)


def test_indicator_empty_region():
    g = build_grid(1, 1.0, 50)
    with pytest.raises(EmptyRegion):
        indicator(Region.interval(0.011, 0.019), g)


def test_indicator_region_outside_domain():
    g = build_grid(1, 1.0, 10)
    with pytest.raises(ValidationError):
        indicator(Region.interval(0.5, 1.5), g)
    with pytest.raises(ValidationError):
        indicator(Region.box(0.0, 0.5, 0.0, 0.5), g)  # dim mismatch


def test_region_bounds_ordered():
    with pytest.raises(ValidationError):
        Region.interval(0.6, 0.4)


@pytest.mark.parametrize("dim,region", [
    (1, Region.interval(0.0, 0.1)),
    (1, Region.interval(0.33, 0.77)),
    (2, Region.box(0.45, 0.55, 0.45, 0.55)),
    (2, Region.box(0.1, 0.5, 0.3, 0.9)),
])
def test_source_profile_measure_exact(dim, region):
    g = build_grid(dim, 1.0, 50)
    chi = source_profile(region, g)
    assert np.all((chi >= 0.0) & (chi <= 1.0))
    measure = float((g.quad_weights() * chi).sum())
    exact = np.prod([hi - lo for lo, hi in zip(region.lo, region.hi)])
    assert measure == pytest.approx(float(exact), rel=1e-12)


def test_source_profile_matches_indicator_on_aligned_edges():
    # region edges on dual-cell faces: overlap fractions are all 0 or 1
    g = build_grid(2, 1.0, 50)
    region = Region.box(0.45, 0.55, 0.45, 0.55)
    assert np.array_equal(source_profile(region, g), indicator(region, g))
