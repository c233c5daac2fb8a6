import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from anisolab.grid import (
    Grid,
    GridFunction,
    backward_difference,
    discrete_divergence,
    discrete_gradient,
    eta_R,
    forward_difference,
    h_j,
    psi_l,
    restrict_to_ball,
    truncate,
)

reals = st.floats(-1e6, 1e6, allow_nan=False)
levels = st.floats(1e-3, 1e3)


@pytest.mark.parametrize("r, k, want", [(5, 2, 2), (-0.5, 2, -0.5), (-7, 3, -3)])
def test_truncate_examples(r, k, want):
    assert truncate(r, k) == want


@given(reals, reals, levels)
def test_truncate_lipschitz_and_bounded(a, b, k):
    ta, tb = truncate(a, k), truncate(b, k)
    assert abs(ta) <= k
    assert abs(ta - tb) <= abs(a - b) * (1 + 1e-15)
    assert np.sign(ta) == np.sign(a) or ta == 0


@given(reals, levels, st.floats(1.0, 10.0))
def test_truncate_nested_levels(r, k, factor):
    assert truncate(truncate(r, k * factor), k) == truncate(r, k)


def test_eta_examples():
    R = 3.0
    assert eta_R(R / 2, R) == 1.0
    assert eta_R(R + 0.5, R) == 0.5
    assert eta_R(R + 2, R) == 0.0


@given(st.floats(0, 50), st.floats(0, 50), st.floats(0.1, 20))
def test_eta_range_and_lipschitz(r1, r2, R):
    a, b = eta_R(r1, R), eta_R(r2, R)
    assert 0.0 <= a <= 1.0
    assert abs(a - b) <= abs(r1 - r2) + 1e-12


@given(st.floats(0, 30), st.floats(0.1, 10), st.floats(0.1, 10))
def test_eta_product_on_common_plateau(r, R1, R2):
    if r < min(R1, R2):
        assert eta_R(r, R1) * eta_R(r, R2) == eta_R(r, min(R1, R2)) == 1.0


def test_h_j_examples():
    j = 2.0
    assert h_j(0.5 * j, j) == 1.0
    assert h_j(-(j + 0.25), j) == pytest.approx(0.75)
    assert h_j(j + 5, j) == 0.0


@given(st.floats(-20, 20), st.floats(0.1, 10))
def test_h_j_even(s, j):
    assert h_j(s, j) == h_j(-s, j)


def test_psi_examples():
    l = 2.0
    assert psi_l(np.array([l / 2, 0.0]), l) == 1.0
    assert psi_l(np.array([0.0, l + 0.5]), l) == pytest.approx(0.5)
    assert psi_l(np.array([2 * l + 2, 0.0]), l) == 0.0


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_cutoff_parameters_positive(bad):
    for fn in (eta_R, h_j):
        with pytest.raises(ValueError):
            fn(1.0, bad)
    with pytest.raises(ValueError):
        truncate(1.0, bad)


def test_grid_coordinates_and_mesh():
    g = Grid(2, 2.0, 9, 1.5)
    assert g.mesh == 0.5
    j = np.arange(9)
    np.testing.assert_allclose(g.axis(), -2.0 + j * 0.5)
    assert g.coords.shape == (2, 9, 9)
    assert g.cell_volume == 0.25
    assert not g.active[0, 0] and g.active[4, 4]


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(1, 2.0, 9, 1.0)
    with pytest.raises(ValueError):
        Grid(2, 2.0, 9, 3.0)
    with pytest.raises(ValueError):
        Grid.with_mesh(2, 4.0, 0.3)
    g = Grid.with_mesh(2, 4.0, 0.25)
    assert g.extent == 5.0 and g.nodes_per_axis == 41


def test_gradient_sees_dirichlet_zero():
    g = Grid(2, 2.0, 9, 1.2)
    u = g.function(np.ones(g.shape))
    D = discrete_gradient(u)
    # the last active node on the x1 axis row differs against an exterior zero
    row = D[0].values[:, 4]
    last = np.max(np.nonzero(g.active[:, 4]))
    assert row[last] == pytest.approx(-1.0 / g.mesh)
    assert row[last - 1] == 0.0


def test_gradient_of_linear_function():
    g = Grid(2, 4.0, 81, 3.9)
    u = g.function(g.coords[0])
    D = discrete_gradient(u)
    inner = g.radius < 3.0
    np.testing.assert_allclose(D[0].values[inner], 1.0, rtol=1e-12)
    np.testing.assert_allclose(D[1].values[inner], 0.0, atol=1e-12)


@given(arrays(np.float64, (7, 7), elements=st.floats(-10, 10)),
       arrays(np.float64, (7, 7), elements=st.floats(-10, 10)),
       st.floats(-3, 3), st.floats(-3, 3))
def test_gradient_linear(u, v, a, b):
    g = Grid(2, 3.0, 7, 3.0)
    uu, vv = GridFunction(g, u), GridFunction(g, v)
    lhs = discrete_gradient(uu.with_values(a * uu.values + b * vv.values))
    for i in range(2):
        rhs = a * discrete_gradient(uu)[i].values + b * discrete_gradient(vv)[i].values
        np.testing.assert_allclose(lhs[i].values, rhs, rtol=1e-12, atol=1e-9)


@given(arrays(np.float64, (6, 5, 4), elements=st.floats(-10, 10)),
       arrays(np.float64, (6, 5, 4), elements=st.floats(-10, 10)), st.integers(0, 2))
def test_summation_by_parts(u, v, axis):
    h = 0.3
    lhs = np.sum(forward_difference(u, axis, h) * v)
    rhs = -np.sum(u * backward_difference(v, axis, h))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def test_divergence_is_minus_adjoint(rng):
    g = Grid(2, 2.0, 11, 2.0)
    u = g.function(rng.standard_normal(g.shape))
    V = rng.standard_normal((2,) + g.shape)
    lhs = sum(np.sum(d.values * V[i]) for i, d in enumerate(discrete_gradient(u)))
    rhs = -np.sum(np.where(g.active, u.values, 0) * discrete_divergence(V, g))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_truncated_gradient_away_from_interface(rng):
    g = Grid(2, 3.0, 31, 3.0)
    u = g.function(2.0 * np.sin(g.coords[0]) * np.cos(g.coords[1]))
    k = 1.0
    Dt = discrete_gradient(u.with_values(truncate(u.values, k)))
    D = discrete_gradient(u)
    inside = np.abs(u.values) < k
    for i in range(2):
        nxt = np.roll(inside, -1, axis=i)
        idx = [slice(None)] * 2
        idx[i] = -1
        nxt[tuple(idx)] = False
        both = inside & nxt
        np.testing.assert_array_equal(Dt[i].values[both], D[i].values[both])


def test_grid_function_checks():
    g = Grid(2, 1.0, 5, 1.0)
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros((4, 4)))
    with pytest.raises(ValueError):
        GridFunction(g, np.full(g.shape, np.nan))
    assert g.function(np.ones(g.shape)).is_dirichlet()
    assert not GridFunction(g, np.ones(g.shape)).is_dirichlet()


def test_restriction_is_grid_independent():
    small = Grid.with_mesh(2, 3.0, 0.25)
    big = Grid.with_mesh(2, 6.0, 0.25)
    fa = restrict_to_ball(np.sin(small.coords[0]) + small.coords[1], small, 2.0)
    fb = restrict_to_ball(np.sin(big.coords[0]) + big.coords[1], big, 2.0)
    np.testing.assert_allclose(fa, fb, atol=1e-13)
