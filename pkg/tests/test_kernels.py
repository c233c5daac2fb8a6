import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from anisolab import kernels

finite = st.floats(-1e3, 1e3, allow_nan=False)
expo = st.floats(1.05, 6.0)


def _pair(n):
    return st.tuples(arrays(np.float64, n, elements=finite), arrays(np.float64, n, elements=expo))


@given(st.integers(1, 600).flatmap(_pair))
def test_modular_sum_matches_numpy(data):
    u, p = data
    for mod in kernels.available_backends().values():
        got = mod.modular_sum(u, p, 1.0)
        want = np.sum(np.abs(u) ** p)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-300)


@given(st.integers(1, 300).flatmap(_pair), st.floats(0.5, 4.0))
def test_luxemburg_gauge_solves_unit_modular(data, vol):
    u, p = data
    if not np.any(u):
        return
    for mod in kernels.available_backends().values():
        lam, it, ok = mod.luxemburg_gauge(u, p, vol, 1e-12, 200)
        assert ok
        assert vol * np.sum(np.abs(u / lam) ** p) == pytest.approx(1.0, rel=1e-9)


def test_luxemburg_gauge_zero(backend):
    lam, it, ok = backend.luxemburg_gauge(np.zeros(7), np.full(7, 2.0), 1.0, 1e-12, 200)
    assert (lam, it, ok) == (0.0, 0, True)


@pytest.mark.parametrize("eps", [0.0, 1e-8, 0.3])
def test_flux_and_weights_formulas(backend, rng, eps):
    xi = rng.uniform(-5, 5, 500)
    xi[:5] = 0.0
    p = rng.uniform(1.2, 4.5, 500)
    r2 = xi**2 + eps**2
    want_a = np.where(r2 > 0, np.maximum(r2, 1e-300) ** ((p - 2) / 2) * xi, 0.0)
    np.testing.assert_allclose(backend.aniso_flux(xi, p, eps), want_a, rtol=1e-13, atol=0)
    nz = r2 > 0
    want_w = np.maximum(r2, 1e-300) ** ((p - 2) / 2)
    np.testing.assert_allclose(np.asarray(backend.aniso_weights(xi, p, eps))[nz], want_w[nz],
                               rtol=1e-13)


def _dense_operator(w, c0, shape, h, active):
    # explicit assembly of -div(w D x) + c0 x on active nodes, zero ghosts
    m = int(np.prod(shape))
    A = np.zeros((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        X = np.where(active, e, 0.0).reshape(shape)
        y = c0 * X.ravel()
        for i in range(len(shape)):
            D = np.diff(X, axis=i, append=0.0) / h
            G = w[i].reshape(shape) * D
            y = y - (np.diff(G, axis=i, prepend=0.0) / h).ravel()
        A[:, j] = np.where(active, y, 0.0)
    return A


@pytest.mark.parametrize("shape", [(5, 6), (4, 3, 5)])
def test_lagged_apply_matches_dense(backend, rng, shape):
    m = int(np.prod(shape))
    w = rng.uniform(0.1, 3.0, (len(shape), m))
    c0 = rng.uniform(0.0, 2.0, m)
    active = (rng.uniform(size=m) < 0.8)
    h = 0.37
    A = _dense_operator(w, c0, shape, h, active)
    x = rng.standard_normal(m)
    got = backend.lagged_apply(x, w, c0, shape, 1.0 / h, active.astype(np.uint8))
    np.testing.assert_allclose(got, A @ x, rtol=1e-12, atol=1e-12)
    # symmetric on the active block
    sub = A[np.ix_(active, active)]
    np.testing.assert_allclose(sub, sub.T, atol=1e-12)


def test_backends_agree(rng):
    mods = kernels.available_backends()
    if len(mods) < 2:
        pytest.skip("compiled backend not built")
    py, cy = mods["python"], mods["cython"]
    u = rng.standard_normal(4096) * 3
    p = rng.uniform(1.3, 4.0, 4096)
    assert cy.modular_sum(u, p, 2.0) == pytest.approx(py.modular_sum(u, p, 2.0), rel=1e-13)
    assert cy.luxemburg_gauge(u, p, 0.01)[0] == pytest.approx(py.luxemburg_gauge(u, p, 0.01)[0],
                                                             rel=1e-11)
    np.testing.assert_allclose(cy.aniso_flux(u, p, 1e-8), py.aniso_flux(u, p, 1e-8), rtol=1e-13)
    shape = (64, 64)
    w = rng.uniform(0.5, 2.0, (2, 4096))
    c0 = rng.uniform(0.0, 1.0, 4096)
    act = np.ones(4096, dtype=np.uint8)
    np.testing.assert_allclose(cy.lagged_apply(u, w, c0, shape, 4.0, act),
                               py.lagged_apply(u, w, c0, shape, 4.0, act), rtol=1e-12, atol=1e-12)


def test_modular_sum_is_deterministic(backend, rng):
    u = rng.standard_normal(10_001)
    p = rng.uniform(1.5, 3.0, 10_001)
    a = backend.modular_sum(u, p, 1.0)
    b = backend.modular_sum(u.copy(), p.copy(), 1.0)
    assert a == b


def test_backend_selection():
    assert kernels.BACKEND in kernels.available_backends()
