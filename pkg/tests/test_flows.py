import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from horoflow import flows, mobius
from horoflow.fields import ScalarField


@pytest.fixture(scope="module")
def f_bolza(u):
    return 1.0 + 0.2 * u


def points(backend, n, seed):
    if backend.kind == "hyperbolic":
        return backend.sample(n, seed)
    return np.random.default_rng(seed).uniform(-3, 3, size=(n, 2))


@pytest.fixture(params=["bolza", "planar"])
def setup(request, bolza, planar, f_bolza, bump):
    return (bolza, f_bolza) if request.param == "bolza" else (planar, bump)


def test_e_is_a_homomorphism(bolza, planar):
    s = np.linspace(-3, 3, 13)
    for b in (bolza, planar):
        assert b.e(0.0) == 1.0
        assert np.max(np.abs(b.e(s[:, None] + s) - b.e(s[:, None]) * b.e(s)) / b.e(s[:, None] + s)) <= 1e-12
        assert b.e_prime0 == 1.0
    assert flows.make_backend("planar", "positive").e_prime0 == -1.0


def test_zero_time_is_identity(setup):
    backend, _ = setup
    p = points(backend, 20, 1)
    assert backend.distance(backend.horocycle(p, 0.0), p).max() <= 1e-12
    assert backend.distance(backend.geodesic(p, 0.0), p).max() <= 1e-12


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_flow_group_laws(bolza, planar, t, t2, seed):
    for backend in (bolza, planar):
        p = points(backend, 4, seed)
        for flow in (backend.horocycle, backend.geodesic):
            d = backend.distance(flow(flow(p, t), t2), flow(p, t + t2))
            assert d.max() <= 1e-10


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_flow_level_conjugation(bolza, planar, s, t, seed):
    for backend in (bolza, planar):
        p = points(backend, 4, seed)
        lhs = backend.geodesic(backend.horocycle(backend.geodesic(p, s), t), -s)
        rhs = backend.horocycle(p, math.exp(s) * t)
        assert backend.distance(lhs, rhs).max() <= 1e-9


def test_geodesic_long_time_stability(bolza):
    # chaos amplifies rounding like e^s, so agreement is checked at s = 10 (see the notes)
    p = bolza.sample(50, 2)
    q = p.copy()
    for _ in range(10):
        q = bolza.geodesic(q, 1.0)
    assert bolza.distance(q, bolza.geodesic(p, 10.0)).max() <= 1e-8


def test_geodesic_range(planar, bolza):
    with pytest.raises(mobius.RangeError):
        planar.geodesic(np.zeros(2), 701.0)
    with pytest.raises(mobius.RangeError):
        bolza.geodesic(np.eye(2), -701.0)


def test_constant_speeds(setup):
    backend, _ = setup
    p = points(backend, 10, 3)
    nd = len(backend.state_shape)
    one = ScalarField.constant(1.0, state_ndim=nd)
    res = flows.reparam(backend, p, 7.5, one)
    assert np.max(np.abs(res.h - 7.5)) <= 1e-15
    res = flows.reparam(backend, p, -4.0, ScalarField.constant(2.5, state_ndim=nd), tol=1e-10)
    assert np.max(np.abs(res.h + 10.0)) <= 1e-10


def _quad_defect(backend, f, p, t, h):
    val, _ = quad(lambda s: 1.0 / float(f(backend.translate(p, s))), 0.0, h, epsabs=1e-13, epsrel=1e-13, limit=500)
    return abs(val - t)


def test_quadrature_identity(setup):
    backend, f = setup
    rng = np.random.default_rng(4)
    p = points(backend, 15, 4)
    for i in range(15):
        t = rng.uniform(-20, 20)
        h = float(flows.reparam(backend, p[i], t, f, tol=1e-10).h)
        assert _quad_defect(backend, f, p[i], t, h) <= 1e-9


def test_cocycle(setup):
    backend, f = setup
    rng = np.random.default_rng(5)
    p = points(backend, 15, 5)
    for i in range(15):
        t, s = rng.uniform(-20, 20, 2)
        r1 = flows.reparam(backend, p[i], t, f)
        r2 = flows.reparam(backend, r1.endpoint, s, f)
        r12 = flows.reparam(backend, p[i], t + s, f)
        assert abs(float(r12.h) - float(r1.h) - float(r2.h)) <= 1e-8


def test_monotone_and_signed(setup):
    backend, f = setup
    p = points(backend, 8, 6)
    grid = np.linspace(-15, 15, 61)
    h = flows.reparam_grid(backend, p, grid, f)
    assert np.all(np.diff(h, axis=0) > 0)
    assert np.array_equal(np.sign(h), np.sign(grid)[:, None] * np.ones_like(h))
    assert np.all(h[30] == 0.0)


def test_orbit_containment(setup):
    backend, f = setup
    p = points(backend, 1, 7)[0]
    end = flows.time_changed_flow(backend, p, 6.0, f)
    orbit = backend.horocycle(np.broadcast_to(p, (20001,) + p.shape), np.linspace(0, 20, 20001))
    d = backend.distance(orbit, np.broadcast_to(end, orbit.shape))
    assert d.min() <= 1e-6 + 20 / 20000


def test_time_changed_endpoint_is_horocycle_of_h(setup):
    backend, f = setup
    p = points(backend, 5, 8)
    res = flows.reparam(backend, p, 3.3, f)
    exact = np.stack([backend.horocycle(p[i], float(res.h[i])) for i in range(5)])
    assert backend.distance(res.endpoint, exact).max() <= 1e-9


def test_tolerance_range_and_stiffness(planar, bump):
    with pytest.raises(ValueError):
        flows.reparam(planar, np.zeros(2), 1.0, bump, tol=1e-3)
    negative = ScalarField(lambda s: -np.ones(np.shape(s)[:-1]), label="neg")
    with pytest.raises(flows.StiffnessError):
        flows.reparam(planar, np.zeros(2), 1.0, negative)


def test_horocycle_preserves_liouville(bolza, u):
    p = bolza.sample(100_000, 9)
    diff = u(bolza.horocycle(p, 1.7)) - u(p)
    assert abs(diff.mean()) <= 3 * diff.std() / math.sqrt(diff.size)


def test_time_changed_flow_preserves_weighted_measure(bolza, u, f_bolza):
    p = bolza.sample(5000, 10)
    w = 1.0 / f_bolza(p)
    phi = u * u
    moved = flows.time_changed_flow(bolza, p, 2.0, f_bolza, tol=1e-8)
    diff = w * (phi(moved) - phi(p))
    assert abs(diff.mean()) <= 3 * diff.std() / math.sqrt(diff.size)


def test_reparam_batch_matches_single_solves(setup):
    backend, f = setup
    p = points(backend, 6, 11)
    t = np.array([-15.0, -0.3, 0.0, 0.7, 4.0, 19.0])
    res = flows.reparam_batch(backend, p, t, f)
    assert res.h[2] == 0.0
    for i in range(len(t)):
        single = flows.reparam(backend, p[i], t[i], f)
        assert abs(float(res.h[i]) - float(single.h)) <= 1e-9
        assert float(backend.distance(res.endpoint[i], single.endpoint)) <= 1e-8
