import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from horoflow import mobius
from horoflow.mobius import GroupElement, HPoint

reals = st.floats(-10, 10, allow_nan=False)
upper = st.builds(complex, st.floats(-5, 5), st.floats(0.05, 5))


def rel(a, b):
    return np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(np.abs(b), 1.0))


def random_elements(rng, n):
    m = rng.normal(size=(n, 2, 2))
    m[np.linalg.det(m) < 0, 0] *= -1
    return mobius.normalize(m)


def test_compose_identity():
    g = mobius.geodesic_element(0.3) @ mobius.horocycle_element(-1.1)
    assert rel(mobius.compose(np.eye(2), g), g) == 0.0


@given(reals, reals)
def test_geodesic_subgroup_law(s, s2):
    lhs = mobius.compose(mobius.geodesic_element(s), mobius.geodesic_element(s2))
    assert rel(lhs, mobius.geodesic_element(s + s2)) <= 1e-12


@given(reals, reals)
def test_horocycle_subgroup_law(t, t2):
    lhs = mobius.compose(mobius.horocycle_element(t), mobius.horocycle_element(t2))
    assert rel(lhs, mobius.horocycle_element(t + t2)) <= 1e-12


def test_subgroup_laws_bulk(rng):
    s, s2 = rng.uniform(-10, 10, (2, 10_000))
    assert rel(mobius.compose(mobius.geodesic_element(s), mobius.geodesic_element(s2)), mobius.geodesic_element(s + s2)) <= 1e-12
    assert rel(mobius.compose(mobius.horocycle_element(s), mobius.horocycle_element(s2)), mobius.horocycle_element(s + s2)) <= 1e-12


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_conjugation_identity(s, t):
    lhs = mobius.compose(mobius.compose(mobius.geodesic_element(s), mobius.horocycle_element(t)), mobius.geodesic_element(-s))
    assert rel(lhs, mobius.horocycle_element(math.exp(s) * t)) <= 1e-12


def test_conjugation_example():
    lhs = mobius.geodesic_element(1.3) @ mobius.horocycle_element(-2.0) @ mobius.geodesic_element(-1.3)
    assert rel(lhs, mobius.horocycle_element(-2.0 * math.exp(1.3))) <= 1e-12


def test_geodesic_examples():
    assert rel(mobius.geodesic_element(0.0), np.eye(2)) == 0.0
    assert rel(mobius.geodesic_element(2.0), np.diag([math.e, 1 / math.e])) <= 1e-15
    prod = mobius.compose(mobius.geodesic_element(3.7), mobius.geodesic_element(-3.7))
    assert np.max(np.abs(prod - np.eye(2))) <= 1e-14
    with pytest.raises(mobius.RangeError):
        mobius.geodesic_element(700.5)


def test_horocycle_examples():
    assert rel(mobius.horocycle_element(0.0), np.eye(2)) == 0.0
    assert rel(mobius.compose(mobius.horocycle_element(2.5), mobius.horocycle_element(-2.5)), np.eye(2)) == 0.0
    with pytest.raises(mobius.RangeError):
        mobius.horocycle_element(float("inf"))


def test_mobius_action_examples():
    z = 0.3 + 1.7j
    assert mobius.mobius_act(np.eye(2), z) == z
    assert abs(mobius.mobius_act(mobius.geodesic_element(0.8), 1j) - math.exp(0.8) * 1j) <= 1e-15
    assert abs(mobius.mobius_act(mobius.horocycle_element(-1.25), 1j) - (1j - 1.25)) <= 1e-15
    with pytest.raises(mobius.DegenerateActionError):
        mobius.mobius_act(np.zeros((2, 2)), z)


def test_distance_examples():
    assert mobius.hyp_distance(2j, 2j) == 0.0
    assert abs(mobius.hyp_distance(1j, math.e * 1j) - 1.0) <= 1e-15


@given(upper, upper, upper)
def test_distance_metric_axioms(z, w, v):
    d = mobius.hyp_distance
    assert abs(d(z, w) - d(w, z)) <= 1e-12
    assert d(z, v) <= d(z, w) + d(w, v) + 1e-9


@given(upper, upper, st.integers(0, 2**31))
def test_distance_isometry(z, w, seed):
    g = random_elements(np.random.default_rng(seed), 1)[0]
    d0 = mobius.hyp_distance(z, w)
    d1 = mobius.hyp_distance(mobius.mobius_act(g, z), mobius.mobius_act(g, w))
    assert abs(d1 - d0) <= 1e-12 * max(1.0, d0) * max(1.0, float(np.max(np.abs(g))) ** 2)


def test_cosh_distance_matches():
    z, w = 0.4 + 0.2j, -1.0 + 3.0j
    assert abs(mobius.cosh_distance(z, w) - math.cosh(mobius.hyp_distance(z, w))) <= 1e-12


def test_determinant_drift_long_products(rng):
    # 1000 chains of 1000 compositions each
    acc = np.tile(np.eye(2), (1000, 1, 1))
    for _ in range(1000):
        step = mobius.normalize(
            mobius.geodesic_element(rng.uniform(-0.5, 0.5, 1000)) @ mobius.horocycle_element(rng.uniform(-0.5, 0.5, 1000))
        )
        acc = mobius.compose(acc, step)
    assert np.max(np.abs(mobius.det(acc) - 1.0)) <= 1e-10


def test_sign_normalization(rng):
    g = random_elements(rng, 50)
    assert np.allclose(mobius.normalize(-g), g, atol=0)
    flat = g.reshape(-1, 4)
    first = flat[np.arange(50), np.argmax(flat != 0, axis=1)]
    assert np.all(first > 0)


def test_group_element_api():
    g = GroupElement.geodesic(1.0) @ GroupElement.horocycle(2.0)
    assert abs(np.linalg.det(g.matrix) - 1.0) <= 1e-12
    assert rel((g @ g.inverse()).matrix, np.eye(2)) <= 1e-12
    assert GroupElement.from_matrix(-g.matrix) == g
    assert abs(g.act(HPoint(1j)).z - mobius.mobius_act(g.matrix, 1j)) <= 1e-15
    assert abs(GroupElement.geodesic(2.0).trace - 2 * math.cosh(1.0)) <= 1e-12
    assert GroupElement.rotation(0.0) == GroupElement.identity()


def test_hpoint_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        HPoint(1.0 - 0.5j)
    with pytest.raises(ValueError):
        HPoint(2.0 + 0j)
    assert abs(HPoint(1j).distance(HPoint(math.e * 1j)) - 1.0) <= 1e-15
