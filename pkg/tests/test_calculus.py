import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from horoflow import calculus, flows, planar_toy
from horoflow.calculus import AssumptionReport
from horoflow.fields import ScalarField

x_field = ScalarField(lambda s: s[..., 0], label="x")
wave = ScalarField(lambda s: np.sin(s[..., 0]) * np.cos(s[..., 1]), label="sin x cos y")
hermite = ScalarField(lambda s: (s[..., 0] - 0.5 * s[..., 1]) * np.exp(-(s[..., 0] ** 2) - 2 * s[..., 1] ** 2), label="hermite")


@pytest.fixture(scope="module")
def tc_planar(planar, bump):
    return calculus.make_time_change(planar, bump)


@pytest.fixture(scope="module")
def tc_bolza(bolza, u):
    return calculus.make_time_change(bolza, 1.0 + 0.2 * u)


@pytest.fixture(scope="module")
def tc_flat(planar):
    return calculus.make_time_change(planar, ScalarField.constant(1.0, state_ndim=1))


def pts(rng, n, scale=1.0):
    return rng.normal(scale=scale, size=(n, 2))


def test_lie_derivative_examples(planar, bolza, rng):
    q = pts(rng, 50)
    one = ScalarField.constant(3.0, state_ndim=1)
    assert np.max(np.abs(calculus.lie_derivative(planar, 1, one, q, 1e-2))) <= 1e-12
    assert np.max(np.abs(calculus.lie_derivative(planar, 1, x_field, q, 1e-2) - 1.0)) <= 1e-12
    assert np.max(np.abs(calculus.lie_derivative(bolza, 2, ScalarField.constant(1.0, state_ndim=2), bolza.sample(10, 1)))) <= 1e-12
    with pytest.raises(ValueError):
        calculus.lie_derivative(planar, 1, x_field, q, 0.5)


def test_richardson_ratio(planar, rng):
    q = pts(rng, 20, 0.5)
    exact = np.cos(q[:, 0]) * np.cos(q[:, 1])
    e1 = np.abs(calculus.lie_derivative(planar, 1, wave, q, 0.1) - exact)
    e2 = np.abs(calculus.lie_derivative(planar, 1, wave, q, 0.05) - exact)
    ratio = e1 / e2
    assert np.all(np.abs(ratio - 16.0) <= 1.6)


def test_planar_generator_two(planar, rng):
    # X_2 generates s -> F_{2,-s}: L_2 phi = x phi_x - y phi_y
    q = pts(rng, 20)
    expected = q[:, 0] * np.cos(q[:, 0]) * np.cos(q[:, 1]) + q[:, 1] * np.sin(q[:, 0]) * np.sin(q[:, 1])
    assert np.max(np.abs(calculus.lie_derivative(planar, 2, wave, q, 1e-2) - expected)) <= 1e-6


def test_apply_H_flat(planar, tc_flat, rng):
    q = pts(rng, 50)
    H = calculus.apply_H(planar, hermite, tc_flat, q)
    H1 = -1j * calculus.lie_derivative(planar, 1, hermite, q)
    assert np.max(np.abs(H - H1)) <= 1e-14


def test_apply_H_on_constant(planar, tc_planar, bump, rng):
    q = pts(rng, 50)
    c = ScalarField.constant(2.0, state_ndim=1)
    H = calculus.apply_H(planar, c, tc_planar, q)
    assert np.max(np.abs(H - (-0.5j) * calculus.lie_derivative(planar, 1, bump, q) * 2.0)) <= 1e-12


def test_apply_H_forms_agree(bolza, tc_bolza, u):
    p = bolza.sample(1000, 2)
    main = calculus.H_field(bolza, u, tc_bolza)(p)
    lit = calculus.H_nested_field(bolza, u, tc_bolza)(p)
    assert np.max(np.abs(main - lit)) / np.max(np.abs(main)) <= 1e-6


def test_apply_H_audit_raises(planar, tc_planar, rng):
    rough = ScalarField(lambda s: np.sign(np.sin(40 * s[..., 0])), smoothness_scale=1.0, label="rough")
    with pytest.raises(calculus.NumericalDifferentiationError):
        calculus.apply_H(planar, rough, tc_planar, pts(rng, 200), audit_tol=1e-5)


def test_flat_time_change_report(planar, tc_flat):
    rep = tc_flat.report
    assert rep.passed and rep.delta_f == 1.0 and abs(rep.delta_g - 0.5) <= 1e-12
    assert np.max(np.abs(tc_flat.g(np.random.default_rng(0).normal(size=(20, 2))) - 0.5)) <= 1e-12


def test_bolza_example_passes(tc_bolza):
    rep = tc_bolza.report
    assert rep.passed and rep.delta_g > 0 and rep.delta_f > 0
    assert rep.delta_f <= rep.min_f and rep.delta_g <= rep.min_g


def test_adversarial_amplitude_fails(bolza, u):
    # the sampled min of g crosses 0 between amplitudes 10 and 20 (see the notes)
    assert calculus.check_assumption(bolza, 1.0 + 10.0 * u).passed
    rep = calculus.check_assumption(bolza, 1.0 + 20.0 * u)
    assert not rep.passed and rep.delta_g < 0


def test_oversized_planar_bump_fails(planar):
    assert not calculus.check_assumption(planar, planar_toy.planar_bump(3.0, 1.0)).passed


def test_check_assumption_needs_samples(planar, bump):
    with pytest.raises(ValueError):
        calculus.check_assumption(planar, bump, n=999)


def test_report_text_round_trip(tc_bolza):
    text = tc_bolza.report.to_text()
    back = AssumptionReport.from_text(text)
    assert back == tc_bolza.report
    assert "margin_g" in text


def test_g_matches_definition(planar, tc_planar, bump, rng):
    q = pts(rng, 100)
    L2f = calculus.lie_derivative(planar, 2, bump, q)
    assert np.max(np.abs(tc_planar.g(q) - (bump(q) - L2f) / (2 * bump(q)))) <= 1e-14


@given(st.floats(0.0, 2.0), st.floats(0.5, 2.0), st.integers(0, 1000))
def test_sampled_bounds_are_lower_bounds(planar, a, width, seed):
    f = planar_toy.planar_bump(a, width)
    rep = calculus.check_assumption(planar, f, 1000, seed)
    q = np.random.default_rng(seed).uniform(-6, 6, size=(1000, 2))
    assert rep.delta_f <= float(f(q).min()) + 1e-12
    assert rep.delta_g <= float(calculus.g_field(planar, f)(q).min()) + 1e-12


def test_commutator_defect_examples(planar, bolza, u, rng):
    q = pts(rng, 50)
    assert np.max(np.abs(calculus.commutator_defect_H1H2(planar, x_field, q, 1e-2))) <= 1e-6
    c = ScalarField.constant(1.0, state_ndim=1)
    assert np.max(np.abs(calculus.commutator_defect_H1H2(planar, c, q, 1e-2))) == 0.0
    p = bolza.sample(200, 3)
    d = calculus.commutator_defect_H1H2(bolza, u, p)
    assert np.max(np.abs(d)) <= 1e-5 * np.max(np.abs(u(p)))


def test_positive_orientation_is_consistent(rng):
    # flipping the geodesic direction flips both L_2 and e'(0)
    backend = flows.make_backend("planar", "positive")
    q = pts(rng, 20)
    assert backend.e_prime0 == -1.0
    assert np.max(np.abs(calculus.commutator_defect_H1H2(backend, x_field, q, 1e-2))) <= 1e-6


def test_hsq_flat(planar, tc_flat, rng):
    A, B = calculus.hsq_commutator(planar, hermite, tc_flat, pts(rng, 50, 0.7))
    assert np.max(np.abs(A - B)) / np.max(np.abs(A)) <= 1e-4


def test_hsq_constant(planar, tc_planar, rng):
    c = ScalarField.constant(1.0, state_ndim=1)
    A, B = calculus.hsq_commutator(planar, c, tc_planar, pts(rng, 50, 0.7))
    assert np.max(np.abs(A - B)) / np.max(np.abs(A)) <= 1e-4


def test_hsq_bump(planar, tc_planar, rng):
    A, B = calculus.hsq_commutator(planar, hermite, tc_planar, pts(rng, 100, 0.7))
    assert np.max(np.abs(A - B)) / np.max(np.abs(A)) <= 1e-4


@pytest.mark.parametrize("alpha", [-1.0, -0.5, 0.5, 1.0])
def test_multiplier_commutator(planar, tc_planar, alpha, rng):
    q = pts(rng, 50)
    formula, direct = calculus.multiplier_commutator(planar, tc_planar.g, alpha, q)
    assert np.max(np.abs(formula - direct)) <= 1e-5


def test_H1_symmetric(bolza, u):
    p = bolza.sample(20_000, 4)
    psi = u * u
    one = ScalarField.constant(1.0, state_ndim=2)

    def H1(phi):
        return calculus.H_field(bolza, phi, one)

    mean, err = calculus.mc_symmetry_defect(bolza, H1, u, psi, p)
    assert abs(mean) <= 5 * err + 1e-5


def test_H_symmetric(bolza, u, tc_bolza):
    p = bolza.sample(20_000, 5)
    psi = u * u

    def H(phi):
        return calculus.H_field(bolza, phi, tc_bolza)

    mean, err = calculus.mc_symmetry_defect(bolza, H, u, psi, p)
    assert abs(mean) <= 5 * err + 1e-5
