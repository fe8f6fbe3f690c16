"""Invariant suites run by ``horoflow verify``; each check reports its measured margin."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import quad

from . import calculus, flows, mobius, planar_toy, surface
from .fields import ScalarField


@dataclass
class Check:
    suite: str
    name: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured) and self.measured <= self.tolerance)

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)))


def mobius_suite(rng: np.random.Generator, n: int = 10_000) -> list[Check]:
    s = rng.uniform(-5, 5, n)
    t = rng.uniform(-5, 5, n)
    lhs = mobius.compose(mobius.compose(mobius.geodesic_element(s), mobius.horocycle_element(t)), mobius.geodesic_element(-s))
    rhs = mobius.horocycle_element(np.exp(s) * t)
    g = mobius.compose(mobius.geodesic_element(s), mobius.geodesic_element(t))
    return [
        Check("mobius", "conjugation a_s n_t a_-s = n_(e^s t)", _rel(lhs, rhs), 1e-12),
        Check("mobius", "geodesic group law", _rel(g, mobius.geodesic_element(s + t)), 1e-12),
        Check("mobius", "det = 1", float(np.max(np.abs(mobius.det(lhs) - 1))), 1e-12),
    ]


def surface_suite(group: surface.FuchsianGroup, rng: np.random.Generator, n: int = 1000) -> list[Check]:
    seed = int(rng.integers(2**31))
    backend = flows.HyperbolicBackend(group=group)
    p = backend.sample(n, seed)
    z = mobius.base_point(p)
    word = rng.integers(0, 8, size=(n, 3))
    moved = p.copy()
    for k in range(3):
        moved = np.matmul(group.generators[word[:, k]], moved)
    r1 = surface.reduce(moved, group)
    r2 = surface.reduce(r1, group)
    return [
        Check("surface", "relation product = I", group.relation_error(), 1e-10),
        Check("surface", "reduce idempotent", float(np.max(np.abs(r2 - r1))), 1e-10),
        Check("surface", "reduce coset invariant", float(np.max(np.abs(mobius.base_point(r1) - z))), 1e-10),
        Check("surface", "octagon area = 4 pi", abs(group.area - 4 * math.pi), 1e-12),
    ]


def _quadrature_defect(backend, f, p, t, h):
    worst = 0.0
    for i in range(len(t)):
        val, _ = quad(lambda s: 1.0 / float(f(backend.translate(p[i], s))), 0.0, h[i], epsabs=1e-13, epsrel=1e-13, limit=400)
        worst = max(worst, abs(val - t[i]))
    return worst


def flows_suite(backend: flows.FlowBackend, f: ScalarField, rng: np.random.Generator, n: int = 40, tol: float = 1e-10):
    name = backend.kind
    if backend.kind == "hyperbolic":
        p = backend.sample(n, int(rng.integers(2**31)))
    else:
        p = rng.uniform(-3, 3, size=(n, 2))
    s = rng.uniform(-3, 3, n)[:, None]
    t = rng.uniform(-3, 3, n)[:, None]
    checks = []
    lhs = np.stack([backend.geodesic(backend.horocycle(backend.geodesic(p[i], s[i, 0]), t[i, 0]), -s[i, 0]) for i in range(n)])
    rhs = np.stack([backend.horocycle(p[i], math.exp(s[i, 0]) * t[i, 0]) for i in range(n)])
    conj = max(float(backend.distance(lhs[i], rhs[i])) for i in range(n))
    checks.append(Check("flows", f"{name}: flow-level conjugation", conj, 1e-9))

    T = rng.uniform(-20, 20, n)
    S = rng.uniform(-20, 20, n)
    h = np.array([float(flows.reparam(backend, p[i], T[i], f, tol).h) for i in range(n)])
    checks.append(Check("flows", f"{name}: quadrature identity", _quadrature_defect(backend, f, p, T, h), 1e-9))
    worst = 0.0
    for i in range(n):
        r1 = flows.reparam(backend, p[i], T[i], f, tol)
        r2 = flows.reparam(backend, r1.endpoint, S[i], f, tol)
        r12 = flows.reparam(backend, p[i], T[i] + S[i], f, tol)
        worst = max(worst, abs(float(r12.h) - float(r1.h) - float(r2.h)))
    checks.append(Check("flows", f"{name}: cocycle", worst, 1e-8))
    return checks


def calculus_suite(backend, phi: ScalarField, f: ScalarField, rng: np.random.Generator, n: int = 1000):
    name = backend.kind
    if backend.kind == "hyperbolic":
        p = backend.sample(n, int(rng.integers(2**31)))
    else:
        p = rng.normal(scale=0.8, size=(n, 2))
    scale = float(np.max(np.abs(phi(p))))
    d_coarse = float(np.max(np.abs(calculus.commutator_defect_H1H2(backend, phi, p, 0.1))))
    d_half = float(np.max(np.abs(calculus.commutator_defect_H1H2(backend, phi, p, 0.05))))
    d_fine = float(np.max(np.abs(calculus.commutator_defect_H1H2(backend, phi, p, 1e-2))))
    one = ScalarField.constant(1.0, state_ndim=len(backend.state_shape))
    rep = calculus.check_assumption(backend, one, 1000, int(rng.integers(2**31)))
    checks = [
        Check("calculus", f"{name}: [iH1,H2] = e'(0) H1 defect / scale", d_fine / scale, 1e-5),
        Check("calculus", f"{name}: defect ratio at halved step (>= 8)", 8.0 / (d_coarse / d_half), 1.0),
        Check("calculus", f"{name}: f = 1 gives delta_g = 1/2", abs(rep.delta_g - 0.5), 1e-9),
    ]
    if backend.kind == "planar":
        tc = calculus.make_time_change(backend, f)
        q = rng.normal(scale=0.7, size=(100, 2))
        A, B = calculus.hsq_commutator(backend, phi, tc, q)
        checks.append(Check("calculus", "planar: H^2 g + 2HgH + gH^2 vs conjugation", float(np.max(np.abs(A - B)) / np.max(np.abs(A))), 1e-4))
    return checks


def default_suites(group: surface.FuchsianGroup, seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    bolza = flows.HyperbolicBackend(group=group)
    planar = flows.make_backend("planar")
    u = surface.periodic_function(2.0, group=group)
    bump = planar_toy.planar_bump(0.5, 1.0)
    packet = planar_toy.gaussian_packet(widths=(1.0, 1.0))
    checks = mobius_suite(rng) + surface_suite(group, rng)
    checks += flows_suite(bolza, 1.0 + 0.2 * u, rng)
    checks += flows_suite(planar, bump, rng)
    checks += calculus_suite(bolza, u, 1.0 + 0.2 * u, rng, 300)
    checks += calculus_suite(planar, packet, bump, rng)
    return checks
