"""Horocycle, geodesic and time-changed flows on both backends.

Flows act on batches of states by right translation (hyperbolic backend) or
by the explicit linear maps of the planar model.  The time change solves
dh/dt = f(F_{1,h}(p)), h(p, 0) = 0 with an embedded Dormand-Prince 5(4) pair
and its quartic dense output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate._ivp.rk import RK45

from . import mobius, surface

ORIENTATIONS = ("negative", "positive")
TOL_RANGE = (1e-12, 1e-6)
MIN_STEP = 1e-12
GEODESIC_SUBSTEP = 2.0

_A, _B, _C, _E, _P = RK45.A, RK45.B, RK45.C, RK45.E, RK45.P


class StiffnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowBackend:
    """Common interface; ``states`` are arrays with a trailing state shape."""

    kind: str = "abstract"
    orientation: str = "negative"

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}")

    @property
    def sigma(self) -> float:
        return 1.0 if self.orientation == "negative" else -1.0

    @property
    def e_prime0(self) -> float:
        # F_{2,-s} o F_{1,t} o F_{2,s} = F_{1,e(s) t} with e(s) = exp(e'(0) s)
        return self.sigma

    def e(self, s):
        return np.exp(self.e_prime0 * np.asarray(s, dtype=float))

    # overridden by the concrete backends
    state_shape: tuple = ()

    def translate(self, states, t):
        """Horocycle translation without reduction (used inside the integrator)."""
        raise NotImplementedError

    def reduce(self, states):
        return np.asarray(states, dtype=float)

    def horocycle(self, states, t):
        return self.reduce(self.translate(states, t))

    def geodesic(self, states, s):
        raise NotImplementedError

    def generator_flow(self, j: int, states, t):
        """Flow of the field X_j with H_j = -i L_{X_j}.

        X_1 generates the horocycle flow.  X_2 is normalized by the bracket
        relation [L_{X_1}, L_{X_2}] = e'(0) L_{X_1}; for flows satisfying
        F_{2,-s} F_{1,t} F_{2,s} = F_{1,e(s)t} this is the generator of
        s -> F_{2,-s}.
        """
        if j == 1:
            return self.horocycle(states, t)
        if j == 2:
            return self.geodesic(states, -np.asarray(t, dtype=float))
        raise ValueError("flow index must be 1 or 2")

    def distance(self, a, b):
        raise NotImplementedError

    def batch_shape(self, states) -> tuple:
        states = np.asarray(states)
        return states.shape[: states.ndim - len(self.state_shape)]


@dataclass(frozen=True)
class HyperbolicBackend(FlowBackend):
    group: surface.FuchsianGroup = field(default_factory=surface.build_bolza)
    kind: str = "hyperbolic"
    state_shape: tuple = (2, 2)

    def translate(self, states, t):
        states = np.asarray(states, dtype=float)
        return np.matmul(states, mobius.horocycle_element(t))

    def reduce(self, states):
        return surface.reduce(states, self.group)

    def geodesic(self, states, s):
        """p a_s, reduced; long times go in reduced sub-steps of length <= GEODESIC_SUBSTEP
        so that representatives never carry entries of size e^{|s|/2}."""
        s = self.sigma * np.asarray(s, dtype=float)
        if np.any(np.abs(s) > mobius.MAX_GEODESIC_TIME):
            raise mobius.RangeError(f"|s| must be <= {mobius.MAX_GEODESIC_TIME}")
        pieces = max(1, int(np.ceil(np.max(np.abs(s)) / GEODESIC_SUBSTEP))) if s.size else 1
        step = mobius.geodesic_element(s / pieces)
        states = np.asarray(states, dtype=float)
        for _ in range(pieces):
            states = self.reduce(mobius.normalize(np.matmul(states, step)))
        return states

    def distance(self, a, b):
        """Distance between the base points of two reduced states (on the quotient)."""
        za = mobius.base_point(self.reduce(a))
        zb = mobius.base_point(self.reduce(b))
        d = mobius.hyp_distance(za, zb)
        # near the octagon boundary two reductions can land on paired sides
        for gen in self.group.generators:
            d = np.minimum(d, mobius.hyp_distance(mobius.mobius_act(gen, za), zb))
        return d

    def sample(self, n: int, seed: int):
        return surface.sample_phase(n, seed, self.group)


@dataclass(frozen=True)
class PlanarBackend(FlowBackend):
    """M = R^2 with Lebesgue measure; F_1 translates x, F_2 is the hyperbolic shear."""

    kind: str = "planar"
    state_shape: tuple = (2,)

    def translate(self, states, t):
        states = np.array(states, dtype=float, copy=True)
        states[..., 0] = states[..., 0] + t
        return states

    def geodesic(self, states, s):
        s = self.sigma * np.asarray(s, dtype=float)
        if np.any(np.abs(s) > mobius.MAX_GEODESIC_TIME):
            raise mobius.RangeError(f"|s| must be <= {mobius.MAX_GEODESIC_TIME}")
        states = np.array(states, dtype=float, copy=True)
        states[..., 0] = np.exp(-s) * states[..., 0]
        states[..., 1] = np.exp(s) * states[..., 1]
        return states

    def distance(self, a, b):
        return np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)


def make_backend(kind: str, orientation: str = "negative", group=None) -> FlowBackend:
    if kind in ("bolza", "hyperbolic"):
        return HyperbolicBackend(orientation=orientation, group=group or surface.build_bolza())
    if kind == "planar":
        return PlanarBackend(orientation=orientation)
    raise ValueError(f"unknown backend {kind!r}")


def horocycle(backend: FlowBackend, p, t):
    return backend.horocycle(p, t)


def geodesic(backend: FlowBackend, p, s):
    return backend.geodesic(p, s)


# --- time change ----------------------------------------------------------


@dataclass
class ReparamResult:
    h: np.ndarray
    endpoint: np.ndarray
    steps: int
    est_error: float


def _speed(f) -> Callable:
    return getattr(f, "f", f)


def _check_tol(tol: float) -> None:
    if not TOL_RANGE[0] <= tol <= TOL_RANGE[1]:
        raise ValueError(f"tol must lie in [{TOL_RANGE[0]}, {TOL_RANGE[1]}]")


def integrate_time_change(
    backend: FlowBackend,
    states,
    f,
    t_out,
    tol: float = 1e-10,
    on_output: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> ReparamResult:
    """Solve dh/dt = f(F_{1,h} p) for a batch of starting states.

    ``t_out`` is a monotone sequence of times sharing one sign (zero allowed),
    sorted by absolute value.  ``on_output(k, h_k, states_k)`` is called for each
    output time in order; the result carries h at every output time.
    """
    _check_tol(tol)
    speed = _speed(f)
    states = backend.reduce(np.asarray(states, dtype=float))
    t_out = np.atleast_1d(np.asarray(t_out, dtype=float))
    batch = backend.batch_shape(states)
    flat = states.reshape((-1,) + backend.state_shape)
    n = flat.shape[0]
    if np.any(np.diff(np.abs(t_out)) < 0) or (np.any(t_out > 0) and np.any(t_out < 0)):
        raise ValueError("output times must share one sign and be sorted by magnitude")
    t_end = float(t_out[np.argmax(np.abs(t_out))]) if t_out.size else 0.0
    direction = 1.0 if t_end >= 0 else -1.0

    h_out = np.zeros((t_out.size, n))
    base = flat.copy()
    h_base = np.zeros(n)
    h = np.zeros(n)
    t = 0.0
    k_next = 0

    def emit(k, hk):
        h_out[k] = hk
        if on_output is not None:
            pts = backend.translate(base, hk - h_base)
            on_output(k, hk.reshape(batch), pts.reshape(batch + backend.state_shape))

    while k_next < t_out.size and t_out[k_next] == 0.0:
        emit(k_next, h)
        k_next += 1

    def rhs(hh):
        return np.asarray(speed(backend.translate(base, hh - h_base)), dtype=float)

    steps = 0
    est_error = 0.0
    if k_next < t_out.size:
        k1 = rhs(h)
        if np.any(k1 <= 0):
            raise StiffnessError("time change must be positive")
        dt = direction * min(abs(t_end), 0.1 / max(1.0, float(np.max(k1))))
        K = np.empty((7, n))
        while k_next < t_out.size:
            remaining = t_end - t
            if abs(dt) > abs(remaining):
                dt = remaining
            K[0] = k1
            for i in range(1, 6):
                K[i] = rhs(h + dt * (_A[i, :i] @ K[:i]))
            h_new = h + dt * (_B @ K[:6])
            K[6] = rhs(h_new)
            err = np.abs(dt * (_E @ K))
            norm = float(np.max(err)) / tol if n else 0.0
            if norm <= 1.0:
                t_new = t + dt
                while k_next < t_out.size and direction * (t_out[k_next] - t_new) <= 0.0:
                    theta = (t_out[k_next] - t) / dt
                    powers = np.cumprod(np.full(4, theta))
                    hk = h + dt * ((_P @ powers) @ K)
                    if direction * (t_out[k_next] - t_new) == 0.0:
                        hk = h_new
                    emit(k_next, hk)
                    k_next += 1
                t, h, k1 = t_new, h_new, K[6].copy()
                base = backend.reduce(backend.translate(base, h - h_base))
                h_base = h.copy()
                steps += 1
                est_error += float(np.max(err)) if n else 0.0
                factor = 5.0 if norm == 0 else min(5.0, 0.9 * norm ** -0.2)
            else:
                factor = max(0.2, 0.9 * norm ** -0.2)
            dt *= factor
            if abs(dt) < MIN_STEP and k_next < t_out.size:
                raise StiffnessError(f"step size underflow at t={t:.6g}")

    endpoint = base.reshape(batch + backend.state_shape)
    return ReparamResult(h_out.reshape((t_out.size,) + batch), endpoint, steps, est_error)


def reparam(backend: FlowBackend, p, t: float, f, tol: float = 1e-10) -> ReparamResult:
    """h(p, t) and the time-changed endpoint F_{1,h(p,t)}(p)."""
    res = integrate_time_change(backend, p, f, [float(t)], tol)
    return ReparamResult(res.h[0], res.endpoint, res.steps, res.est_error)


def time_changed_flow(backend: FlowBackend, p, t: float, f, tol: float = 1e-10):
    return reparam(backend, p, t, f, tol).endpoint


def reparam_grid(backend: FlowBackend, p, t_grid, f, tol: float = 1e-10) -> np.ndarray:
    """h(p, t) on an arbitrary grid (both signs allowed), one solve per sign."""
    t_grid = np.asarray(t_grid, dtype=float)
    batch = backend.batch_shape(p)
    out = np.zeros(t_grid.shape + batch)
    for sign in (1.0, -1.0):
        mask = sign * t_grid > 0
        if not np.any(mask):
            continue
        idx = np.flatnonzero(mask)
        order = idx[np.argsort(np.abs(t_grid[idx]))]
        res = integrate_time_change(backend, p, f, t_grid[order], tol)
        out[order] = res.h
    return out


def reparam_batch(backend: FlowBackend, p, t, f, tol: float = 1e-10) -> ReparamResult:
    """h(p_i, t_i) for per-sample end times, solved as one batch.

    With t = |t_i| tau the system dh/dtau = |t_i| f(F_{1,h} p_i) ends at tau = +-1 for
    every sample, so a single adaptive solve covers each sign class.
    """
    p = backend.reduce(np.asarray(p, dtype=float))
    batch = backend.batch_shape(p)
    t = np.broadcast_to(np.asarray(t, dtype=float), batch).ravel()
    flat = p.reshape((-1,) + backend.state_shape)
    speed = _speed(f)
    h = np.zeros(t.size)
    endpoint = flat.copy()
    steps, est = 0, 0.0
    for sign in (1.0, -1.0):
        idx = np.flatnonzero(sign * t > 0)
        if idx.size == 0:
            continue
        scale = np.abs(t[idx])
        res = integrate_time_change(backend, flat[idx], lambda s, c=scale: c * speed(s), [sign], tol)
        h[idx] = res.h[0]
        endpoint[idx] = res.endpoint
        steps += res.steps
        est += res.est_error
    return ReparamResult(h.reshape(batch), endpoint.reshape(batch + backend.state_shape), steps, est)
