"""Pointwise operator calculus built from flow finite differences.

Conventions: H_j = -i L_{X_j} where X_1 generates the horocycle flow and X_2
the dilation normalized by [L_{X_1}, L_{X_2}] = e'(0) L_{X_1}
(see ``FlowBackend.generator_flow``).  With these conventions

    [iH_1, H_2] = e'(0) H_1,
    e^{-isH_2} H_1 e^{isH_2} = e(s) H_1,
    e^{-isH_2} m_f e^{isH_2} = m_{f o F_{2,s}},
    [iH, H_2] = Hg + gH,  g = (e'(0) f - L_{X_2} f) / (2 f).

All derivatives are fourth-order central differences along the flows.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .fields import ScalarField
from .flows import FlowBackend

STEP_RANGE = (1e-4, 1e-1)
_FD_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])


class NumericalDifferentiationError(ArithmeticError):
    pass


def default_step(phi: ScalarField) -> float:
    scale = phi.smoothness_scale if np.isfinite(phi.smoothness_scale) else 1.0
    return float(np.clip(1e-2 * scale, *STEP_RANGE))


def _check_step(step: float) -> None:
    if not STEP_RANGE[0] <= step <= STEP_RANGE[1]:
        raise ValueError(f"step must lie in {STEP_RANGE}")


def _stencil(values: np.ndarray, step: float) -> np.ndarray:
    # (v[-2h] - v[2h] + 8 (v[h] - v[-h])) / 12h, grouped so constants cancel exactly
    return ((values[0] - values[3]) + 8.0 * (values[2] - values[1])) / (12.0 * step)


def _stacked(backend: FlowBackend, j: int, states: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    # one flow call per offset keeps the batch layout (offset, *batch, *state)
    return np.stack([backend.generator_flow(j, states, c) for c in offsets])


def lie_derivative(backend: FlowBackend, j: int, phi: ScalarField, p, step: float | None = None):
    """L_{X_j} phi at the states ``p`` by a fourth-order central difference."""
    step = default_step(phi) if step is None else step
    _check_step(step)
    p = np.asarray(p, dtype=float)
    values = phi(_stacked(backend, j, p, _FD_OFFSETS * step))
    return _stencil(values, step)


def lie_field(backend: FlowBackend, j: int, phi: ScalarField, step: float | None = None) -> ScalarField:
    step = default_step(phi) if step is None else step
    return ScalarField(
        lambda s: lie_derivative(backend, j, phi, s, step),
        phi.smoothness_scale,
        f"L{j}({phi.label})",
        phi.real,
    )


def flow_pullback(backend: FlowBackend, j: int, phi: ScalarField, t: float) -> ScalarField:
    """phi o F_{X_j, t}."""
    return ScalarField(
        lambda s: phi(backend.generator_flow(j, s, t)), phi.smoothness_scale, f"{phi.label}oF{j}", phi.real
    )


# --- time changes -----------------------------------------------------------


def g_field(backend: FlowBackend, f: ScalarField, step: float | None = None) -> ScalarField:
    L2f = lie_field(backend, 2, f, step)
    e0 = backend.e_prime0

    def g(s):
        fv = f(s)
        return (e0 * fv - L2f(s)) / (2.0 * fv)

    return ScalarField(g, f.smoothness_scale, f"g[{f.label}]")


@dataclass
class AssumptionReport:
    f_label: str
    backend: str
    n: int
    seed: int
    min_f: float
    min_g: float
    refined_min_f: float
    refined_min_g: float
    sup_f: float
    sup_L1f: float
    sup_L2f: float
    sup_L1L2f: float
    sup_L2L2f: float
    e_prime0: float
    passed: bool

    @property
    def delta_f(self) -> float:
        return min(self.min_f, self.refined_min_f)

    @property
    def delta_g(self) -> float:
        return min(self.min_g, self.refined_min_g)

    @property
    def margin_f(self) -> float:
        return self.delta_f

    @property
    def margin_g(self) -> float:
        return self.delta_g

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(delta_f=self.delta_f, delta_g=self.delta_g, margin_f=self.margin_f, margin_g=self.margin_g)
        return out

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AssumptionReport":
        raw = {}
        for line in text.splitlines():
            if "=" in line:
                key, value = (x.strip() for x in line.split("=", 1))
                raw[key] = value
        kwargs = {}
        for name, typ in cls.__annotations__.items():
            value = raw[name]
            if typ == "int":
                kwargs[name] = int(value)
            elif typ == "float":
                kwargs[name] = float(value)
            elif typ == "bool":
                kwargs[name] = value == "True"
            else:
                kwargs[name] = value
        return cls(**kwargs)


@dataclass(frozen=True)
class TimeChange:
    f: ScalarField
    delta_f: float
    e_prime0: float
    g: ScalarField
    delta_g: float
    report: AssumptionReport | None = None

    @property
    def admissible(self) -> bool:
        return self.delta_f > 0 and self.delta_g > 0

    @property
    def label(self) -> str:
        return self.f.label


def golden_minimize(fn, lo: float, hi: float, iterations: int = 50):
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iterations):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = fn(d)
    return (c, fc) if fc < fd else (d, fd)


def _audit_states(backend: FlowBackend, n: int, seed: int, box: float):
    if backend.kind == "hyperbolic":
        return backend.sample(n, seed)
    rng = np.random.default_rng(seed)
    return rng.uniform(-box, box, size=(n, 2))


def _refine(backend, field_: ScalarField, start, span: float):
    """Golden-section descent along F_1 then along X_2 from ``start``."""
    p = np.asarray(start, dtype=float)
    best = float(field_(p))
    for j in (1, 2):
        t, val = golden_minimize(lambda t: float(field_(backend.generator_flow(j, p, t))), -span, span)
        if val < best:
            p, best = backend.generator_flow(j, p, t), val
    return best


def check_assumption(
    backend: FlowBackend,
    f: ScalarField,
    n: int = 1000,
    seed: int = 0,
    step: float | None = None,
    box: float = 6.0,
) -> AssumptionReport:
    """Sampled check of f >= delta_f > 0, g >= delta_g > 0 and boundedness of derivatives.

    Planar audits draw uniformly from [-box, box]^2 (the time changes used
    there equal 1 outside a compact set).
    """
    if n < 1000:
        raise ValueError("check_assumption needs n >= 1000")
    states = _audit_states(backend, n, seed, box)
    L1f = lie_field(backend, 1, f, step)
    L2f = lie_field(backend, 2, f, step)
    g = g_field(backend, f, step)
    fv = np.real(f(states))
    gv = np.real(g(states))
    span = 2.0 * (f.smoothness_scale if np.isfinite(f.smoothness_scale) else 1.0)
    refined_f = min(float(fv.min()), _refine(backend, f, states[int(np.argmin(fv))], span))
    refined_g = min(float(gv.min()), _refine(backend, g, states[int(np.argmin(gv))], span))

    def sup(field_):
        return float(np.max(np.abs(field_(states))))

    report = AssumptionReport(
        f_label=f.label,
        backend=backend.kind,
        n=n,
        seed=seed,
        min_f=float(fv.min()),
        min_g=float(gv.min()),
        refined_min_f=refined_f,
        refined_min_g=refined_g,
        sup_f=float(np.max(np.abs(fv))),
        sup_L1f=sup(L1f),
        sup_L2f=sup(L2f),
        sup_L1L2f=sup(lie_field(backend, 1, L2f, step)),
        sup_L2L2f=sup(lie_field(backend, 2, L2f, step)),
        e_prime0=backend.e_prime0,
        passed=False,
    )
    report.passed = bool(report.delta_f > 0 and report.delta_g > 0)
    return report


def make_time_change(
    backend: FlowBackend, f: ScalarField, n: int = 1000, seed: int = 0, step: float | None = None
) -> TimeChange:
    report = check_assumption(backend, f, n, seed, step)
    return TimeChange(f, report.delta_f, backend.e_prime0, g_field(backend, f, step), report.delta_g, report)


def _f_of(tc) -> ScalarField:
    return tc.f if isinstance(tc, TimeChange) else tc


# --- operators ----------------------------------------------------------------


def H_field(backend: FlowBackend, phi: ScalarField, tc, step: float | None = None) -> ScalarField:
    """H phi = -i f L_1 phi - (i/2) (L_1 f) phi as a field (product-rule form)."""
    f = _f_of(tc)
    step = default_step(phi) if step is None else step
    L1phi = lie_field(backend, 1, phi, step)
    L1f = lie_field(backend, 1, f, step)

    def H(s):
        return -1j * f(s) * L1phi(s) - 0.5j * L1f(s) * phi(s)

    return ScalarField(H, min(phi.smoothness_scale, f.smoothness_scale), f"H({phi.label})", real=False)


def H_nested_field(backend: FlowBackend, phi: ScalarField, tc, step: float | None = None) -> ScalarField:
    """f^{1/2} (-i L_1)(f^{1/2} phi), the literal nesting."""
    f = _f_of(tc)
    root = f.map(np.sqrt, f"sqrt({f.label})")
    inner = lie_field(backend, 1, root * phi, step)
    return ScalarField(
        lambda s: -1j * root(s) * inner(s), phi.smoothness_scale, f"Hlit({phi.label})", real=False
    )


def apply_H(
    backend: FlowBackend, phi: ScalarField, tc, p, step: float | None = None, audit_tol: float = 1e-5
):
    """H phi at ``p``; the literal nesting audits the product-rule value."""
    p = np.asarray(p, dtype=float)
    main = H_field(backend, phi, tc, step)(p)
    if audit_tol is not None:
        lit = H_nested_field(backend, phi, tc, step)(p)
        scale = max(float(np.max(np.abs(main))), float(np.max(np.abs(phi(p)))), 1e-300)
        mismatch = float(np.max(np.abs(main - lit))) / scale
        if mismatch > audit_tol:
            raise NumericalDifferentiationError(f"H forms disagree: relative {mismatch:.3e}")
    return main


def commutator_defect_H1H2(backend: FlowBackend, phi: ScalarField, p, step: float | None = None):
    """(L_1 L_2 - L_2 L_1) phi - e'(0) L_1 phi at ``p``; zero up to discretization."""
    step = default_step(phi) if step is None else step
    L1 = lie_field(backend, 1, phi, step)
    L2 = lie_field(backend, 2, phi, step)
    p = np.asarray(p, dtype=float)
    return (
        lie_derivative(backend, 1, L2, p, step)
        - lie_derivative(backend, 2, L1, p, step)
        - backend.e_prime0 * L1(p)
    )


def _conjugated_H(backend: FlowBackend, f: ScalarField, s: float, step: float):
    """Field map psi -> e^{-isH_2} H e^{isH_2} psi = f_s^{1/2} e(s) H_1 f_s^{1/2} psi, f_s = f o F_{2,s}."""
    fs = flow_pullback(backend, 2, f, -s)
    es = float(backend.e(s))
    L1fs = lie_field(backend, 1, fs, step)

    def op(psi: ScalarField) -> ScalarField:
        L1psi = lie_field(backend, 1, psi, step)

        def H(states):
            return -1j * es * (fs(states) * L1psi(states) + 0.5 * L1fs(states) * psi(states))

        return ScalarField(H, psi.smoothness_scale, f"Hs({psi.label})", real=False)

    return op


def hsq_commutator(
    backend: FlowBackend,
    phi: ScalarField,
    tc: TimeChange,
    p,
    s_step: float = 1e-2,
    step: float | None = None,
):
    """(A, B): A = (H^2 g + 2HgH + gH^2) phi, B = d/ds e^{-isH_2} H^2 e^{isH_2} phi at s = 0."""
    step = default_step(phi) if step is None else step
    _check_step(s_step)
    p = np.asarray(p, dtype=float)
    g = tc.g

    def H(psi):
        return H_field(backend, psi, tc, step)

    Hphi = H(phi)
    A = H(H(g * phi))(p) + 2.0 * H(g * Hphi)(p) + g(p) * H(Hphi)(p)

    vals = []
    for c in _FD_OFFSETS:
        op = _conjugated_H(backend, tc.f, c * s_step, step)
        vals.append(op(op(phi))(p))
    B = _stencil(np.array(vals), s_step)
    return A, B


def multiplier_commutator(backend: FlowBackend, g: ScalarField, alpha: float, p, s_step: float = 1e-2, step=None):
    """[i g^alpha, H_2] two ways: -alpha g^{alpha-1} L_2 g and d/ds (g^alpha o F_{2,s}) at 0."""
    p = np.asarray(p, dtype=float)
    ga = g.map(lambda v: v**alpha, f"{g.label}^{alpha}")
    formula = -alpha * g(p) ** (alpha - 1.0) * lie_derivative(backend, 2, g, p, step)
    vals = np.array([flow_pullback(backend, 2, ga, -c * s_step)(p) for c in _FD_OFFSETS])
    return formula, _stencil(vals, s_step)


def mc_symmetry_defect(backend: FlowBackend, op, phi: ScalarField, psi: ScalarField, states):
    """Monte-Carlo estimate of <phi, op psi> - <op phi, psi> and its standard error."""
    samples = np.conj(phi(states)) * op(psi)(states) - np.conj(op(phi)(states)) * psi(states)
    n = samples.size
    return complex(samples.mean()), float(np.std(samples) / math.sqrt(n))
