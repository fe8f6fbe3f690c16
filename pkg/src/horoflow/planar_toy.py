"""Exactly solvable planar model: translation and area-preserving dilation on R^2.

On each horizontal slice the time-changed generator H = f^{1/2} H_1 f^{1/2}
is unitarily equivalent to -i d/du, where u = Y(x; y) = int_0^x dx'/f(x', y).
The map W phi = f^{1/2} phi(X(u; y), y) implements this, so spectral data,
resolvents and spectral projections all reduce to one-dimensional Fourier
analysis in u.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .calculus import TimeChange, g_field
from .fields import ScalarField
from .mobius import RangeError
from .spectral import SpectralDensity

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
INVERSION_TOL = 1e-8
MOURRE_INTERVALS = ((0.5, 1.0), (1.0, 2.0), (2.0, 4.0), (4.0, 8.0), (0.25, 0.5))


class ResolutionError(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


class EmptyProjectionError(ValueError):
    pass


# --- flows and fields ------------------------------------------------------------


def toy_flows(p, t: float | None = None, s: float | None = None) -> np.ndarray:
    """F_{1,t}(x, y) = (x + t, y) or F_{2,s}(x, y) = (e^{-s} x, e^{s} y); pass exactly one of t, s."""
    p = np.asarray(p, dtype=float)
    if (t is None) == (s is None):
        raise ValueError("pass exactly one of t, s")
    out = p.copy()
    if t is not None:
        out[..., 0] += t
        return out
    if abs(s) > 700:
        raise RangeError(f"|s| = {abs(s)} overflows the dilation")
    out[..., 0] *= math.exp(-s)
    out[..., 1] *= math.exp(s)
    return out


def planar_bump(a: float, width: float = 1.0) -> ScalarField:
    """f = 1 + a exp(-(x^2 + y^2) / width^2)."""

    def f(s):
        s = np.asarray(s, dtype=float)
        return 1.0 + a * np.exp(-(s[..., 0] ** 2 + s[..., 1] ** 2) / width**2)

    return ScalarField(f, width, f"planar_bump({a!r},{width!r})", meta={"a": a, "width": width})


def gaussian_packet(
    center=(0.0, 0.0), widths=(1.0, 1.0), wavenumber: float = 0.0, phase: float = 0.0
) -> ScalarField:
    """exp(-((x-x0)/wx)^2 - ((y-y0)/wy)^2) cos(k x + phase), a real wave packet."""
    x0, y0 = center
    wx, wy = widths

    def phi(s):
        s = np.asarray(s, dtype=float)
        x, y = s[..., 0], s[..., 1]
        return np.exp(-(((x - x0) / wx) ** 2) - ((y - y0) / wy) ** 2) * np.cos(wavenumber * x + phase)

    label = f"packet({x0!r},{y0!r};{wx!r},{wy!r};k={wavenumber!r})"
    return ScalarField(phi, min(wx, wy) / (1.0 + abs(wavenumber)), label)


def _field_of(f) -> ScalarField:
    return f.f if isinstance(f, TimeChange) else f


def _on_slices(field_: ScalarField, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate on the points (x[i, j], y[i]); x has shape (ny, nx)."""
    pts = np.stack([x, np.broadcast_to(y[:, None], x.shape)], axis=-1)
    return np.asarray(field_(pts))


# --- rectification ----------------------------------------------------------------


@dataclass
class SliceDiagonalization:
    """Tabulated u = Y(x; y) and its inverse X(u; y) on a grid of slices y_i."""

    f: ScalarField
    y: np.ndarray
    x_nodes: np.ndarray
    Y: np.ndarray
    fx: np.ndarray
    inversion_error: float = 0.0

    @classmethod
    def build(cls, f, y, half_width: float = 10.0, h: float = 0.02) -> "SliceDiagonalization":
        f = _field_of(f)
        y = np.asarray(y, dtype=float)
        m = int(math.ceil(half_width / h))
        x = np.linspace(-m * h, m * h, 2 * m + 1)
        X = np.broadcast_to(x, (y.size, x.size))
        fx = np.real(_on_slices(f, X, y))
        if np.any(fx <= 0):
            raise PreconditionError("f must be positive on the slice grid")
        mid = 0.5 * (x[1:] + x[:-1])
        half = 0.5 * (x[1:] - x[:-1])
        nodes = mid[:, None] + half[:, None] * GL_NODES
        vals = np.real(_on_slices(f, np.broadcast_to(nodes.ravel(), (y.size, nodes.size)), y))
        cell = (1.0 / vals).reshape(y.size, mid.size, GL_NODES.size) @ GL_WEIGHTS * half
        Y = np.concatenate([np.zeros((y.size, 1)), np.cumsum(cell, axis=1)], axis=1)
        Y -= Y[:, m : m + 1]
        out = cls(f, y, x, Y, fx)
        # round trip at cell midpoints, where the two splines are least constrained
        back = out.inverse(out.forward(np.broadcast_to(mid, (y.size, mid.size))))
        out.inversion_error = float(np.max(np.abs(back - mid)))
        if out.inversion_error > INVERSION_TOL:
            raise ResolutionError(f"slice inversion error {out.inversion_error:.2e} > {INVERSION_TOL}")
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Y(x[i, :]; y_i), extended with slope 1/f beyond the tabulated range."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        lo, hi = self.x_nodes[0], self.x_nodes[-1]
        for i in range(self.y.size):
            spl = CubicHermiteSpline(self.x_nodes, self.Y[i], 1.0 / self.fx[i])
            xi = x[i]
            out[i] = spl(np.clip(xi, lo, hi))
            out[i] += np.where(xi > hi, (xi - hi) / self.fx[i, -1], 0.0)
            out[i] += np.where(xi < lo, (xi - lo) / self.fx[i, 0], 0.0)
        return out

    def inverse(self, u: np.ndarray) -> np.ndarray:
        """X(u[i, :]; y_i), the inverse of ``forward`` on each slice."""
        u = np.asarray(u, dtype=float)
        out = np.empty(u.shape)
        for i in range(self.y.size):
            Yi = self.Y[i]
            spl = CubicHermiteSpline(Yi, self.x_nodes, self.fx[i])
            ui = u[i]
            out[i] = spl(np.clip(ui, Yi[0], Yi[-1]))
            out[i] += np.where(ui > Yi[-1], (ui - Yi[-1]) * self.fx[i, -1], 0.0)
            out[i] += np.where(ui < Yi[0], (ui - Yi[0]) * self.fx[i, 0], 0.0)
        return out


@dataclass
class _Rectified:
    """A field pulled into the u coordinate: chi(u; y) = f^{1/2} phi(X(u; y), y)."""

    y: np.ndarray
    u: np.ndarray
    x: np.ndarray
    chi: np.ndarray

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def du(self) -> float:
        return float(self.u[1] - self.u[0])


def _rectify(phi, f, y_half, ny, x_half, du, representation) -> _Rectified:
    f = _field_of(f)
    y = np.linspace(-y_half, y_half, ny)
    diag = SliceDiagonalization.build(f, y, half_width=x_half)
    U = float(np.max(np.abs(diag.Y[:, [0, -1]])))
    n = 2 * int(math.ceil(U / du))
    u = (np.arange(n) - n // 2) * du
    x = diag.inverse(np.broadcast_to(u, (ny, n)))
    fx = np.real(_on_slices(f, x, y))
    vals = _on_slices(phi, x, y)
    if representation == "tilde":
        vals = vals / np.sqrt(fx)
    elif representation != "H":
        raise ValueError(f"unknown representation {representation!r}")
    return _Rectified(y, u, x, np.sqrt(fx) * vals)


def exact_spectrum(
    phi: ScalarField,
    f,
    representation: str = "H",
    y_half: float = 8.0,
    ny: int = 161,
    x_half: float = 10.0,
    du: float = 0.02,
    pad: int = 8,
) -> SpectralDensity:
    """Spectral density of ``phi`` for H = f^{1/2} H_1 f^{1/2} on L^2(R^2).

    rho(lambda) = (1/2pi) int |chi^(lambda; y)|^2 dy with chi = W phi.
    ``representation="tilde"`` gives instead the density of phi for the
    generator of phi -> phi o F~_t on L^2(dx dy / f), which equals the H-density
    of f^{-1/2} phi; this is what the Monte-Carlo correlation estimates.
    """
    r = _rectify(phi, f, y_half, ny, x_half, du, representation)
    n = r.u.size
    M = 1 << int(math.ceil(math.log2(pad * n)))
    buf = np.zeros((ny, M), dtype=complex)
    buf[:, : n - n // 2] = r.chi[:, n // 2 :]
    buf[:, M - n // 2 :] = r.chi[:, : n // 2]
    spec = np.fft.fftshift(np.fft.fft(buf, axis=1), axes=1) * r.du
    freqs = np.fft.fftshift(np.fft.fftfreq(M, d=r.du)) * 2 * math.pi
    rho = np.sum(np.abs(spec) ** 2, axis=0) * r.dy / (2 * math.pi)
    dlam = freqs[1] - freqs[0]
    return SpectralDensity(freqs, rho, "none", float("inf"), float(np.sum(rho) * dlam), 0.0, 0.0)


def l2_norm_sq(phi: ScalarField, y_half: float = 8.0, ny: int = 161, x_half: float = 10.0, h: float = 0.02):
    y = np.linspace(-y_half, y_half, ny)
    x = np.arange(-x_half, x_half + h / 2, h)
    vals = _on_slices(phi, np.broadcast_to(x, (ny, x.size)), y)
    return float(np.sum(np.abs(vals) ** 2) * h * (y[1] - y[0]))


# --- resolvent ---------------------------------------------------------------------


@dataclass
class ResolventReport:
    z: complex
    f_label: str
    psi_label: str
    residual: float
    roundtrip: float
    closed_form_error: float = float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["z"] = [self.z.real, self.z.imag]
        return d


def _fd(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central difference along the last axis (edges set to nan)."""
    d = np.full(values.shape, np.nan, dtype=complex)
    d[..., 2:-2] = (values[..., :-4] - 8 * values[..., 1:-3] + 8 * values[..., 3:-1] - values[..., 4:]) / (12 * h)
    return d


@dataclass
class _SliceGrid:
    y: np.ndarray
    x: np.ndarray
    h: float
    diag: SliceDiagonalization
    f: np.ndarray


def _slice_grid(f, y_half, ny, x_half, h):
    y = np.linspace(-y_half, y_half, ny)
    diag = SliceDiagonalization.build(f, y, half_width=x_half, h=h)
    x = diag.x_nodes
    return _SliceGrid(y, x, h, diag, diag.fx)


def resolvent_apply(z: complex, psi: ScalarField, f, y_half=6.0, ny=61, x_half=10.0, h=0.01):
    """(H + z)^{-1} psi on the tabulation grid; returns (grid, values)."""
    z = complex(z)
    if abs(z.imag) < 0.1:
        raise PreconditionError("resolvent needs |Im z| >= 0.1")
    f = _field_of(f)
    grid = _slice_grid(f, y_half, ny, x_half, h)
    return grid, _resolve(z, psi, f, grid)


def _resolve(z, psi, f, grid: _SliceGrid) -> np.ndarray:
    """Per slice: u solves -i u' + (z/f) u = f^{-1/2} psi, which integrates to
    (e^{izY} u)' = i f^{-1/2} psi e^{izY} with Y' = 1/f; the free constant is
    fixed by decay at +inf (Im z > 0) or -inf (Im z < 0).  Returns f^{-1/2} u.
    """
    ny, nx = grid.y.size, grid.x.size
    edge = np.abs(_on_slices(psi, np.broadcast_to(grid.x[[0, -1]], (ny, 2)), grid.y))
    scale = np.max(np.abs(_on_slices(psi, np.broadcast_to(grid.x, (ny, nx)), grid.y)))
    if np.max(edge) > 1e-12 * max(scale, 1e-300):
        raise PreconditionError("psi does not decay at the slice ends")
    mid = 0.5 * (grid.x[1:] + grid.x[:-1])
    nodes = (mid[:, None] + 0.5 * grid.h * GL_NODES).ravel()
    flat = np.broadcast_to(nodes, (ny, nodes.size))
    fn = np.real(_on_slices(f, flat, grid.y))
    src = _on_slices(psi, flat, grid.y) / np.sqrt(fn)
    Yn = grid.diag.forward(flat).reshape(ny, nx - 1, -1)
    src = src.reshape(ny, nx - 1, -1)
    Y = grid.diag.Y
    w = 0.5 * grid.h * GL_WEIGHTS
    u = np.zeros((ny, nx), dtype=complex)
    if z.imag > 0:
        # I_i = int_{x_i}^inf i s e^{iz(Y - Y_i)}, u_i = -I_i, swept from the right
        local = (1j * src * np.exp(1j * z * (Yn - Y[:, :-1, None]))) @ w
        hop = np.exp(1j * z * (Y[:, 1:] - Y[:, :-1]))
        acc = np.zeros(ny, dtype=complex)
        for i in range(nx - 2, -1, -1):
            acc = local[:, i] + hop[:, i] * acc
            u[:, i] = -acc
    else:
        # u_i = int_{-inf}^{x_i} i s e^{iz(Y - Y_i)}, swept from the left
        local = (1j * src * np.exp(1j * z * (Yn - Y[:, 1:, None]))) @ w
        hop = np.exp(-1j * z * (Y[:, 1:] - Y[:, :-1]))
        acc = np.zeros(ny, dtype=complex)
        for i in range(nx - 1):
            acc = local[:, i] + hop[:, i] * acc
            u[:, i + 1] = acc
    return u / np.sqrt(grid.f)


def _apply_H_plus_z(z, v, grid: _SliceGrid) -> np.ndarray:
    root = np.sqrt(grid.f)
    return -1j * root * _fd(root * v, grid.h) + z * v


def resolvent_check(
    z: complex, psi: ScalarField, f, y_half: float = 6.0, ny: int = 61, x_half: float = 10.0, h: float = 0.01
) -> ResolventReport:
    """Solve (H + z) v = psi in closed form per slice and audit it by finite differences.

    ``residual`` is the L^2-relative size of (H + z) v - psi; ``roundtrip``
    applies H + z to psi first and checks that the solver returns psi.
    """
    z = complex(z)
    if abs(z.imag) < 0.1:
        raise PreconditionError("resolvent needs |Im z| >= 0.1")
    f = _field_of(f)
    grid = _slice_grid(f, y_half, ny, x_half, h)
    ny, nx = grid.y.size, grid.x.size
    X = np.broadcast_to(grid.x, (ny, nx))
    psi_vals = _on_slices(psi, X, grid.y)
    inner = (slice(None), slice(2, -2))
    norm = math.sqrt(np.sum(np.abs(psi_vals[inner]) ** 2))

    v = _resolve(z, psi, f, grid)
    residual = math.sqrt(np.sum(np.abs(_apply_H_plus_z(z, v, grid)[inner] - psi_vals[inner]) ** 2)) / norm

    # (H + z) psi as a field: -i f^{1/2} d/dx (f^{1/2} psi) + z psi, derivatives by central FD
    eps = 1e-3

    def forward(s):
        s = np.asarray(s, dtype=float)
        out = z * np.asarray(psi(s), dtype=complex)
        shifts = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)]
        deriv = 0.0
        for k, c in shifts:
            q = s.copy()
            q[..., 0] += k * eps
            deriv = deriv + c * np.sqrt(np.real(f(q))) * psi(q)
        return out - 1j * np.sqrt(np.real(f(s))) * deriv / (12 * eps)

    back = _resolve(z, ScalarField(forward, psi.smoothness_scale, "(H+z)psi", real=False), f, grid)
    roundtrip = math.sqrt(np.sum(np.abs(back[inner] - psi_vals[inner]) ** 2)) / norm
    return ResolventReport(z, f.label, psi.label, residual, roundtrip)


# --- Mourre estimate -----------------------------------------------------------------


@dataclass
class MourreReport:
    interval: tuple
    f_label: str
    psi_label: str
    delta_g: float
    a: float
    norm_sq: float
    q: float
    margin: float

    @property
    def slack(self) -> float:
        return self.q - self.a * self.norm_sq

    @property
    def passed(self) -> bool:
        return self.slack >= -1e-6 * abs(self.q)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["slack"] = self.slack
        d["passed"] = self.passed
        return d


def smoothed_indicator(lam2: np.ndarray, lo: float, hi: float, margin: float) -> np.ndarray:
    """C^1 ramp to 1 on [lo + margin, hi - margin], zero outside [lo, hi]."""

    def ramp(s):
        s = np.clip(s, 0.0, 1.0)
        return s * s * (3.0 - 2.0 * s)

    return ramp((lam2 - lo) / margin) * ramp((hi - lam2) / margin)


def mourre_check(
    J,
    psi: ScalarField,
    tc: TimeChange,
    y_half: float = 8.0,
    ny: int = 161,
    x_half: float = 10.0,
    du: float = 0.02,
) -> MourreReport:
    """q = <phi_J, (H^2 g + 2 H g H + g H^2) phi_J> against a ||phi_J||^2, a = 2 delta_g inf J.

    phi_J = chi_J(H^2) psi is formed in the rectified Fourier domain, where
    H acts as -i d/du; q = 2 Re<D^2 chi, g chi> + 2 <D chi, g D chi> with
    spectral derivatives.
    """
    lo, hi = map(float, J)
    if not (0 < lo < hi < math.inf):
        raise ValueError("J must be a bounded interval in (0, inf)")
    if not tc.admissible:
        raise PreconditionError("time change failed the assumption check")
    margin = 1e-3 * (hi - lo)
    r = _rectify(psi, tc.f, y_half, ny, x_half, du, "H")
    n = r.u.size
    k = 2 * math.pi * np.fft.fftfreq(n, d=r.du)
    spec = np.fft.fft(r.chi, axis=1) * smoothed_indicator(k**2, lo, hi, margin)
    chi = np.fft.ifft(spec, axis=1)
    d1 = np.fft.ifft(1j * k * spec, axis=1)
    D2 = np.fft.ifft(k**2 * spec, axis=1)  # D = -i d/du, D^2 = -d^2/du^2
    gvals = np.real(tc.g(np.stack([r.x, np.broadcast_to(r.y[:, None], r.x.shape)], axis=-1)))
    cell = r.du * r.dy
    norm_sq = float(np.sum(np.abs(chi) ** 2) * cell)
    if math.sqrt(norm_sq) < 1e-8:
        raise EmptyProjectionError(f"psi has no spectral mass in J = [{lo}, {hi}]")
    q = float(np.sum(2 * np.real(np.conj(D2) * gvals * chi) + 2 * gvals * np.abs(d1) ** 2) * cell)
    return MourreReport((lo, hi), tc.f.label, psi.label, tc.delta_g, 2 * tc.delta_g * lo, norm_sq, q, margin)
