"""Correlation functions of the time-changed flow and their spectral diagnostics."""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .fields import ScalarField
from .flows import FlowBackend, integrate_time_change

CHUNK = 1024
MAX_LAGS = 10**6


class InsufficientSamplesWarning(UserWarning):
    pass


@dataclass
class CorrelationSeries:
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int = 0
    seed: int = 0
    f_label: str = ""
    phi_label: str = ""
    mean_subtracted: bool = False
    mean_value: complex = 0.0
    backend: str = ""

    @property
    def dt(self) -> float:
        return float(self.lags[1] - self.lags[0])

    @property
    def horizon(self) -> float:
        return float(self.lags[-1])

    @property
    def c0(self) -> complex:
        return complex(self.values[len(self.values) // 2])

    def subtract_mean(self) -> "CorrelationSeries":
        if self.mean_subtracted:
            return self
        out = CorrelationSeries(**{**self.__dict__})
        out.values = self.values - abs(self.mean_value) ** 2
        out.mean_subtracted = True
        return out

    def hermitian_defect(self) -> np.ndarray:
        """|C(-t) - conj C(t)| / (3 stderr) per lag (<= 1 means consistent)."""
        diff = np.abs(self.values[::-1] - np.conj(self.values))
        # absolute floor for lags where every sampled overlap vanishes to rounding
        floor = 1e-12 * max(abs(self.c0), np.finfo(float).tiny)
        return diff / (3.0 * np.maximum(self.stderr, self.stderr[::-1]) + floor)

    def metadata(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "f_label": self.f_label,
            "phi_label": self.phi_label,
            "mean_subtracted": self.mean_subtracted,
            "mean_value": [float(np.real(self.mean_value)), float(np.imag(self.mean_value))],
            "backend": self.backend,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "re", "im", "stderr"])
            for t, c, s in zip(self.lags, self.values, self.stderr):
                w.writerow([repr(float(t)), repr(float(c.real)), repr(float(c.imag)), repr(float(s))])

    @classmethod
    def from_csv(cls, path, **meta) -> "CorrelationSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if "mean_value" in meta and isinstance(meta["mean_value"], list):
            meta["mean_value"] = complex(*meta["mean_value"])
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2], data[:, 3], **meta)


@dataclass
class SpectralDensity:
    freqs: np.ndarray
    density: np.ndarray
    window: str = "hann"
    half_width: float = 0.0
    integral: float = 0.0
    negativity_deficit: float = 0.0
    deficit_bound: float = float("nan")

    @property
    def dlam(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "rho"])
            for lam, rho in zip(self.freqs, self.density):
                w.writerow([repr(float(lam)), repr(float(rho))])

    @classmethod
    def from_csv(cls, path, **meta) -> "SpectralDensity":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], **meta)

    def metadata(self) -> dict:
        return {
            "window": self.window,
            "half_width": self.half_width,
            "integral": self.integral,
            "negativity_deficit": self.negativity_deficit,
            "deficit_bound": self.deficit_bound,
        }

    def l1_distance(self, other: "SpectralDensity") -> float:
        """L1 distance after interpolating ``other`` onto this grid, relative to this L1 norm."""
        theirs = np.interp(self.freqs, other.freqs, other.density, left=0.0, right=0.0)
        return float(np.sum(np.abs(self.density - theirs)) / np.sum(np.abs(self.density)))


def write_sidecar(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --- correlation ---------------------------------------------------------------


@dataclass(frozen=True)
class GaussianProposal:
    """Isotropic Gaussian proposal for importance sampling on the plane."""

    center: tuple = (0.0, 0.0)
    scale: float = 1.0

    def draw(self, rng: np.random.Generator, n: int):
        pts = np.asarray(self.center) + self.scale * rng.standard_normal((n, 2))
        r2 = np.sum((pts - np.asarray(self.center)) ** 2, axis=-1)
        density = np.exp(-0.5 * r2 / self.scale**2) / (2 * math.pi * self.scale**2)
        return pts, density


def _chunk_seed(seed: int, chunk: int) -> int:
    return int(np.random.SeedSequence([seed, chunk]).generate_state(1)[0])


def _chunk_sums(backend, phi, f, lags_pos, n, seed, chunk, tol, proposal):
    """Weighted sums over one chunk of starting points, for lags +-lags_pos."""
    cseed = _chunk_seed(seed, chunk)
    if backend.kind == "hyperbolic":
        states = backend.sample(n, cseed)
        weights = 1.0 / np.asarray(f(states), dtype=float)
    else:
        states, q = proposal.draw(np.random.default_rng(cseed), n)
        weights = 1.0 / (np.asarray(f(states), dtype=float) * q)
    phi0 = phi(states)
    left = weights * np.conj(phi0)
    K = lags_pos.size
    sums = {
        "w": np.sum(weights),
        "w2": np.sum(weights**2),
        "wphi": np.sum(weights * phi0),
        "w2phi2": np.sum(np.abs(weights * phi0) ** 2),
        "a": np.zeros(2 * K - 1, dtype=complex),
        "a2": np.zeros(2 * K - 1),
        "wa": np.zeros(2 * K - 1, dtype=complex),
    }

    def collect(sign):
        def on_output(k, h, pts):
            contrib = left * phi(pts)
            idx = K - 1 + sign * k
            sums["a"][idx] = contrib.sum()
            sums["a2"][idx] = np.sum(np.abs(contrib) ** 2)
            sums["wa"][idx] = np.sum(weights * contrib)

        return on_output

    integrate_time_change(backend, states, f, lags_pos, tol, collect(1))
    integrate_time_change(backend, states, f, -lags_pos[1:], tol, lambda k, h, p: collect(-1)(k + 1, h, p))
    return sums


def correlation(
    backend: FlowBackend,
    phi: ScalarField,
    tc,
    T: float,
    dt: float,
    n: int,
    seed: int,
    tol: float = 1e-8,
    proposal: GaussianProposal | None = None,
    threads: int = 1,
    mean_subtract: bool = True,
) -> CorrelationSeries:
    """C(t) = <phi, phi o F~_t> in L^2(mu/f), sampled on the lag grid k*dt, |k| <= T/dt.

    Compact backend: mu is the Liouville probability, samples are reweighted
    by 1/f and normalized so that the reference measure is the probability
    nu = (mu/f) / (mu/f)(M).  Planar backend: an importance-sampled Lebesgue
    integral with weights 1/(f q) for the proposal density q.
    """
    if n < 1000:
        raise ValueError("correlation needs n >= 1000")
    K = int(round(T / dt))
    if K > MAX_LAGS:
        raise ValueError("too many lags")
    f = getattr(tc, "f", tc)
    lags_pos = np.arange(K + 1) * dt
    if backend.kind != "hyperbolic":
        proposal = proposal or GaussianProposal((0.0, 0.0), 1.5 * min(phi.smoothness_scale, 10.0))

    chunks = [(c, min(CHUNK, n - c * CHUNK)) for c in range((n + CHUNK - 1) // CHUNK)]

    def run(item):
        c, m = item
        return _chunk_sums(backend, phi, f, lags_pos, m, seed, c, tol, proposal)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(item) for item in chunks]

    total = {key: sum(p[key] for p in parts[1:]) + parts[0][key] if len(parts) > 1 else parts[0][key]
             for key in parts[0]}
    lags = np.arange(-K, K + 1) * dt
    if backend.kind == "hyperbolic":
        sw = total["w"]
        C = total["a"] / sw
        mean = total["wphi"] / sw
        # delta-method variance of the ratio estimator sum(w a) / sum(w)
        resid = total["a2"] - 2.0 * np.real(np.conj(C) * total["wa"]) + np.abs(C) ** 2 * total["w2"]
        var = np.maximum(resid, 0.0) / sw**2
    else:
        C = total["a"] / n
        mean = 0.0
        var = np.maximum(total["a2"] / n - np.abs(C) ** 2, 0.0) / n
    stderr = np.sqrt(var)
    series = CorrelationSeries(
        lags, C, stderr, n, seed, f.label, phi.label, False, complex(mean), backend.kind
    )
    if backend.kind != "hyperbolic":
        # constants are not square integrable on the plane: nothing to remove
        series.mean_subtracted = True
    elif mean_subtract:
        series = series.subtract_mean()
    if np.any(series.stderr > abs(series.c0)):
        warnings.warn("standard error exceeds |C(0)|", InsufficientSamplesWarning)
    return series


# --- atom scan -------------------------------------------------------------------


@dataclass
class AtomScan:
    horizons: list
    values: list
    noise_floors: list
    extrapolated: float
    decreasing: bool

    @property
    def final(self) -> float:
        return self.values[-1]

    @property
    def noise_floor(self) -> float:
        return self.noise_floors[-1]

    def to_dict(self) -> dict:
        return asdict(self)


def _cesaro(lags, values, tau):
    mask = np.abs(lags) <= tau + 1e-9 * abs(tau)
    x = values[mask]
    dt = lags[1] - lags[0]
    weights = np.full(x.size, dt)
    weights[0] = weights[-1] = dt / 2
    return float(np.sum(weights * x) / (2.0 * tau))


def atom_scan(series: CorrelationSeries) -> AtomScan:
    """(1/2T) int_{-T}^{T} |C|^2 at horizons T/4, T/2, T.

    For a spectral measure with atoms m_j the average tends to sum m_j^2; a
    continuous part contributes a term decaying like 1/T, which
    ``extrapolated`` = 2 S(T) - S(T/2) removes.  ``noise_floors`` is the same
    average applied to stderr^2, the expected contribution of Monte-Carlo noise.
    """
    if not series.mean_subtracted:
        raise ValueError("atom_scan needs a mean-subtracted series")
    T = series.horizon
    horizons = [T / 4, T / 2, T]
    sq = np.abs(series.values) ** 2
    values = [_cesaro(series.lags, sq, tau) for tau in horizons]
    floors = [_cesaro(series.lags, series.stderr**2, tau) for tau in horizons]
    decreasing = bool(values[0] > values[1] > values[2])
    return AtomScan(horizons, values, floors, 2.0 * values[2] - values[1], decreasing)


# --- spectral density --------------------------------------------------------------


def window_weights(kind: str, tau: np.ndarray) -> np.ndarray:
    tau = np.abs(tau)
    if kind == "hann":
        return np.where(tau <= 1.0, 0.5 * (1.0 + np.cos(np.pi * tau)), 0.0)
    if kind == "none":
        return np.where(tau <= 1.0, 1.0, 0.0)
    raise ValueError(f"unknown window {kind!r}")


def _transform(lags, x, pad: int):
    """(dt / 2 pi) sum_k x_k exp(-i lambda t_k) on the zero-padded FFT grid."""
    N = lags.size
    K = N // 2
    dt = lags[1] - lags[0]
    M = 1 << int(math.ceil(math.log2(pad * N)))
    y = np.zeros(M, dtype=complex)
    y[: K + 1] = x[K:]
    y[M - K :] = x[:K]
    rho = np.fft.fftshift(np.fft.fft(y)) * dt / (2 * math.pi)
    freqs = np.fft.fftshift(np.fft.fftfreq(M, d=dt)) * 2 * math.pi
    return freqs, rho


def density(series: CorrelationSeries, window: str = "hann", pad: int = 2) -> SpectralDensity:
    """Windowed Fourier transform rho(lambda) = (dt/2pi) sum_k w(t_k/T) C(t_k) e^{-i lambda t_k}."""
    if not series.mean_subtracted:
        raise ValueError("density needs a mean-subtracted series")
    T = series.horizon
    w = window_weights(window, series.lags / T)
    freqs, rho = _transform(series.lags, w * series.values, pad)
    rho = rho.real
    dlam = freqs[1] - freqs[0]
    # spectral window kernel: its most negative value bounds sidelobe leakage
    _, kernel = _transform(series.lags, w.astype(complex), pad)
    sidelobe = max(0.0, -float(kernel.real.min())) * abs(series.c0)
    noise = float(np.sum(w * series.stderr)) * series.dt / (2 * math.pi)
    return SpectralDensity(
        freqs,
        rho,
        window,
        T,
        float(np.sum(rho) * dlam),
        max(0.0, -float(rho.min())),
        4.0 * (sidelobe + noise),
    )


# --- decay -------------------------------------------------------------------------


def decay_report(series: CorrelationSeries, snr: float = 3.0, min_points: int = 5) -> dict:
    """Least-squares fits of log|C| on t in [T/4, T]: exponential and power-law slopes."""
    T = series.horizon
    mask = (series.lags >= T / 4) & (series.lags <= T)
    t = series.lags[mask]
    c = np.abs(series.values[mask])
    s = series.stderr[mask]
    resolved = (c > snr * s) & (c > 0)
    if resolved.sum() < max(min_points, 0.5 * t.size):
        return {"status": "below noise floor", "n_points": int(resolved.sum())}
    t, logc = t[resolved], np.log(c[resolved])

    def fit(x):
        coef = np.polyfit(x, logc, 1)
        pred = np.polyval(coef, x)
        ss_tot = np.sum((logc - logc.mean()) ** 2)
        r2 = 1.0 - np.sum((logc - pred) ** 2) / ss_tot if ss_tot > 0 else 1.0
        return float(coef[0]), float(r2)

    exp_slope, exp_r2 = fit(t)
    power_slope, power_r2 = fit(np.log(t))
    return {
        "status": "ok",
        "n_points": int(t.size),
        "exp_slope": exp_slope,
        "exp_r2": exp_r2,
        "power_slope": power_slope,
        "power_r2": power_r2,
    }
