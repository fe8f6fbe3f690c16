"""PSL(2, R) arithmetic and the upper half-plane.

Group elements are stored as real 2x2 arrays.  Every function accepts a
batch: arrays of shape ``(..., 2, 2)`` for matrices and complex arrays of
any shape for points of the upper half-plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DET_TOL = 1e-13
MAX_GEODESIC_TIME = 700.0
DEGENERATE_DENOM = 1e-300


class RangeError(ValueError):
    pass


class DegenerateActionError(ArithmeticError):
    pass


def normalize(m: np.ndarray) -> np.ndarray:
    """Return PSL representatives: unit determinant, first nonzero entry > 0."""
    m = np.array(m, dtype=float, copy=True)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    drift = np.abs(det - 1.0) > DET_TOL
    if np.any(drift):
        scale = np.where(drift, np.sqrt(np.abs(det)), 1.0)
        m = m / scale[..., None, None]
    flat = m.reshape(m.shape[:-2] + (4,))
    nonzero = flat != 0.0
    first = np.argmax(nonzero, axis=-1)
    lead = np.take_along_axis(flat, first[..., None], axis=-1)[..., 0]
    sign = np.where(lead < 0.0, -1.0, 1.0)
    return m * sign[..., None, None]


def compose(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    return normalize(np.matmul(g, h))


def inverse(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    inv = np.empty_like(g)
    inv[..., 0, 0] = g[..., 1, 1]
    inv[..., 0, 1] = -g[..., 0, 1]
    inv[..., 1, 0] = -g[..., 1, 0]
    inv[..., 1, 1] = g[..., 0, 0]
    return normalize(inv)


def det(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g)
    return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]


def geodesic_element(s) -> np.ndarray:
    """a_s = diag(e^{s/2}, e^{-s/2})."""
    s = np.asarray(s, dtype=float)
    if np.any(np.abs(s) > MAX_GEODESIC_TIME):
        raise RangeError(f"|s| must be <= {MAX_GEODESIC_TIME}")
    out = np.zeros(s.shape + (2, 2))
    out[..., 0, 0] = np.exp(s / 2)
    out[..., 1, 1] = np.exp(-s / 2)
    return out


def horocycle_element(t) -> np.ndarray:
    """n_t = [[1, t], [0, 1]], so that a_s n_t a_{-s} = n_{e^s t}."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise RangeError("horocycle time must be finite")
    out = np.zeros(t.shape + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    out[..., 0, 1] = t
    return out


def rotation_element(theta) -> np.ndarray:
    """Rotation by angle ``theta`` about i (acts on tangent vectors at i by e^{i theta})."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = s
    out[..., 1, 0] = -s
    out[..., 1, 1] = c
    return normalize(out)


def mobius_act(g: np.ndarray, z) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    z = np.asarray(z, dtype=complex)
    num = g[..., 0, 0] * z + g[..., 0, 1]
    den = g[..., 1, 0] * z + g[..., 1, 1]
    if np.any(np.abs(den) < DEGENERATE_DENOM):
        raise DegenerateActionError("|cz + d| vanishes")
    return num / den


def base_point(g: np.ndarray) -> np.ndarray:
    """Image of i under ``g``; the projection PSL(2,R) -> H."""
    return mobius_act(g, 1j)


def cosh_distance(z, w) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return 1.0 + np.abs(z - w) ** 2 / (2.0 * z.imag * w.imag)


def hyp_distance(z, w) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    # arcsinh form keeps precision for nearby points
    half = np.abs(z - w) / (2.0 * np.sqrt(z.imag * w.imag))
    return 2.0 * np.arcsinh(half)


def to_disk(z):
    """Cayley map to the Poincare disk centered at i (display only)."""
    z = np.asarray(z, dtype=complex)
    return (z - 1j) / (z + 1j)


@dataclass(frozen=True)
class GroupElement:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        m = normalize(np.array([[self.a, self.b], [self.c, self.d]], dtype=float))
        if not np.all(np.isfinite(m)) or abs(det(m) - 1.0) > 1e-12:
            raise ValueError("not an element of SL(2, R)")
        object.__setattr__(self, "a", float(m[0, 0]))
        object.__setattr__(self, "b", float(m[0, 1]))
        object.__setattr__(self, "c", float(m[1, 0]))
        object.__setattr__(self, "d", float(m[1, 1]))

    @classmethod
    def from_matrix(cls, m) -> "GroupElement":
        m = np.asarray(m, dtype=float)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def geodesic(cls, s: float) -> "GroupElement":
        return cls.from_matrix(geodesic_element(s))

    @classmethod
    def horocycle(cls, t: float) -> "GroupElement":
        return cls.from_matrix(horocycle_element(t))

    @classmethod
    def rotation(cls, theta: float) -> "GroupElement":
        return cls.from_matrix(rotation_element(theta))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def trace(self) -> float:
        return self.a + self.d

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement.from_matrix(compose(self.matrix, other.matrix))

    def inverse(self) -> "GroupElement":
        return GroupElement.from_matrix(inverse(self.matrix))

    def act(self, z: "HPoint") -> "HPoint":
        return HPoint(complex(mobius_act(self.matrix, z.z)))


@dataclass(frozen=True)
class HPoint:
    z: complex

    def __post_init__(self):
        z = complex(self.z)
        if not (np.isfinite(z.real) and np.isfinite(z.imag)) or z.imag <= 0.0:
            raise ValueError(f"{z} is not in the upper half-plane")
        object.__setattr__(self, "z", z)

    def distance(self, other: "HPoint") -> float:
        return float(hyp_distance(self.z, other.z))
