"""The Bolza surface as Gamma \\ PSL(2, R).

The Dirichlet domain centered at i is the regular octagon with interior
angles pi/4.  Side k (k = 0..7) sits at distance ``inradius`` from i with
outward normal at angle k*pi/4; the generator g_k (k = 0..3) maps the
octagon across side k and its inverse across side k + 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mobius
from .fields import ScalarField

MAX_REDUCE_ITER = 10_000
DESCENT_TOL = 1e-13
TAIL_TARGET = 1e-10
MAX_WORD_LENGTH = 12

# g0 g3 g2^-1 g1 g0^-1 g3^-1 g2 g1^-1 = 1, indices into FuchsianGroup.generators
BOLZA_RELATION = (0, 3, 6, 1, 4, 7, 2, 5)


class GroupConstructionError(RuntimeError):
    pass


class ReductionError(RuntimeError):
    pass


class ConfigurationError(ValueError):
    pass


def octagon_inradius() -> float:
    # right triangle (pi/8 at center, pi/8 at vertex): cosh r = cos(pi/8)/sin(pi/8)
    return math.acosh(1.0 / math.tan(math.pi / 8))


def octagon_circumradius() -> float:
    # cosh R = cot(pi/8) * cot(pi/8)
    return math.acosh(1.0 / math.tan(math.pi / 8) ** 2)


@dataclass(frozen=True)
class FuchsianGroup:
    generators: np.ndarray  # (8, 2, 2): g0..g3 then their inverses
    relation_word: tuple[int, ...]
    dirichlet_center: complex = 1j
    circumradius: float = field(default_factory=octagon_circumradius)
    inradius: float = field(default_factory=octagon_inradius)

    @property
    def area(self) -> float:
        # Gauss-Bonnet, genus 2
        return 4.0 * math.pi

    def relation_product(self) -> np.ndarray:
        m = np.eye(2)
        for k in self.relation_word:
            m = m @ self.generators[k]
        return mobius.normalize(m)

    def relation_error(self) -> float:
        return float(np.max(np.abs(self.relation_product() - np.eye(2))))

    def check(self, tol: float = 1e-10) -> None:
        err = self.relation_error()
        if not err <= tol:
            raise GroupConstructionError(f"surface relation fails: max entry error {err:.3e}")
        traces = np.abs(np.trace(self.generators, axis1=-2, axis2=-1))
        if np.any(traces <= 2.0):
            raise GroupConstructionError("generator is not hyperbolic")

    def to_text(self) -> str:
        lines = ["# horoflow fuchsian group v1", "relation " + " ".join(map(str, self.relation_word))]
        for k, g in enumerate(self.generators):
            lines.append(f"g{k} " + " ".join(f"{x:.16e}" for x in g.ravel()))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, check: bool = True) -> "FuchsianGroup":
        relation = None
        gens = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            head, *rest = line.split()
            if head == "relation":
                relation = tuple(int(x) for x in rest)
            elif head.startswith("g"):
                gens.append(np.array([float(x) for x in rest]).reshape(2, 2))
        if relation is None or len(gens) != 8:
            raise GroupConstructionError("malformed generator file")
        group = cls(mobius.normalize(np.array(gens)), relation)
        if check:
            group.check()
        return group

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path, check: bool = True) -> "FuchsianGroup":
        return cls.from_text(Path(path).read_text(), check=check)


def build_bolza() -> FuchsianGroup:
    ell = 2.0 * octagon_inradius()
    translation = mobius.geodesic_element(ell)
    gens = []
    for k in range(4):
        rot = mobius.rotation_element(k * math.pi / 4)
        gens.append(rot @ translation @ mobius.inverse(rot))
    gens = mobius.normalize(np.array(gens))
    group = FuchsianGroup(np.concatenate([gens, mobius.inverse(gens)]), BOLZA_RELATION)
    group.check()
    return group


def _descend(z: np.ndarray, group: FuchsianGroup, max_iter: int):
    """Greedy distance descent on base points; returns reduced points and the word applied."""
    z = np.array(z, dtype=complex, copy=True)
    shape = z.shape
    z = z.ravel()
    word = np.tile(np.eye(2), (z.size, 1, 1))
    active = np.arange(z.size)
    gens = group.generators
    for _ in range(max_iter):
        if active.size == 0:
            break
        za = z[active]
        cur = mobius.hyp_distance(za, 1j)
        cand = mobius.mobius_act(gens[None, :, :, :], za[:, None])
        dist = mobius.hyp_distance(cand, 1j)
        best = np.argmin(dist, axis=1)  # argmin picks the lowest index on ties
        gain = cur - dist[np.arange(active.size), best]
        moving = gain > DESCENT_TOL
        idx = active[moving]
        z[idx] = cand[moving, best[moving]]
        word[idx] = gens[best[moving]] @ word[idx]
        active = idx
    else:
        if active.size:
            raise ReductionError(f"reduction did not terminate in {max_iter} steps")
    return z.reshape(shape), word.reshape(shape + (2, 2))


def reduce_points(z, group: FuchsianGroup, max_iter: int = MAX_REDUCE_ITER) -> np.ndarray:
    return _descend(z, group, max_iter)[0]


def reduce(reps, group: FuchsianGroup, max_iter: int = MAX_REDUCE_ITER) -> np.ndarray:
    """Canonical coset representatives gamma * rep with base point in the octagon."""
    reps = np.asarray(reps, dtype=float)
    _, word = _descend(mobius.base_point(reps), group, max_iter)
    out = mobius.normalize(word @ reps)
    if not np.all(np.isfinite(out)):
        raise ReductionError("representative lost precision during reduction")
    return out


def is_reduced(reps, group: FuchsianGroup) -> np.ndarray:
    z = mobius.base_point(np.asarray(reps, dtype=float))
    cur = mobius.hyp_distance(z, 1j)
    cand = mobius.hyp_distance(mobius.mobius_act(group.generators, z[..., None]), 1j)
    return np.all(cur[..., None] <= cand + 1e-12, axis=-1)


@dataclass(frozen=True)
class PhasePoint:
    """A point of M = Gamma \\ PSL(2, R) (or of the plane, for the planar backend)."""

    rep: np.ndarray
    backend: str = "hyperbolic"
    reduced: bool = False

    @property
    def base(self) -> complex:
        return complex(mobius.base_point(self.rep))


def lift(z, theta) -> np.ndarray:
    """Group element sending i to z with fiber angle theta."""
    z = np.asarray(z, dtype=complex)
    sy = np.sqrt(z.imag)
    m = np.zeros(z.shape + (2, 2))
    m[..., 0, 0] = sy
    m[..., 0, 1] = z.real / sy
    m[..., 1, 1] = 1.0 / sy
    return mobius.normalize(m @ mobius.rotation_element(theta))


def _polar_to_uhp(r, alpha):
    w = np.tanh(np.asarray(r) / 2.0) * np.exp(1j * np.asarray(alpha))
    return 1j * (1.0 + w) / (1.0 - w)


def sample_phase(n: int, seed: int, group: FuchsianGroup) -> np.ndarray:
    """n states distributed by the normalized Liouville measure, as reduced reps."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    cosh_r = math.cosh(group.circumradius)
    accepted = []
    count = 0
    while count < n:
        m = max(64, int(1.2 * (n - count) * (cosh_r - 1.0) / 2.0) + 16)
        u = rng.random(m)
        alpha = rng.random(m) * 2.0 * math.pi
        r = np.arccosh(1.0 + u * (cosh_r - 1.0))
        z = _polar_to_uhp(r, alpha)
        cand = mobius.hyp_distance(mobius.mobius_act(group.generators, z[:, None]), 1j)
        inside = np.all(mobius.hyp_distance(z, 1j)[:, None] <= cand, axis=1)
        accepted.append(z[inside])
        count += int(inside.sum())
    z = np.concatenate(accepted)[:n]
    theta = rng.random(n) * 2.0 * math.pi
    return lift(z, theta)


def octagon_radial_extent(alpha) -> np.ndarray:
    """Distance from i to the octagon boundary along the ray at disk angle alpha."""
    alpha = np.asarray(alpha, dtype=float)
    tr = math.tanh(octagon_inradius())
    out = np.full(alpha.shape, np.inf)
    for k in range(8):
        c = np.cos(alpha - k * math.pi / 4)
        ratio = np.where(c > 0, tr / np.where(c > 0, c, 1.0), 2.0)
        hit = ratio < 1.0
        out = np.where(hit, np.minimum(out, np.arctanh(np.where(hit, ratio, 0.0))), out)
    return out


def octagon_quadrature(fn, n_angle: int = 64, n_radial: int = 64) -> float:
    """Average of fn(z) over the octagon w.r.t. hyperbolic area (polar Gauss-Legendre)."""
    xa, wa = np.polynomial.legendre.leggauss(n_angle)
    xr, wr = np.polynomial.legendre.leggauss(n_radial)
    total = 0.0
    for k in range(8):
        # sectors between consecutive vertices, where the extent is smooth
        lo = math.pi / 8 + (k - 1) * math.pi / 4
        hi = lo + math.pi / 4
        alpha = 0.5 * (hi - lo) * xa + 0.5 * (hi + lo)
        wal = 0.5 * (hi - lo) * wa
        rmax = octagon_radial_extent(alpha)
        r = 0.5 * rmax[:, None] * (xr[None, :] + 1.0)
        wrr = 0.5 * rmax[:, None] * wr[None, :]
        z = _polar_to_uhp(r, alpha[:, None])
        total += np.sum(wal[:, None] * wrr * np.sinh(r) * fn(z))
    return float(total / (4.0 * math.pi))


def _tile_centers(group: FuchsianGroup, radius: float, max_depth: int):
    """Breadth-first enumeration of tile elements gamma with d(gamma i, i) <= radius.

    Tiles are expanded while their center lies within radius + 2R, which keeps
    every tile meeting the ball connected to the identity tile through sides.
    """
    slack = 2.0 * group.circumradius

    def keys(z):
        return np.round(np.stack([z.real, z.imag], axis=-1), 9)

    frontier = np.eye(2)[None]
    seen = {tuple(k) for k in keys(np.array([1j]))}
    found = [frontier]
    depth = 0
    word_length = 0
    while frontier.size:
        cand = mobius.normalize(frontier[:, None] @ group.generators[None]).reshape(-1, 2, 2)
        z = mobius.base_point(cand)
        d = mobius.hyp_distance(z, 1j)
        near = d <= radius + slack
        cand, z, d = cand[near], z[near], d[near]
        _, first = np.unique(keys(z), axis=0, return_index=True)
        fresh = [i for i in sorted(first) if tuple(keys(z[i : i + 1])[0]) not in seen]
        if not fresh:
            break
        depth += 1
        cand, z, d = cand[fresh], z[fresh], d[fresh]
        seen.update(tuple(k) for k in keys(z))
        inside = d <= radius
        if depth > max_depth:
            if np.any(inside):
                raise ConfigurationError(f"orbit enumeration needs word length > {max_depth}")
            break
        if np.any(inside):
            word_length = depth
        found.append(cand[inside])
        frontier = cand
    return np.concatenate(found), word_length


def _tail_bound(d_cut: float, beta: float, scale: float, offset: float) -> float:
    shell = 0.05
    total = 0.0
    r = d_cut
    while True:
        count = 0.5 * (math.cosh(r + shell + offset) - 1.0)
        term = count * math.exp(-beta * math.cosh(r / scale))
        total += term
        if term < 1e-30 and r > d_cut + 1.0:
            return total
        r += shell


def periodic_function(
    beta: float,
    radius: float = 1.0,
    center: complex = 1j,
    group: FuchsianGroup | None = None,
    max_word_length: int = MAX_WORD_LENGTH,
) -> ScalarField:
    """Gamma-invariant bump u(z) = sum_gamma exp(-beta cosh(d(z, gamma center) / radius)).

    ``radius`` rescales distances (radius = 1 is the plain series).  The
    series is truncated at the smallest distance cutoff whose orbital-count
    tail bound is below 1e-10; evaluation reduces z into the octagon first.
    """
    if beta <= 0 or radius <= 0:
        raise ConfigurationError("beta and radius must be positive")
    group = group or build_bolza()
    center = complex(center)
    d_center = float(mobius.hyp_distance(center, 1j))
    offset = group.circumradius + d_center
    d_cut = 0.0
    while _tail_bound(d_cut, beta, radius, offset) > TAIL_TARGET:
        d_cut += 0.05
        if d_cut > 50:
            raise ConfigurationError("tail bound not achievable")
    elements, depth = _tile_centers(group, group.circumradius + d_cut + d_center, max_word_length)
    orbit = mobius.mobius_act(elements, center)
    keep = mobius.hyp_distance(orbit, 1j) <= group.circumradius + d_cut
    orbit = orbit[keep]

    def u(states):
        z = reduce_points(mobius.base_point(states), group)
        ch = mobius.cosh_distance(z[..., None], orbit)
        if radius != 1.0:
            ch = np.cosh(np.arccosh(ch) / radius)
        return np.exp(-beta * ch).sum(axis=-1)

    return ScalarField(
        u,
        smoothness_scale=radius,
        label=f"u(beta={beta},radius={radius})",
        meta={"cutoff": d_cut, "word_length": depth, "terms": int(orbit.size)},
    )
