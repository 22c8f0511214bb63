"""Diffraction slabs, resonance classification and the index sets used by the resonance matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_CONFIG, NumericConfig, PaperParams
from .lattice import Lattice, enumerate_ball

_SHELL_TOL = 1e-12


def shell_ok(x, rho: float) -> np.ndarray | bool:
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    ok = (r >= 0.5 * rho - _SHELL_TOL) & (r <= 1.5 * rho + _SHELL_TOL)
    return bool(ok) if np.ndim(ok) == 0 else ok


def slab_defect(x, b) -> np.ndarray:
    """|x|^2 - |x+b|^2 for every pair (rows of x) x (rows of b)."""
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    return -2.0 * (x @ b.T) - np.sum(b * b, axis=-1)


def in_resonance_slab(x, b, rho: float, exponent: float) -> bool:
    return bool(abs(slab_defect(x, b)) < rho**exponent and shell_ok(x, rho))


def resonance_directions(lattice: Lattice, params: PaperParams, cfg: NumericConfig = DEFAULT_CONFIG):
    """Directions whose slabs define the resonance sets (sorted by length, then coordinates)."""
    return enumerate_ball(lattice, cfg.resonance_multiplier * params.rho**params.alpha)


def primitive(lattice: Lattice, b) -> np.ndarray:
    """Shortest dual vector on the ray through b, with first nonzero coordinate positive."""
    n = lattice.dual_int_coords(b)
    g = math.gcd(*[abs(int(v)) for v in n])
    n = n // g
    if n[np.flatnonzero(n)[0]] < 0:
        n = -n
    return lattice.from_dual_coords(n)


@dataclass(frozen=True)
class DomainLabel:
    kind: str  # "nonresonant", "single" or "resonant"
    order: int
    directions: np.ndarray
    shell_ok: bool
    delta: np.ndarray | None = None

    @property
    def nonresonant(self) -> bool:
        return self.kind == "nonresonant"


def _independent_witness(cands: np.ndarray, k: int) -> np.ndarray | None:
    chosen = []
    for b in cands:
        trial = chosen + [b]
        if np.linalg.matrix_rank(np.array(trial), tol=1e-9) == len(trial):
            chosen = trial
            if len(chosen) == k:
                return np.array(chosen)
    return None


def membership_orders(x, dirs: np.ndarray, params: PaperParams) -> list:
    """Witness sets for each k=1..d with x in E_k (None when x is not in E_k)."""
    defect = np.abs(slab_defect(np.asarray(x, float)[None, :], dirs)[0]) if len(dirs) else np.zeros(0)
    out = []
    for k in range(1, params.d + 1):
        hits = dirs[defect < params.rho ** params.alpha_k(k)]
        out.append(_independent_witness(hits, k) if len(hits) else None)
    return out


def in_E_k(x, k: int, lattice: Lattice, params: PaperParams, cfg: NumericConfig = DEFAULT_CONFIG) -> bool:
    if not shell_ok(x, params.rho):
        return False
    return membership_orders(x, resonance_directions(lattice, params, cfg), params)[k - 1] is not None


def classify(x, lattice: Lattice, params: PaperParams, cfg: NumericConfig = DEFAULT_CONFIG,
             dirs: np.ndarray | None = None) -> DomainLabel:
    x = np.asarray(x, dtype=float)
    ok = bool(shell_ok(x, params.rho))
    if dirs is None:
        dirs = resonance_directions(lattice, params, cfg)
    wit = membership_orders(x, dirs, params)
    if wit[0] is None:
        return DomainLabel("nonresonant", 0, np.zeros((0, lattice.d)), ok)
    order = max(k for k in range(1, params.d + 1) if wit[k - 1] is not None)
    if order == 1:
        delta = primitive(lattice, wit[0][0])
        return DomainLabel("single", 1, delta[None, :], ok, delta)
    return DomainLabel("resonant", order, wit[order - 1], ok)


def in_U(x, lattice: Lattice, params: PaperParams, cfg: NumericConfig = DEFAULT_CONFIG,
         width: float = 1.0) -> bool:
    """Shell point outside every slab of half-width width * rho^alpha1."""
    x = np.asarray(x, dtype=float)
    if not shell_ok(x, params.rho):
        return False
    dirs = resonance_directions(lattice, params, cfg)
    if len(dirs) == 0:
        return True
    return bool(np.all(np.abs(slab_defect(x[None, :], dirs)[0]) >= width * params.rho**params.alpha1))


def in_V_prime(x, delta, lattice: Lattice, params: PaperParams, cfg: NumericConfig = DEFAULT_CONFIG) -> bool:
    """Inside the slab of ``delta`` at exponent alpha_1 and outside the second resonance set."""
    x = np.asarray(x, dtype=float)
    if not in_resonance_slab(x, delta, params.rho, params.alpha1):
        return False
    return params.d < 2 or not in_E_k(x, 2, lattice, params, cfg)


def in_K_rho(x, params: PaperParams) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(abs(x @ x - params.rho**2) < params.rho**params.alpha1)


@dataclass(frozen=True)
class BkIndexSet:
    """Members center + o_i with integer offsets o_i = b + a (dual coordinates)."""

    center: np.ndarray
    directions: np.ndarray
    offsets: np.ndarray
    members: np.ndarray

    @property
    def b_k(self) -> int:
        return len(self.offsets)


def _span_points(lattice: Lattice, directions: np.ndarray, radius: float) -> np.ndarray:
    """Integer combinations of ``directions`` shorter than ``radius``, as dual coordinates."""
    k = len(directions)
    pinv = np.linalg.pinv(directions)
    span = radius * np.linalg.norm(pinv, axis=0)
    axes = [np.arange(-math.ceil(s), math.ceil(s) + 1) for s in span]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
    vecs = grid @ directions
    keep = np.linalg.norm(vecs, axis=1) < radius
    return lattice.dual_int_coords(vecs[keep])


def build_Bk(center, directions, lattice: Lattice, params: PaperParams,
             cfg: NumericConfig = DEFAULT_CONFIG) -> BkIndexSet:
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    k = len(directions)
    if np.linalg.matrix_rank(directions, tol=1e-9) < k:
        raise ValueError("resonance directions are linearly dependent")
    b_radius = 0.5 * params.rho ** (params.alpha_k(k + 1) / 2)
    a_radius = cfg.bk_a_multiplier * params.rho**params.alpha
    bs = _span_points(lattice, directions, b_radius)
    as_ = lattice.lattice_points(a_radius)
    offs = (bs[:, None, :] + as_[None, :, :]).reshape(-1, lattice.d)
    offs = np.unique(offs, axis=0)
    if len(offs) > cfg.bk_cap:
        raise ValueError(f"resonance index set has {len(offs)} members, above the cap {cfg.bk_cap}; "
                         "lower rho or raise bk_cap")
    # centre first, then by distance
    key = np.linalg.norm(lattice.from_dual_coords(offs), axis=1)
    offs = offs[np.lexsort((*offs.T[::-1], key))]
    center = np.asarray(center, dtype=float)
    return BkIndexSet(center, directions, offs, center + lattice.from_dual_coords(offs))


def sample_sphere(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return radius * g / np.linalg.norm(g, axis=1, keepdims=True)


def wilson_interval(k: int, n: int, z: float = 1.96):
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


@dataclass(frozen=True)
class FractionEstimate:
    fraction: float
    low: float
    high: float
    n: int


def mc_nonresonance_fraction(lattice: Lattice, params: PaperParams, n_samples: int,
                             rng: np.random.Generator, cfg: NumericConfig = DEFAULT_CONFIG,
                             batch: int = 20000) -> FractionEstimate:
    """Share of uniform points on the sphere |x| = rho lying outside every slab."""
    dirs = resonance_directions(lattice, params, cfg)
    thr = params.rho**params.alpha1
    hits = 0
    done = 0
    while done < n_samples:
        m = min(batch, n_samples - done)
        x = sample_sphere(rng, m, lattice.d, params.rho)
        if len(dirs):
            bad = np.any(np.abs(slab_defect(x, dirs)) < thr, axis=1)
        else:
            bad = np.zeros(m, bool)
        hits += int(np.count_nonzero(~bad))
        done += m
    lo, hi = wilson_interval(hits, n_samples)
    return FractionEstimate(hits / n_samples, lo, hi, n_samples)
