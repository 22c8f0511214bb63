"""Eigenvalue series away from every diffraction slab."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_CONFIG, NumericConfig, PaperParams
from .potential import FourierPotential, sup_bound, truncate


class DenominatorFloorError(ArithmeticError):
    """A series denominator fell below its guaranteed floor."""


@dataclass(frozen=True)
class ChainSet:
    """Closed chains g_1..g_k over the support: partial sums never vanish and -sum(g) is in the support.

    ``partial`` has shape (n_chains, k, d); ``weight`` = q_{g_1}...q_{g_k} q_{-sum g}.
    """

    k: int
    partial: np.ndarray
    partial_coords: np.ndarray
    weight: np.ndarray


_CHAIN_CACHE: dict = {}


def closed_chains(q: FourierPotential, k: int) -> ChainSet:
    key = (q.fingerprint, k)
    if key in _CHAIN_CACHE:
        return _CHAIN_CACHE[key]
    d = q.lattice.d
    lookup = q.lookup
    coords = [tuple(c) for c in q.coords.tolist()]
    vals = list(q.values)
    rmax = max((abs(np.asarray(c)).sum() for c in coords), default=0)
    parts, weights = [], []

    def walk(path_sums, prod, depth):
        last = path_sums[-1] if path_sums else (0,) * d
        if depth == k:
            close = lookup.get(tuple(-x for x in last))
            if close is not None:
                parts.append(list(path_sums))
                weights.append(prod * close)
            return
        remaining = k - depth
        for c, v in zip(coords, vals):
            s = tuple(a + b for a, b in zip(last, c))
            if not any(s):
                continue
            # the chain must be able to return to the support of -sum
            if sum(abs(x) for x in s) > remaining * rmax + rmax:
                continue
            walk(path_sums + [s], prod * v, depth + 1)

    if q.size:
        walk([], 1.0 + 0j, 0)
    pc = np.array(parts, dtype=np.int64).reshape(-1, k, d)
    cs = ChainSet(k, q.lattice.from_dual_coords(pc.reshape(-1, d)).reshape(-1, k, d) if len(pc) else
                  np.zeros((0, k, d)), pc, np.array(weights, dtype=complex))
    _CHAIN_CACHE[key] = cs
    return cs


def S_k(a: float, x, k: int, q: FourierPotential, params: PaperParams, enforce_floor=True,
        check_a=True, return_min=False):
    """Sum over closed k-chains of the weight divided by prod_j (a - |x - partial_j|^2)."""
    x = np.asarray(x, dtype=float)
    floor = 0.5 * params.rho**params.alpha1
    if check_a and abs(a - x @ x) >= floor:
        raise ValueError("a must satisfy |a - |x|^2| < rho^alpha1 / 2")
    ch = closed_chains(q, k)
    if ch.weight.size == 0:
        return (0.0, np.inf) if return_min else 0.0
    den = a - np.sum((x - ch.partial) ** 2, axis=2)
    mind = float(np.min(np.abs(den)))
    if enforce_floor and mind <= floor:
        i, j = np.unravel_index(np.argmin(np.abs(den)), den.shape)
        raise DenominatorFloorError(
            f"denominator {den[i, j]:.3e} below rho^alpha1/2={floor:.3e} for chain "
            f"{ch.partial_coords[i].tolist()}: x is not non-resonant")
    total = np.sum(ch.weight / np.prod(den, axis=1))
    scale = np.sum(np.abs(ch.weight / np.prod(den, axis=1)))
    if abs(total.imag) > 1e-10 * max(1.0, scale):
        raise ArithmeticError(f"S_{k} has imaginary part {total.imag:.3e}; potential not real?")
    return (float(total.real), mind) if return_min else float(total.real)


@dataclass
class SeriesResult:
    x: np.ndarray
    order: int
    F_values: list = field(default_factory=list)
    predicted: float = 0.0
    min_denominator: float = np.inf
    majorant: float = 0.0


def working_potential(q: FourierPotential, params: PaperParams, cfg: NumericConfig = DEFAULT_CONFIG):
    return truncate(q, params.rho, params.alpha, cfg.support_multiplier)[0]


def F_series(x, k_max: int, q: FourierPotential, params: PaperParams,
             cfg: NumericConfig = DEFAULT_CONFIG, enforce_floor=True, truncated=False) -> SeriesResult:
    """F_0 = 0, F_s = sum_{k<=s} S_k(|x|^2 + F_{s-1}, x); returns F_0..F_{k_max-1}."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    x = np.asarray(x, dtype=float)
    qt = q if truncated else working_potential(q, params, cfg)
    x2 = float(x @ x)
    F = [0.0]
    mind = np.inf
    for s in range(1, k_max):
        a = x2 + F[-1]
        acc = 0.0
        for k in range(1, s + 1):
            val, md = S_k(a, x, k, qt, params, enforce_floor=enforce_floor, check_a=enforce_floor,
                          return_min=True)
            acc += val
            mind = min(mind, md)
        F.append(acc)
    m = sup_bound(qt)
    r = 2.0 / params.rho**params.alpha1
    major = sum(m ** (k + 1) * r**k for k in range(1, k_max)) if k_max > 1 else 0.0
    return SeriesResult(x, k_max, F, x2 + F[-1], mind, major)


def predicted_nonres(x, order: int, q, params, cfg=DEFAULT_CONFIG, **kw) -> float:
    return F_series(x, order, q, params, cfg, **kw).predicted


def grad_F_check(x, k: int, q: FourierPotential, params: PaperParams, h: float = 1e-3,
                 cfg: NumericConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Central-difference gradient of F_k at x."""
    x = np.asarray(x, dtype=float)
    qt = working_potential(q, params, cfg)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        fp = F_series(x + e, k + 1, qt, params, cfg, truncated=True).F_values[k]
        fm = F_series(x - e, k + 1, qt, params, cfg, truncated=True).F_values[k]
        g[i] = (fp - fm) / (2 * h)
    return g


def clear_chain_cache():
    _CHAIN_CACHE.clear()
