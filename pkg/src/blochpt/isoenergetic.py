"""Simple-set membership, the approximate isoenergetic surface, and spectral points at energy rho^2."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .core import DEFAULT_CONFIG, NumericConfig, PaperParams
from .domains import (classify, in_U, in_V_prime, resonance_directions, sample_sphere, shell_ok,
                      wilson_interval, FractionEstimate)
from .lattice import DeltaGeometry
from .nonres import DenominatorFloorError, F_series, working_potential
from .oracle import NumericalFailure, match_eigenvalue, shell_solve
from .potential import FourierPotential
from .resonance import SingleResonanceContext, E_series, build_C


@dataclass(frozen=True)
class SimpleSetVerdict:
    x: np.ndarray
    member: bool
    failed_condition: str | None = None
    known_part: float = float("nan")
    competitors: int = 0

    def __post_init__(self):
        if not self.member and not self.failed_condition:
            raise ValueError("a rejected point must carry a reason")


def _annulus_ok(x, rho: float, params: PaperParams) -> bool:
    r = float(np.linalg.norm(x))
    pad = rho ** (params.alpha1 - 1)
    return 0.5 * rho + pad < r < 1.5 * rho - pad


def _known_F(y, qt, params, cfg) -> float:
    return F_series(y, cfg.f_order, qt, params, cfg, truncated=True).predicted


def _competitor_gap(energy: float, y, label, qt, params, cfg, dirs):
    """Smallest distance from ``energy`` to the known parts attached to momentum y, and the kind used."""
    if label.nonresonant:
        return abs(energy - _known_F(y, qt, params, cfg)), "F"
    wit = label.directions
    C = build_C(y, wit, qt, params, cfg, truncated=True)
    return float(np.min(np.abs(C.eigenvalues - energy))), "lambda(C)"


def _near_shell(lattice, t, energy: float, width: float):
    """Integer coordinates g with ||g+t|^2 - energy| < width."""
    r_in = math.sqrt(max(energy - width, 0.0))
    pts = lattice.lattice_points(math.sqrt(energy + width), shift=t, r_in=r_in)
    k = np.sum((lattice.from_dual_coords(pts) + t) ** 2, axis=1)
    return pts[np.abs(k - energy) < width]


def in_simple_set_B(x, q: FourierPotential, params: PaperParams, cfg: NumericConfig = DEFAULT_CONFIG,
                    threshold: float = 2.0) -> SimpleSetVerdict:
    """Check that no other known part lies within threshold*eps1 of F(x); no oracle involved."""
    x = np.asarray(x, dtype=float)
    lattice = q.lattice
    if not _annulus_ok(x, params.rho, params):
        raise ValueError(f"|x|={np.linalg.norm(x):.6g} is outside the admissible annulus")
    if not in_U(x, lattice, params, cfg):
        return SimpleSetVerdict(x, False, "x lies in a resonance slab")
    qt = working_potential(q, params, cfg)
    dirs = resonance_directions(lattice, params, cfg)
    g, t = lattice.split(x)
    Fx = _known_F(x, qt, params, cfg)
    K = _near_shell(lattice, t, Fx, params.rho**params.alpha1 / 3)
    eps = threshold * params.eps1
    n = 0
    for gp in K:
        if np.array_equal(gp, g):
            continue
        y = lattice.from_dual_coords(gp) + t
        label = classify(y, lattice, params, cfg, dirs)
        n += 1
        try:
            gap, kind = _competitor_gap(Fx, y, label, qt, params, cfg, dirs)
        except (DenominatorFloorError, ValueError) as exc:
            return SimpleSetVerdict(x, False, f"competitor {gp.tolist()} not evaluable: {exc}", Fx, n)
        if gap < eps:
            return SimpleSetVerdict(
                x, False, f"competitor {gp.tolist()} ({kind}) at distance {gap:.3e} < {eps:.3e}", Fx, n)
    return SimpleSetVerdict(x, True, None, Fx, n)


def in_simple_set_B_delta(x, geom: DeltaGeometry, q: FourierPotential, params: PaperParams,
                          cfg: NumericConfig = DEFAULT_CONFIG):
    """Membership in the simple set near the diffraction plane of delta.

    Returns (verdict, ctx, state); ctx and state are reusable for eigenfunction checks.
    """
    x = np.asarray(x, dtype=float)
    lattice = q.lattice
    if not _annulus_ok(x, params.rho, params):
        raise ValueError(f"|x|={np.linalg.norm(x):.6g} is outside the admissible annulus")
    if not in_V_prime(x, geom.delta, lattice, params, cfg):
        raise ValueError("x is not in the single-resonance domain of delta")
    g, t = lattice.split(x)
    ctx = SingleResonanceContext(geom, q, t, params, cfg)
    state = ctx.state_of(x)
    if not ctx.in_W(state.key):
        return SimpleSetVerdict(x, False, f"v={ctx.v_of(state.key):.6f} is not in W(rho)"), ctx, state
    try:
        E = E_series(ctx, state, cfg.e_order).predicted
    except DenominatorFloorError as exc:
        return SimpleSetVerdict(x, False, f"chain denominator floor: {exc}"), ctx, state
    qt = ctx.q
    dirs = resonance_directions(lattice, params, cfg)
    M = _near_shell(lattice, t, E, params.rho**params.alpha1 / 3)
    eps = 2.0 * params.eps1
    n = 0
    for gp in M:
        y = lattice.from_dual_coords(gp) + t
        label = classify(y, lattice, params, cfg, dirs)
        if not label.nonresonant and ctx.state_of(y).key == state.key:
            continue  # same transverse component: part of the same Hill family
        n += 1
        try:
            gap, kind = _competitor_gap(E, y, label, qt, params, cfg, dirs)
        except (DenominatorFloorError, ValueError) as exc:
            return SimpleSetVerdict(x, False, f"competitor {gp.tolist()} not evaluable: {exc}", E, n), ctx, state
        if gap < eps:
            return (SimpleSetVerdict(x, False, f"competitor {gp.tolist()} ({kind}) at distance {gap:.3e}",
                                     E, n), ctx, state)
    return SimpleSetVerdict(x, True, None, E, n), ctx, state


# ---------------------------------------------------------------- surface and roots

def surface_root_F(direction, rho: float, q: FourierPotential, params: PaperParams,
                   cfg: NumericConfig = DEFAULT_CONFIG, order: int | None = None) -> np.ndarray:
    """Point r*u on the ray with F(r*u) = rho^2."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    qt = working_potential(q, params, cfg)
    order = cfg.f_order if order is None else order

    def f(r):
        return F_series(r * u, order, qt, params, cfg, truncated=True).predicted - rho**2

    try:
        # one fixed-point step from |x| = rho, then a tight bracket around it
        r0 = math.sqrt(max(rho**2 - f(rho), 0.0))
        h = 1e-3 + abs(r0 - rho)
        lo, hi = r0 - h, r0 + h
        flo, fhi = f(lo), f(hi)
        if flo * fhi > 0:
            raise ValueError("F - rho^2 does not change sign on the ray; choose another direction")
        r = scipy.optimize.brentq(f, lo, hi, xtol=1e-14 * rho, rtol=4 * np.finfo(float).eps)
    except DenominatorFloorError as exc:
        raise ValueError(f"ray crosses a resonance slab near |x|=rho: {exc}") from exc
    x = r * u
    if not in_U(x, q.lattice, params, cfg, width=2.0):
        raise ValueError("root lies within 2 rho^alpha1 of a diffraction plane; choose another direction")
    return x


@dataclass
class IsoPoint:
    a: np.ndarray
    b: np.ndarray
    root: np.ndarray
    value: float
    residual: float
    iterations: int
    nearest_other: float
    simple: bool
    history: list = field(default_factory=list)


def oracle_eigenvalue(y, q: FourierPotential, params: PaperParams, margin: float = 8.0,
                      half_width: float = 4.0):
    """Matched eigenvalue near |y|^2 for y = gamma + t, with the spectrum it came from."""
    g, t = q.lattice.split(y)
    spec = shell_solve(q, t, float(np.linalg.norm(y)), margin, half_width)
    m = match_eigenvalue(spec, g, params)
    if m is None:
        raise NumericalFailure(f"no eigenvalue matched the plane wave at {np.asarray(y).tolist()}")
    return m, spec


def find_isoenergetic_point(direction, rho: float, q: FourierPotential, params: PaperParams,
                            cfg: NumericConfig = DEFAULT_CONFIG, tol: float = 1e-8,
                            max_iter: int = 60, margin: float | None = None) -> IsoPoint:
    """Bisection for Lambda(a + s b) = rho^2 on the segment |s| <= 1, b = eps1/(7 rho) along the ray."""
    margin = cfg.oracle_cutoff_margin if margin is None else margin
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    a = surface_root_F(u, rho, q, params, cfg)
    b = params.eps1 / (7 * rho) * u
    target = rho**2

    def lam(s):
        m, spec = oracle_eigenvalue(a + s * b, q, params, margin)
        return m, spec

    lo, hi = -1.0, 1.0
    m_lo, _ = lam(lo)
    m_hi, _ = lam(hi)
    if not (m_lo.value < target < m_hi.value):
        raise ValueError(f"segment does not bracket rho^2 (ends {m_lo.value:.10g}, {m_hi.value:.10g}); "
                         "try another ray")
    history = []
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        m, spec = lam(mid)
        history.append((mid, m.value))
        if abs(m.value - target) < tol * target:
            break
        if m.value < target:
            lo = mid
        else:
            hi = mid
    else:
        raise NumericalFailure("bisection did not reach the tolerance")
    others = np.delete(spec.eigenvalues, m.N)
    gap = float(np.min(np.abs(others - m.value))) if others.size else np.inf
    return IsoPoint(a, b, a + mid * b, m.value, abs(m.value - target), it, gap,
                    gap >= params.eps1 and len(m.cluster) == 1, history)


# ---------------------------------------------------------------- pruning and measures

@dataclass
class PruneReport:
    samples: int
    on_surface: int
    retained: int
    reasons: list

    @property
    def retained_fraction(self) -> float:
        """Share of surface points kept after pruning."""
        return self.retained / self.on_surface if self.on_surface else float("nan")

    @property
    def sphere_fraction(self) -> float:
        """Share of all sampled directions that end on a kept surface point."""
        return self.retained / self.samples if self.samples else float("nan")


def prune_P_b_and_A(points, q: FourierPotential, params: PaperParams,
                    cfg: NumericConfig = DEFAULT_CONFIG) -> PruneReport:
    """Drop surface points whose known part is within 3 eps1 of a translate's known part.

    ``points`` may contain None for directions that produced no surface point.
    """
    reasons = []
    kept = 0
    on = 0
    for x in points:
        if x is None:
            reasons.append("no surface point on this ray")
            continue
        on += 1
        r = in_simple_set_B(x, q, params, cfg, threshold=3.0)
        if r.member:
            kept += 1
            reasons.append("")
        else:
            reasons.append(r.failed_condition)
    return PruneReport(len(points), on, kept, reasons)


def sample_surface(n: int, rho: float, q: FourierPotential, params: PaperParams, rng: np.random.Generator,
                   cfg: NumericConfig = DEFAULT_CONFIG) -> list:
    out = []
    for u in sample_sphere(rng, n, q.lattice.d, 1.0):
        try:
            out.append(surface_root_F(u, rho, q, params, cfg))
        except ValueError:
            out.append(None)
    return out


def sample_slab(geom: DeltaGeometry, rho: float, params: PaperParams, n: int,
                rng: np.random.Generator) -> np.ndarray:
    """Uniform points (by arc length) on the circle |x| = rho inside the slab of delta (d = 2)."""
    if geom.lattice.d != 2:
        raise NotImplementedError("slab sampling is implemented for d = 2")
    dn = geom.delta_norm
    e = geom.delta / dn
    perp = np.array([-e[1], e[0]])
    w = rho**params.alpha1
    c_lo = max(-1.0, (-w - dn**2) / (2 * dn * rho))
    c_hi = min(1.0, (w - dn**2) / (2 * dn * rho))
    phi = rng.uniform(np.arccos(c_hi), np.arccos(c_lo), n)
    side = rng.choice([-1.0, 1.0], n)
    return rho * (np.cos(phi)[:, None] * e + (side * np.sin(phi))[:, None] * perp)


def mc_measure_B_delta(geom: DeltaGeometry, rho: float, n: int, q: FourierPotential, params: PaperParams,
                       rng: np.random.Generator, cfg: NumericConfig = DEFAULT_CONFIG) -> FractionEstimate:
    """Share of slab samples that lie in the simple set of delta (points outside V' count as misses)."""
    lattice = q.lattice
    hits = 0
    for x in sample_slab(geom, rho, params, n, rng):
        if not shell_ok(x, rho) or not in_V_prime(x, geom.delta, lattice, params, cfg):
            continue
        try:
            v, _, _ = in_simple_set_B_delta(x, geom, q, params, cfg)
        except ValueError:
            continue
        hits += v.member
    lo, hi = wilson_interval(hits, n)
    return FractionEstimate(hits / n, lo, hi, n)
