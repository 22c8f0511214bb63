"""Acceptance suite: thirteen property and decay-rate checks against the plane-wave oracle.

Every check returns a ``CheckResult``; ``run_all`` runs them in order and the
``verify-all`` CLI mode writes the results as a text report.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import oracle
from .bloch import (count_dominant, eigenfunction_error, phi_1, predict_expansion,
                    resonance_eigenfunction_error)
from .core import DEFAULT_CONFIG, NumericConfig, PaperParams
from .domains import (build_Bk, classify, in_U, in_V_prime, membership_orders, mc_nonresonance_fraction,
                      resonance_directions, sample_sphere)
from .hill import solve_Tv
from .isoenergetic import (find_isoenergetic_point, in_simple_set_B, in_simple_set_B_delta,
                           mc_measure_B_delta, prune_P_b_and_A, sample_slab, sample_surface)
from .lattice import Lattice, gamma_delta_decompose, sublattice_geometry
from .nonres import DenominatorFloorError, F_series, grad_F_check
from .oracle import match_delta_state, match_eigenvalue, shell_solve
from .potential import FourierPotential
from .resonance import E_series, SingleResonanceContext, _c_entries, build_C, chain_depth, grad_E_check

log = logging.getLogger(__name__)


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d}: {self.title}"


def loglog_slope(rhos, values) -> float:
    """Least-squares slope of log(value) against log(rho)."""
    return float(np.polyfit(np.log(rhos), np.log(values), 1)[0])


def strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def square_potential(lattice: Lattice | None = None) -> FourierPotential:
    """q(x) = 2 cos x1 + 2 cos x2 on the square lattice with dual Z^2."""
    lattice = Lattice.square(2) if lattice is None else lattice
    return FourierPotential.cosines(lattice, {(1, 0): 1.0, (0, 1): 1.0})


class BindingAudit:
    """Records the worst interior binding residual of every oracle solve while active."""

    def __init__(self):
        self.worst = 0.0
        self.solves = 0

    def __call__(self, spec):
        self.solves += 1
        self.worst = max(self.worst, oracle.max_interior_binding_residual(spec))

    def __enter__(self):
        oracle.SOLVE_OBSERVERS.append(self)
        return self

    def __exit__(self, *exc):
        oracle.SOLVE_OBSERVERS.remove(self)


def _nonresonant_points(q, rho, params, cfg, rng, count):
    out = []
    while len(out) < count:
        x = sample_sphere(rng, 1, 2, rho)[0]
        if in_U(x, q.lattice, params, cfg):
            out.append(x)
    return out


# ---------------------------------------------------------------- 1

def check_free_case(cfg: NumericConfig = DEFAULT_CONFIG) -> CheckResult:
    L = Lattice.square(2)
    q0 = FourierPotential.zero(L)
    t = np.array([0.1234, 0.3817])
    spec = oracle.assemble_and_solve(q0, t, 12.0)
    exact = np.sort(spec.kinetic)
    eig_err = float(np.max(np.abs(spec.eigenvalues - exact)))
    P = PaperParams.standard(2, 20.0, s=60)
    x = np.array([12.31, 15.77])
    F = F_series(x, 4, q0, P, cfg).F_values
    geom = sublattice_geometry(L, np.array([1.0, 0.0]))
    y = np.array([-0.37, 20.213])
    _, ty = L.split(y)
    ctx = SingleResonanceContext(geom, q0, ty, P, cfg)
    E = E_series(ctx, ctx.state_of(y), 3).E_values
    ex = predict_expansion(x, 3, q0, P, cfg)
    series_zero = max(map(abs, F + E)) == 0.0 and not ex.coefficients and ex.b_center == 1.0
    series_zero = series_zero and phi_1(x, q0, P, cfg) == {}
    return CheckResult(1, "free case: oracle equals |gamma+t|^2 and every series vanishes",
                       eig_err < 1e-10 and series_zero,
                       {"max_eigenvalue_error": eig_err, "series_identically_zero": series_zero})


# ---------------------------------------------------------------- 2

def check_tensor(cfg: NumericConfig = DEFAULT_CONFIG, rho: float = 20.0, half_width: float = 10.0) -> CheckResult:
    L = Lattice.square(2)
    q = FourierPotential.cosines(L, {(1, 0): 1.0})
    geom = sublattice_geometry(L, np.array([1.0, 0.0]))
    t = np.array([0.2371, 0.4129])
    lo, hi = rho**2 - half_width, rho**2 + half_width
    spec = shell_solve(q, t, rho, cfg.oracle_cutoff_margin, half_width)
    P = PaperParams.standard(2, rho)
    ctx = SingleResonanceContext(geom, q, t, P, cfg, max_j=int(rho) + 12, truncated=True)
    kmax = int(math.ceil(math.sqrt(hi))) + 2
    predicted = []
    for k in range(-kmax, kmax + 1):
        key = (k,)
        beta = ctx.beta_of(key)
        base = float(np.sum((beta + ctx.tau) ** 2))
        if base > hi:
            continue
        sp = ctx.spectrum(key)
        trusted = np.abs(sp.labels) <= sp.trusted_radius
        mu = sp.mu[trusted]
        if np.max(mu) + base < hi:
            raise ArithmeticError("Hill truncation too small for the tensor window")
        vals = base + mu
        predicted.extend(vals[(vals >= lo) & (vals <= hi)].tolist())
    predicted = np.sort(predicted)
    got = spec.eigenvalues
    # keep a margin from the window edges so both lists see the same eigenvalues
    inner = (got > lo + 0.5) & (got < hi - 0.5)
    pin = (predicted > lo + 0.5) & (predicted < hi - 0.5)
    ok = inner.sum() == pin.sum() and inner.sum() >= 50
    rel = float(np.max(np.abs(got[inner] - predicted[pin]) / np.abs(predicted[pin]))) if ok else float("inf")
    return CheckResult(2, "directional potential: 2D oracle equals |beta+tau|^2 + mu_j(v)",
                       ok and rel < 1e-8,
                       {"eigenvalues_compared": int(inner.sum()), "predicted_count": int(pin.sum()),
                        "max_relative_error": rel})


# ---------------------------------------------------------------- 3

def check_nonresonant_decay(cfg: NumericConfig = DEFAULT_CONFIG, rhos=(15.0, 30.0, 60.0), n_dirs: int = 5,
                            seed: int = 3) -> CheckResult:
    q = square_potential()
    L = q.lattice
    rng = np.random.default_rng(seed)
    dirs = []
    while len(dirs) < n_dirs:
        u = sample_sphere(rng, 1, 2, 1.0)[0]
        if all(in_U(r * u, L, PaperParams.standard(2, r), cfg) for r in rhos):
            dirs.append(u)
    med = {1: [], 2: []}
    for rho in rhos:
        P = PaperParams.standard(2, rho)
        errs = {1: [], 2: []}
        for u in dirs:
            x = rho * u
            g, t = L.split(x)
            spec = shell_solve(q, t, rho, cfg.oracle_cutoff_margin, 4.0)
            m = match_eigenvalue(spec, g, P)
            if m is None:
                raise oracle.NumericalFailure(f"no match at {x}")
            res = F_series(x, 3, q, P, cfg)
            for k in (1, 2):
                errs[k].append(abs(m.value - (x @ x + res.F_values[k - 1])))
        for k in (1, 2):
            med[k].append(float(np.median(errs[k])))
    slope1 = loglog_slope(rhos, med[1])
    alpha = PaperParams.standard(2, rhos[0]).alpha
    a = strictly_decreasing(med[1]) and strictly_decreasing(med[2])
    b = all(e2 < e1 for e1, e2 in zip(med[1], med[2]))
    c = slope1 <= -3 * alpha * 0.5
    return CheckResult(3, "non-resonant series error decays and improves with order",
                       a and b and c,
                       {"median_error_k1": med[1], "median_error_k2": med[2], "slope_k1": slope1,
                        "slope_bound": -1.5 * alpha, "monotone": a, "k2_below_k1": b})


# ---------------------------------------------------------------- 4

def _single_resonance_points(L, rho, params, cfg, rng, count):
    """Points inside exactly one slab, drawn near the diffraction lines of the shortest dual vectors."""
    out = []
    while len(out) < count:
        d = L.dual[rng.integers(L.d)]
        perp = np.array([-d[1], d[0]]) / np.linalg.norm(d) * rng.choice([-1, 1])
        u = rng.uniform(-1, 1) * params.rho**params.alpha1
        x = -(u + d @ d) / (2 * d @ d) * d + perp * rho * rng.uniform(0.95, 1.05)
        lab = classify(x, L, params, cfg)
        if lab.kind == "single":
            out.append((x, lab))
    return out


def check_resonance_matrix(cfg: NumericConfig = DEFAULT_CONFIG, rhos=(20.0, 40.0), n_points: int = 20,
                           seed: int = 0) -> CheckResult:
    q = square_potential()
    L = q.lattice
    medians, wins = [], []
    for rho in rhos:
        P = PaperParams.standard(2, rho)
        rng = np.random.default_rng(seed)
        errs, won = [], 0
        for x, lab in _single_resonance_points(L, rho, P, cfg, rng, n_points):
            g, t = L.split(x)
            spec = shell_solve(q, t, float(np.linalg.norm(x)), cfg.oracle_cutoff_margin, 4.0)
            # near a slab the paired eigenvalue can move further than rho^alpha1/2: search the whole window
            m = match_eigenvalue(spec, g, P, window=4.0)
            if m is None:
                raise oracle.NumericalFailure(f"no match at {x}")
            C = build_C(x, lab.directions, q, P, cfg)
            e = float(np.min(np.abs(C.eigenvalues - m.value)))
            f = F_series(x, 2, q, P, cfg, enforce_floor=False).predicted
            errs.append(e)
            won += e < abs(m.value - f)
        medians.append(float(np.median(errs)))
        wins.append(won / n_points)
    ok = min(wins) >= 0.9 and strictly_decreasing(medians)
    return CheckResult(4, "resonance-matrix eigenvalues beat the non-resonant series near one slab",
                       ok, {"win_rate": wins, "median_error": medians, "points_per_rho": n_points,
                            "bk_a_multiplier": cfg.bk_a_multiplier})


# ---------------------------------------------------------------- 5

def _slab_states(geom, q, rho, params, cfg, rng, count, preset_check=None):
    """(x, ctx, state) triples in the single-resonance domain with v in W(rho)."""
    L = q.lattice
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > 200 * count:
            raise RuntimeError("could not find enough single-resonance points")
        x = sample_slab(geom, rho, params, 1, rng)[0]
        if not in_V_prime(x, geom.delta, L, params, cfg):
            continue
        if preset_check is not None:
            try:
                verdict, ctx, st = preset_check(x)
            except ValueError:
                continue
            if not verdict.member:
                continue
            out.append((x, ctx, st, verdict))
            continue
        _, t = L.split(x)
        ctx = SingleResonanceContext(geom, q, t, params, cfg)
        st = ctx.state_of(x)
        if ctx.in_W(st.key):
            out.append((x, ctx, st, None))
    return out


def check_single_resonance_series(cfg: NumericConfig = DEFAULT_CONFIG, rhos=(20.0, 40.0, 80.0),
                                  n_points: int = 20, seed: int = 5) -> CheckResult:
    q = square_potential()
    L = q.lattice
    geom = sublattice_geometry(L, np.array([1.0, 0.0]))
    med0, med1 = [], []
    skipped = 0
    for rho in rhos:
        P = PaperParams.standard(2, rho)
        rng = np.random.default_rng(seed)
        e0, e1 = [], []
        while len(e0) < n_points:
            (x, ctx, st, _), = _slab_states(geom, q, rho, P, cfg, rng, 1)
            try:
                res = E_series(ctx, st, 2)
            except DenominatorFloorError:
                skipped += 1
                continue
            spec = shell_solve(q, ctx.t, float(np.linalg.norm(x)), cfg.oracle_cutoff_margin, 4.0)
            hit = match_delta_state(spec, ctx, st)
            if hit is None:
                raise oracle.NumericalFailure(f"no eigenvalue near lambda at {x}")
            lam_oracle = hit[1]
            e0.append(abs(lam_oracle - res.lambda_jb))
            e1.append(abs(lam_oracle - res.predicted))
        med0.append(float(np.median(e0)))
        med1.append(float(np.median(e1)))
    s0, s1 = loglog_slope(rhos, med0), loglog_slope(rhos, med1)
    ok = strictly_decreasing(med0) and all(b < a for a, b in zip(med0, med1)) and s1 < s0
    return CheckResult(5, "single-resonance eigenvalues: Hill prediction decays, E_1 correction improves it",
                       ok, {"median_error_lambda": med0, "median_error_with_E1": med1,
                            "slope_lambda": s0, "slope_with_E1": s1, "skipped_floor": skipped})


# ---------------------------------------------------------------- 6 and 7

def _simple_points(q, rho, params, cfg, rng, count):
    out = []
    while len(out) < count:
        x = sample_sphere(rng, 1, 2, rho)[0]
        if in_U(x, q.lattice, params, cfg) and in_simple_set_B(x, q, params, cfg).member:
            out.append(x)
    return out


def check_eigenfunctions(cfg: NumericConfig = DEFAULT_CONFIG, rhos=(15.0, 30.0, 60.0), per_rho: int = 8,
                         seed: int = 11) -> tuple[CheckResult, CheckResult]:
    """Dominant-coefficient uniqueness with tail decay, and the first-order eigenfunction correction."""
    q = square_potential()
    L = q.lattice
    tails, unique, improved, errs1, errs2 = [], True, True, [], []
    for rho in rhos:
        P = PaperParams.standard(2, rho, s=60)
        rng = np.random.default_rng(seed)
        tr, a1, a2 = [], [], []
        for x in _simple_points(q, rho, P, cfg, rng, per_rho):
            g, t = L.split(x)
            spec = shell_solve(q, t, rho, cfg.oracle_cutoff_margin, 4.0)
            m = match_eigenvalue(spec, g, P)
            if m is None:
                raise oracle.NumericalFailure(f"no match at {x}")
            unique &= count_dominant(spec, g) == 1
            e1, tail = eigenfunction_error(spec, predict_expansion(x, 1, q, P, cfg), m, g)
            e2, _ = eigenfunction_error(spec, predict_expansion(x, 2, q, P, cfg), m, g)
            improved &= e2 < e1
            tr.append(tail)
            a1.append(e1)
            a2.append(e2)
        tails.append(float(np.median(tr)))
        errs1.append(float(np.median(a1)))
        errs2.append(float(np.median(a2)))
    P = PaperParams.standard(2, rhos[0])
    slope = loglog_slope(rhos, tails)
    r6 = CheckResult(6, "one dominant coefficient at simple points; tail mass decays",
                     bool(unique) and slope <= -P.alpha1,
                     {"points": per_rho * len(rhos), "unique_dominant": bool(unique), "median_tail": tails,
                      "tail_slope": slope, "slope_bound": -P.alpha1})
    r7 = CheckResult(7, "adding the first correction lowers the eigenfunction error at every point",
                     bool(improved), {"points": per_rho * len(rhos), "median_error_order1": errs1,
                                      "median_error_order2": errs2})
    return r6, r7


# ---------------------------------------------------------------- 8

def check_resonance_eigenfunctions(cfg: NumericConfig = DEFAULT_CONFIG, rhos=(20.0, 40.0),
                                   n_points: int = 12, seed: int = 0) -> CheckResult:
    q = square_potential()
    L = q.lattice
    geom = sublattice_geometry(L, np.array([1.0, 0.0]))
    medians = []
    for rho in rhos:
        P = PaperParams.delta_preset(2, rho)
        rng = np.random.default_rng(seed)

        def check(x, P=P):
            return in_simple_set_B_delta(x, geom, q, P, cfg)

        errs = []
        for x, ctx, st, verdict in _slab_states(geom, q, rho, P, cfg, rng, n_points, check):
            spec = shell_solve(q, ctx.t, rho, cfg.oracle_cutoff_margin, 4.0)
            hit = match_delta_state(spec, ctx, st)
            if hit is None:
                raise oracle.NumericalFailure(f"no eigenvalue near lambda at {x}")
            errs.append(resonance_eigenfunction_error(spec, ctx, st, hit[0], verdict))
        medians.append(float(np.median(errs)))
    return CheckResult(8, "single-resonance eigenfunctions approach the Hill product functions",
                       strictly_decreasing(medians), {"median_distance": medians, "points_per_rho": n_points})


# ---------------------------------------------------------------- 10

def check_measures(cfg: NumericConfig = DEFAULT_CONFIG, seed: int = 17, n_mc: int = 100_000,
                   n_surface: int = 200, n_slab: int = 80) -> CheckResult:
    q = square_potential()
    L = q.lattice
    rng = np.random.default_rng(seed)
    deficits = []
    for rho in (20.0, 40.0, 80.0):
        est = mc_nonresonance_fraction(L, PaperParams.standard(2, rho), n_mc, rng, cfg)
        deficits.append(1.0 - est.fraction)
    retained, sphere = [], []
    for rho in (20.0, 40.0, 80.0):
        P = PaperParams.standard(2, rho)
        rep = prune_P_b_and_A(sample_surface(n_surface, rho, q, P, np.random.default_rng(seed), cfg), q, P, cfg)
        retained.append(rep.retained_fraction)
        sphere.append(rep.sphere_fraction)
    geom = sublattice_geometry(L, np.array([1.0, 0.0]))
    bd = []
    for rho in (20.0, 40.0):
        P = PaperParams.delta_preset(2, rho)
        bd.append(mc_measure_B_delta(geom, rho, n_slab, q, P, np.random.default_rng(seed), cfg))
    a = strictly_decreasing(deficits)
    b = retained[1] > 0.9 and all(y >= x for x, y in zip(retained, retained[1:]))
    c = bd[1].fraction >= bd[0].fraction - (bd[0].high - bd[0].low)
    return CheckResult(10, "measure estimates: slab deficit shrinks, pruning keeps most of the surface",
                       a and b and c,
                       {"nonresonance_deficit": deficits, "retained_fraction": retained,
                        "sphere_relative_retained": sphere,
                        "B_delta_fraction": [(e.fraction, e.low, e.high) for e in bd]})


# ---------------------------------------------------------------- 11

def check_isoenergetic(cfg: NumericConfig = DEFAULT_CONFIG, rho: float = 10.0) -> CheckResult:
    q = square_potential()
    P = PaperParams.standard(2, rho)
    errors = []
    for theta in (0.4123, 1.0, 0.7071, 1.2345, 0.2718):
        try:
            ip = find_isoenergetic_point([math.cos(theta), math.sin(theta)], rho, q, P, cfg)
        except (ValueError, oracle.NumericalFailure) as exc:
            errors.append(f"theta={theta}: {exc}")
            continue
        ok = ip.residual < 1e-8 * rho**2 and ip.simple
        return CheckResult(11, "an eigenvalue equal to rho^2 is found by bisection at rho = 10", ok,
                           {"theta": theta, "root": ip.root.tolist(), "residual": ip.residual,
                            "nearest_other_eigenvalue": ip.nearest_other, "iterations": ip.iterations,
                            "rays_rejected": errors})
    return CheckResult(11, "an eigenvalue equal to rho^2 is found by bisection at rho = 10", False,
                       {"rays_rejected": errors})


# ---------------------------------------------------------------- 12

def _grad_F1_exact(x, q):
    g = q.vectors
    w = np.abs(q.values) ** 2
    den = 2 * g @ x - np.sum(g * g, axis=1)
    return -np.sum((w / den**2)[:, None] * 2 * g, axis=0)


def _dE1_dy(y, depth: int):
    """d/dy of E_1 for 2cos x1 + 2cos x2 near the plane of delta = e1 (y = transverse coordinate).

    E_1 = 2/(4y^2-1) from the two-step returns, plus the four-step excursions
    -1/((2y+1)^2 (4y+4)) + 1/((2y-1)^2 (4y-4)) when chains of length 4 are summed.
    """
    d = -16 * y / (4 * y * y - 1) ** 2
    if depth >= 3:
        d += 4 / ((2 * y + 1) ** 3 * (4 * y + 4)) + 4 / ((2 * y + 1) ** 2 * (4 * y + 4) ** 2)
        d += -4 / ((2 * y - 1) ** 3 * (4 * y - 4)) - 4 / ((2 * y - 1) ** 2 * (4 * y - 4) ** 2)
    return d


def check_derivatives(cfg: NumericConfig = DEFAULT_CONFIG, rhos=(15.0, 30.0, 60.0),
                      theta: float = 0.4123) -> CheckResult:
    q = square_potential()
    L = q.lattice
    geom = sublattice_geometry(L, np.array([1.0, 0.0]))
    basis = scipy.linalg.null_space(geom.delta[None, :]).T[0]
    F_mag, E_mag, F_ratio, E_ratio, F_rel, E_rel = [], [], [], [], [], []
    for rho in rhos:
        P = PaperParams.standard(2, rho)
        x = rho * np.array([math.cos(theta), math.sin(theta)])
        exact = _grad_F1_exact(x, q)
        errs = [np.linalg.norm(grad_F_check(x, 1, q, P, h, cfg) - exact) for h in (0.02, 0.01)]
        F_ratio.append(errs[0] / errs[1])
        F_rel.append(errs[1] / np.linalg.norm(exact))
        F_mag.append(float(np.linalg.norm(exact)))
        y = np.array([-0.37, rho + 0.213])
        ex_e = _dE1_dy(y[1], chain_depth(P, cfg)) * basis[1]
        errs = [abs(grad_E_check(y, geom, q, P, 1, h, cfg)[0] - ex_e) for h in (0.02, 0.01)]
        E_ratio.append(errs[0] / errs[1])
        E_rel.append(errs[1] / abs(ex_e))
        E_mag.append(abs(ex_e))
    second_order = all(3.0 < r < 5.0 for r in F_ratio + E_ratio)
    small = max(F_rel + E_rel) < 1e-3
    sF, sE = loglog_slope(rhos, F_mag), loglog_slope(rhos, E_mag)
    return CheckResult(12, "finite-difference gradients of F_1 and E_1 agree at second order and decay",
                       second_order and small and sF < 0 and sE < 0,
                       {"F_error_ratio_h_to_h/2": F_ratio, "E_error_ratio_h_to_h/2": E_ratio,
                        "F_relative_error": F_rel, "E_relative_error": E_rel,
                        "grad_F_slope": sF, "grad_E_slope": sE})


# ---------------------------------------------------------------- 13

def check_invariants(cfg: NumericConfig = DEFAULT_CONFIG, seed: int = 23) -> CheckResult:
    rng = np.random.default_rng(seed)
    q = square_potential()
    L = q.lattice
    m = {}
    spec = oracle.assemble_and_solve(q, np.array([0.31, 0.77]), 9.0)
    B = spec.b_table
    n = B.shape[0]
    m["parseval_columns"] = float(np.max(np.abs(B.conj().T @ B - np.eye(n))))
    m["parseval_rows"] = float(np.max(np.abs(np.sum(np.abs(B) ** 2, axis=1) - 1)))
    dense = spec.matrix.toarray()
    m["self_adjoint_exact"] = bool(np.array_equal(dense, dense.conj().T))
    H = Lattice.hexagonal()
    m["pairing_error"] = max(L.pairing_error(), H.pairing_error())
    hq = FourierPotential.cosines(H, {(1, 0): 1.0, (0, 1): 1.0, (1, -1): 1.0})
    hgeom = sublattice_geometry(H, H.from_dual_coords(np.array([1, 1])))
    rt = 0.0
    for _ in range(200):
        x = rng.uniform(-30, 30, 2)
        g, t = H.split(x)
        rt = max(rt, float(np.linalg.norm(H.from_dual_coords(g) + t - x)))
        dec = gamma_delta_decompose(x, hgeom, t)
        rt = max(rt, float(np.linalg.norm(dec.reconstruct(hgeom) - x)))
    m["round_trip_error"] = rt
    # nesting of the resonance sets, on shell samples, for the configured direction ball and a wider one
    P = PaperParams.standard(2, 30.0)
    nested = True
    in_e2 = 0
    for mult in sorted({cfg.resonance_multiplier, 4.0}):
        dirs = resonance_directions(L, P, cfg.with_(resonance_multiplier=mult))
        r = np.sqrt(rng.uniform((0.5 * P.rho) ** 2, (1.5 * P.rho) ** 2, 4000))
        outside = 0
        for x in sample_sphere(rng, 4000, 2, 1.0) * r[:, None]:
            w = membership_orders(x, dirs, P)
            if w[1] is not None:
                in_e2 += 1
                outside += w[0] is None
        m[f"E2_not_in_E1_multiplier_{mult:g}"] = outside
        nested &= outside == 0
    m["E2_subset_E1"] = bool(nested)
    m["E2_samples"] = in_e2
    x = np.array([-0.4, 30.2])
    lab = classify(x, L, P, cfg)
    idx = build_Bk(x, lab.directions, L, P, cfg)
    C = build_C(x, lab.directions, q, P, cfg)
    perm = rng.permutation(idx.b_k)
    shuffled = scipy.linalg.eigvalsh(_c_entries(idx.offsets[perm], idx.members[perm], q))
    m["C_permutation_error"] = float(np.max(np.abs(shuffled - C.eigenvalues)))
    Q = {1: 1.0, -1: 1.0}
    a, b = solve_Tv(Q, 0.3, 1.0, 40), solve_Tv(Q, 0.3, 1.0, 80)
    js = [p.j for p in a.pairs() if abs(p.j) <= 10]
    m["hill_doubling"] = float(max(abs(a.mu_of(j) - b.mu_of(j)) for j in js))
    m["oracle_widening"] = oracle.truncation_shift(q, np.array([0.31, 0.77]), 30.0 + 8, (896.0, 904.0),
                                                   inner=22.0)
    ok = (m["parseval_columns"] < 1e-10 and m["parseval_rows"] < 1e-10 and m["self_adjoint_exact"]
          and m["pairing_error"] < 1e-12 and rt < 1e-10 and nested and in_e2 > 0
          and m["C_permutation_error"] < 1e-10 and m["hill_doubling"] < 1e-8 and m["oracle_widening"] < 1e-8)
    return CheckResult(13, "structural invariants", ok, m)


# ---------------------------------------------------------------- driver

def run_all(cfg: NumericConfig = DEFAULT_CONFIG, only=None) -> list[CheckResult]:
    """Run every criterion (or the numbers in ``only``); criterion 9 audits all solves made meanwhile."""
    plan = [
        (1, check_free_case), (2, check_tensor), (3, check_nonresonant_decay),
        (4, check_resonance_matrix), (5, check_single_resonance_series), ((6, 7), check_eigenfunctions),
        (8, check_resonance_eigenfunctions), (10, check_measures), (11, check_isoenergetic),
        (12, check_derivatives), (13, check_invariants),
    ]
    wanted = None if only is None else set(only)
    results = []
    with BindingAudit() as audit:
        for num, fn in plan:
            nums = num if isinstance(num, tuple) else (num,)
            if wanted is not None and not wanted.intersection(nums):
                continue
            t0 = time.perf_counter()
            out = fn(cfg)
            out = out if isinstance(out, tuple) else (out,)
            dt = time.perf_counter() - t0
            for r in out:
                r.seconds = dt / len(out)
                log.info("%s (%.1fs)", r.line(), r.seconds)
                results.append(r)
    if wanted is None or 9 in wanted:
        results.append(CheckResult(9, "binding identity holds on interior rows of every oracle solve",
                                   audit.solves > 0 and audit.worst < 1e-9,
                                   {"solves": audit.solves, "max_residual": audit.worst}))
    return sorted(results, key=lambda r: r.number)


def format_report(results: list[CheckResult]) -> str:
    lines = []
    for r in results:
        lines.append(f"{r.line()}  ({r.seconds:.1f}s)")
        for k, v in r.metrics.items():
            lines.append(f"    {k}: {v}")
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} criteria passed")
    return "\n".join(lines) + "\n"
