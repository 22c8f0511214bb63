"""Predictions near diffraction planes: the resonance matrix and the single-direction series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import DEFAULT_CONFIG, NumericConfig, PaperParams
from .domains import BkIndexSet, build_Bk
from .hill import HillCache, default_n_modes, in_W_rho
from .lattice import TWO_PI, DeltaGeometry, Lattice, decompose_t, gamma_delta_decompose
from .nonres import DenominatorFloorError, working_potential
from .potential import FourierPotential, directional, split_directional


# ---------------------------------------------------------------- resonance matrix

@dataclass(frozen=True)
class ResonanceMatrix:
    index: BkIndexSet
    entries: np.ndarray
    eigenvalues: np.ndarray


def _c_entries(offsets: np.ndarray, members: np.ndarray, q: FourierPotential) -> np.ndarray:
    n = len(offsets)
    lookup = q.lookup
    real = bool(np.all(q.values.imag == 0))
    mat = np.zeros((n, n), dtype=float if real else complex)
    mat[np.diag_indices(n)] = np.sum(members**2, axis=1)
    diff = offsets[:, None, :] - offsets[None, :, :]
    for (i, j) in zip(*np.nonzero(~np.eye(n, dtype=bool))):
        v = lookup.get(tuple(diff[i, j].tolist()))
        if v is not None:
            mat[i, j] = v.real if real else v
    return mat


def build_C(center, directions, q: FourierPotential, params: PaperParams,
            cfg: NumericConfig = DEFAULT_CONFIG, truncated=False) -> ResonanceMatrix:
    """Matrix with diagonal |h_i + t|^2 and off-diagonal q_{h_i - h_j} over the resonance index set."""
    qt = q if truncated else working_potential(q, params, cfg)
    idx = build_Bk(center, directions, q.lattice, params, cfg)
    mat = _c_entries(idx.offsets, idx.members, qt)
    return ResonanceMatrix(idx, mat, scipy.linalg.eigvalsh(mat))


def C_at(center, index: BkIndexSet, q: FourierPotential) -> np.ndarray:
    """Eigenvalues of the matrix built on the same offsets around another centre."""
    members = np.asarray(center, float) + q.lattice.from_dual_coords(index.offsets)
    return scipy.linalg.eigvalsh(_c_entries(index.offsets, members, q))


def predict_resonant(center, directions, q, params, cfg=DEFAULT_CONFIG) -> np.ndarray:
    return build_C(center, directions, q, params, cfg).eigenvalues


# ---------------------------------------------------------------- single resonance

@dataclass(frozen=True)
class Step:
    """Transverse step beta_1 with its Fourier coefficients q_{g_1} keyed by axial index n_1."""

    beta: np.ndarray
    beta_key: tuple
    terms: tuple  # ((n_1, q), ...)


@dataclass(frozen=True)
class State:
    j: int
    key: tuple


class SingleResonanceContext:
    """Everything needed to evaluate couplings and chain sums for one delta and one t."""

    def __init__(self, geom: DeltaGeometry, q: FourierPotential, t, params: PaperParams,
                 cfg: NumericConfig = DEFAULT_CONFIG, max_j: int = 0, truncated=False):
        self.geom = geom
        self.params = params
        self.cfg = cfg
        self.t = np.asarray(t, dtype=float)
        self.q = q if truncated else working_potential(q, params, cfg)
        self.Q = directional(self.q, geom)
        self.q_delta, self.q_perp = split_directional(self.q, geom)
        self.a, self.tau, self.axial = decompose_t(self.t, geom)
        dn = geom.delta_norm
        self.r1 = params.rho**params.alpha1 / (2 * dn) + 2 * dn
        self.jwin = math.ceil(9 * self.r1 / dn)
        n_modes = cfg.hill_modes or default_n_modes(self.Q, abs(max_j) + self.jwin)
        self.hill = HillCache(self.Q, dn, n_modes)
        self.steps = self._steps()
        self._neighbours: dict = {}

    # -- geometry helpers
    def _steps(self) -> list[Step]:
        g = self.geom
        groups: dict = {}
        for vec, val in zip(self.q_perp.vectors, self.q_perp.values):
            if np.linalg.norm(vec) >= self.params.rho**self.params.alpha * self.cfg.support_multiplier:
                continue
            beta = g.transverse(vec)
            key = tuple(np.rint(g.transverse_coords(vec)).astype(int).tolist())
            n1 = vec @ g.delta_star / TWO_PI
            if abs(n1 - round(n1)) > 1e-8:
                raise ArithmeticError("axial index of a Fourier vector is not integral")
            groups.setdefault(key, (beta, []))[1].append((int(round(n1)), complex(val)))
        return [Step(b, k, tuple(sorted(terms))) for k, (b, terms) in sorted(groups.items())]

    def beta_of(self, key) -> np.ndarray:
        return np.asarray(key, float) @ self.geom.gamma_delta

    def key_of(self, beta) -> tuple:
        return tuple(np.rint(self.geom.transverse_coords(beta)).astype(int).tolist())

    def v_of(self, key) -> float:
        beta = self.beta_of(key)
        val = self.axial - (beta - self.a) @ self.geom.delta_star / TWO_PI
        return float(val - math.floor(val + 1e-12))

    def spectrum(self, key):
        return self.hill.get(self.v_of(key))

    def lam(self, state: State) -> float:
        beta = self.beta_of(state.key)
        return float(np.sum((beta + self.tau) ** 2) + self.spectrum(state.key).mu_of(state.j))

    def state_of(self, x) -> State:
        dec = gamma_delta_decompose(x, self.geom, self.t)
        return State(dec.j, self.key_of(dec.beta))

    def in_W(self, key) -> bool:
        return in_W_rho(self.v_of(key), self.params.rho, self.spectrum(key), self.jwin)

    # -- couplings
    def shift_index(self, n1: int, step: Step, key) -> int:
        """Integer n with exp(i(n1 - (beta_1, delta*)/2pi) z) phi_v = sum_m c_m exp(i(m + n + v') z)."""
        v = self.v_of(key)
        key2 = tuple(a + b for a, b in zip(key, step.beta_key))
        v2 = self.v_of(key2)
        n = n1 - step.beta @ self.geom.delta_star / TWO_PI + v - v2
        if abs(n - round(n)) > 1e-8:
            raise ArithmeticError(f"phase index {n} is not an integer: delta* pairing broken")
        return int(round(n))

    def coupling_a(self, n1: int, step: Step, j: int, key, j2: int) -> complex:
        """Inner product of exp(i(n1 - (beta_1,delta*)/2pi) z) phi_{j,v(beta)} with phi_{j2,v(beta+beta_1)}."""
        n = self.shift_index(n1, step, key)
        key2 = tuple(a + b for a, b in zip(key, step.beta_key))
        c1 = self.spectrum(key).pair(j).coeffs
        c2 = self.spectrum(key2).pair(j2).coeffs
        return complex(np.vdot(c2, _shift(c1, n)))

    def _row(self, state: State, step: Step) -> tuple[np.ndarray, np.ndarray]:
        """All couplings A(state, (j2, beta + beta_1)) over the j2 window, as (j2 array, values)."""
        key2 = tuple(a + b for a, b in zip(state.key, step.beta_key))
        sp1, sp2 = self.spectrum(state.key), self.spectrum(key2)
        c1 = sp1.pair(state.j).coeffs
        u = np.zeros_like(c1, dtype=complex)
        for n1, val in step.terms:
            u = u + val * _shift(c1, self.shift_index(n1, step, state.key))
        r = sp2.trusted_radius
        js = np.arange(max(-r, state.j - self.jwin * 10), min(r, state.j + self.jwin * 10) + 1)
        cols = sp2.coeff_matrix(js)
        # A = conj(sum_n1 c * a) with a = <phi_2, shifted phi_1>
        vals = np.conj(np.conj(cols).T @ u)
        return js, vals

    def A_coeff(self, s1: State, s2: State) -> complex:
        beta1 = tuple(b - a for a, b in zip(s1.key, s2.key))
        step = next((s for s in self.steps if s.beta_key == beta1), None)
        if step is None:
            return 0j
        acc = 0j
        for n1, val in step.terms:
            acc += val * self.coupling_a(n1, step, s1.j, s1.key, s2.j)
        return complex(np.conj(acc))

    def neighbours(self, state: State):
        """Non-negligible couplings from ``state``: list of (State, A, j_1)."""
        if state in self._neighbours:
            return self._neighbours[state]
        out = []
        for step in self.steps:
            js, vals = self._row(state, step)
            if not len(vals):
                continue
            cut = self.cfg.coupling_prune * max(1.0, float(np.max(np.abs(vals))))
            key2 = tuple(a + b for a, b in zip(state.key, step.beta_key))
            for j2, val in zip(js, vals):
                if abs(val) > cut:
                    out.append((State(int(j2), key2), complex(val), int(j2) - state.j))
        self._neighbours[state] = out
        return out

    def radius(self, i: int) -> float:
        return self.r1 * 10 ** (i - 1)

    # -- chain sums
    def S_prime(self, a: float, center: State, k: int, check=True) -> float:
        lam0 = self.lam(center)
        logr = math.log(self.params.rho)
        if check and abs(a - lam0) >= 1 / logr:
            raise ValueError("a must satisfy |a - lambda| < 1/ln(rho)")
        far = 0.5 * self.params.rho**self.params.alpha2
        dn = self.geom.delta_norm
        lam_cache: dict = {}
        total = 0j

        def lam(s):
            if s not in lam_cache:
                lam_cache[s] = self.lam(s)
            return lam_cache[s]

        def walk(state, depth, prod):
            nonlocal total
            if depth == k:
                closing = self.A_coeff(state, center)
                total += prod * closing
                return
            for nxt, A, j1 in self.neighbours(state):
                if abs(j1 * dn) >= 9 * self.radius(depth + 1):
                    continue
                if nxt == center:
                    continue
                if depth + 1 == k and nxt.key == center.key:
                    continue  # closing coupling vanishes without a transverse step
                den = a - lam(nxt)
                floor = 1 / logr if nxt.key == center.key else far
                if abs(den) < floor:
                    raise DenominatorFloorError(
                        f"denominator {den:.3e} below floor {floor:.3e} at state {nxt}")
                walk(nxt, depth + 1, prod * A / den)

        walk(center, 0, 1.0 + 0j)
        if abs(total.imag) > 1e-9 * max(1.0, abs(total)):
            raise ArithmeticError(f"chain sum has imaginary part {total.imag:.3e}")
        return float(total.real)


def _shift(c: np.ndarray, n: int) -> np.ndarray:
    """out[m] = c[m - n] with zero fill."""
    out = np.zeros_like(c, dtype=complex)
    if n >= 0:
        out[n:] = c[: len(c) - n]
    else:
        out[:n] = c[-n:]
    return out


@dataclass
class SingleResResult:
    state: State
    lambda_jb: float
    E_values: list = field(default_factory=list)
    predicted: float = 0.0
    chain_depth: int = 0


def chain_depth(params: PaperParams, cfg: NumericConfig) -> int:
    return min(2 * params.p1, cfg.e_chain_depth)


def E_series(ctx: SingleResonanceContext, state: State, k_max: int, depth: int | None = None,
             check=True) -> SingleResResult:
    """E_0 = 0, E_s = sum_{k<=depth} S'_k(lambda + E_{s-1}, lambda); predicted = lambda + E_{k_max-1}."""
    depth = chain_depth(ctx.params, ctx.cfg) if depth is None else depth
    lam = ctx.lam(state)
    E = [0.0]
    for _ in range(1, k_max):
        a = lam + E[-1]
        E.append(sum(ctx.S_prime(a, state, k, check=check) for k in range(1, depth + 1)))
    return SingleResResult(state, lam, E, lam + E[-1], depth)


def predict_singleres(x, geom: DeltaGeometry, q: FourierPotential, params: PaperParams,
                      k_max: int = 2, cfg: NumericConfig = DEFAULT_CONFIG, check=True):
    lattice: Lattice = geom.lattice
    _, t = lattice.split(x)
    ctx = SingleResonanceContext(geom, q, t, params, cfg)
    st = ctx.state_of(x)
    return ctx, E_series(ctx, st, k_max, check=check)


def grad_E_check(x, geom: DeltaGeometry, q: FourierPotential, params: PaperParams, k: int = 1,
                 h: float = 1e-4, cfg: NumericConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Central differences of E_k along an orthonormal basis of the plane orthogonal to delta."""
    lattice = geom.lattice
    g, t = lattice.split(x)
    basis = scipy.linalg.null_space(geom.delta[None, :]).T
    out = np.zeros(len(basis))
    for i, e in enumerate(basis):
        vals = []
        for sgn in (1, -1):
            tt = t + sgn * h * e
            ctx = SingleResonanceContext(geom, q, tt, params, cfg)
            st = ctx.state_of(lattice.from_dual_coords(g) + tt)
            vals.append(E_series(ctx, st, k + 1).E_values[k])
        out[i] = (vals[0] - vals[1]) / (2 * h)
    return out
