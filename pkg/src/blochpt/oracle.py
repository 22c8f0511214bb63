"""Brute-force plane-wave diagonalization used as the reference for every prediction."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .potential import FourierPotential

DENSE_MAX = 2500

# callables invoked with every finished OracleSpectrum (used to audit all solves of a run)
SOLVE_OBSERVERS: list = []


class NumericalFailure(RuntimeError):
    """Raised when a numerical routine cannot certify its own output."""


class _KeyIndex:
    """Maps integer coordinate rows to basis positions."""

    def __init__(self, coords: np.ndarray):
        self.coords = coords
        self.lo = coords.min(axis=0) - 64 if len(coords) else np.zeros(coords.shape[1], np.int64)
        span = (coords.max(axis=0) + 64 - self.lo + 1) if len(coords) else np.ones(coords.shape[1], np.int64)
        self.mult = np.concatenate(([1], np.cumprod(span[:-1]))).astype(np.int64)
        self.span = span
        keys = self._raw(coords)
        self.order = np.argsort(keys)
        self.sorted = keys[self.order]

    def _raw(self, c):
        return ((np.asarray(c, dtype=np.int64) - self.lo) * self.mult).sum(axis=-1)

    def find(self, c) -> np.ndarray:
        """Positions of rows c, or -1 when absent."""
        c = np.atleast_2d(np.asarray(c, dtype=np.int64))
        rel = c - self.lo
        ok = np.all((rel >= 0) & (rel < self.span), axis=1)
        keys = (rel * self.mult).sum(axis=1)
        pos = np.searchsorted(self.sorted, keys)
        pos = np.clip(pos, 0, len(self.sorted) - 1)
        hit = ok & (self.sorted[pos] == keys) if len(self.sorted) else np.zeros(len(c), bool)
        return np.where(hit, self.order[pos], -1)


@dataclass(eq=False)
class OracleSpectrum:
    """Eigenpairs of the truncated operator at quasimomentum t.

    ``b_table[i, N]`` is the coefficient of plane wave ``coords[i]`` in the N-th
    eigenvector, i.e. b(N, gamma_i).
    """

    q: FourierPotential
    t: np.ndarray
    coords: np.ndarray
    cutoff: float
    inner: float
    eigenvalues: np.ndarray
    b_table: np.ndarray
    matrix: object = field(repr=False)
    full: bool = True

    @cached_property
    def index(self) -> _KeyIndex:
        return _KeyIndex(self.coords)

    @cached_property
    def momenta(self) -> np.ndarray:
        return self.q.lattice.from_dual_coords(self.coords) + self.t

    @cached_property
    def kinetic(self) -> np.ndarray:
        return np.sum(self.momenta**2, axis=1)

    def position(self, gamma_coords) -> int:
        return int(self.index.find(gamma_coords)[0])

    def b(self, N: int, gamma_coords) -> complex:
        i = self.position(gamma_coords)
        return 0j if i < 0 else complex(self.b_table[i, N])

    @cached_property
    def interior(self) -> np.ndarray:
        """Rows whose every coupling partner gamma - g lies inside the basis."""
        ok = np.ones(len(self.coords), bool)
        for s in self.q.coords:
            ok &= self.index.find(self.coords - s) >= 0
        return ok


def assemble(q: FourierPotential, t, cutoff: float, inner: float = 0.0):
    t = np.asarray(t, dtype=float)
    coords = q.lattice.lattice_points(cutoff, shift=t, r_in=inner, strict=False)
    n = len(coords)
    kin = np.sum((q.lattice.from_dual_coords(coords) + t) ** 2, axis=1)
    idx = _KeyIndex(coords)
    rows, cols, vals = [np.arange(n)], [np.arange(n)], [kin.astype(complex)]
    for s, v in zip(q.coords, q.values):
        tgt = idx.find(coords + s)
        ok = tgt >= 0
        rows.append(tgt[ok])
        cols.append(np.arange(n)[ok])
        vals.append(np.full(ok.sum(), v, dtype=complex))
    rows, cols, vals = (np.concatenate(a) for a in (rows, cols, vals))
    if np.all(vals.imag == 0):
        vals = vals.real
    mat = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return coords, mat


def _windowed(mat, window, tol):
    lo, hi = window
    sigma = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    n = mat.shape[0]
    diag = mat.diagonal().real
    k = int(min(n - 2, max(12, 1.5 * np.count_nonzero(np.abs(diag - sigma) < half + 2) + 12)))
    while True:
        vals, vecs = scipy.sparse.linalg.eigsh(mat, k=k, sigma=sigma, which="LM", tol=0)
        if np.max(np.abs(vals - sigma)) > half or k >= n - 2:
            break
        k = min(n - 2, 2 * k)
    res = np.linalg.norm(mat @ vecs - vecs * vals, axis=0)
    scale = max(1.0, np.max(np.abs(vals)))
    if np.any(res > tol * scale):
        raise NumericalFailure(f"windowed eigensolve not converged: max residual {res.max():.3e}")
    keep = (vals >= lo) & (vals <= hi)
    order = np.argsort(vals[keep])
    return vals[keep][order], vecs[:, keep][:, order]


def assemble_and_solve(q: FourierPotential, t, cutoff: float, window=None, inner: float = 0.0,
                       residual_tol: float = 1e-11) -> OracleSpectrum:
    """Diagonalize the operator on plane waves g with inner <= |g + t| <= cutoff.

    With ``window=(lo, hi)`` only eigenvalues inside the window are returned,
    computed by shift-invert Lanczos once the basis is too large for a dense solve.
    """
    t = np.asarray(t, dtype=float)
    coords, mat = assemble(q, t, cutoff, inner)
    n = len(coords)
    if n == 0:
        raise ValueError("empty basis: increase cutoff")
    if window is None or n <= DENSE_MAX:
        if n > 4 * DENSE_MAX:
            raise ValueError(f"dense solve of size {n} refused; pass an energy window")
        vals, vecs = scipy.linalg.eigh(mat.toarray())
        full = window is None
        if window is not None:
            keep = (vals >= window[0]) & (vals <= window[1])
            vals, vecs = vals[keep], vecs[:, keep]
    else:
        vals, vecs = _windowed(mat, window, residual_tol)
        full = False
    spec = OracleSpectrum(q, t, coords, cutoff, inner, vals, vecs, mat, full)
    for observe in SOLVE_OBSERVERS:
        observe(spec)
    return spec


def shell_solve(q: FourierPotential, t, radius: float, margin: float, half_width: float,
                centre_energy: float | None = None) -> OracleSpectrum:
    """Solve on the annulus of plane waves within ``margin`` of ``radius``.

    Returns eigenvalues within ``half_width`` of ``centre_energy`` (default radius**2).
    """
    e = radius**2 if centre_energy is None else centre_energy
    return assemble_and_solve(q, t, radius + margin, window=(e - half_width, e + half_width),
                              inner=max(0.0, radius - margin))


@dataclass(frozen=True)
class Match:
    N: int
    value: float
    b_gamma: complex
    vector: np.ndarray
    runner_up_mass: float
    cluster: tuple


def _rotate_cluster(vecs: np.ndarray, row: int) -> np.ndarray:
    """Unitary change of basis inside a degenerate block putting all weight of ``row`` on column 0."""
    r = vecs[row]
    nr = np.linalg.norm(r)
    m = vecs.shape[1]
    if m == 1 or nr == 0:
        return vecs
    first = np.conj(r) / nr
    w, _ = np.linalg.qr(np.column_stack([first, np.eye(m, dtype=complex)]))
    w = w[:, :m]
    w[:, 0] = first  # qr fixes the column only up to a phase
    return vecs @ w


def match_eigenvalue(spec: OracleSpectrum, gamma_coords, params, c4: float = 1.0,
                     c: float | None = None, degeneracy_tol: float = 1e-10,
                     window: float | None = None) -> Match | None:
    """Eigenvalue paired with plane wave gamma: within ``window`` of |gamma+t|^2 and of largest overlap.

    ``window`` defaults to rho^alpha1/2, the non-resonant pairing radius. Returns
    None when the best overlap is below c4 * rho^(-c*alpha).
    """
    row = spec.position(gamma_coords)
    if row < 0:
        raise ValueError("gamma is not in the oracle basis")
    if c is None:
        c = (params.d - 1) * params.q_exp / 2
    target = spec.kinetic[row]
    lam = spec.eigenvalues
    if window is None:
        window = 0.5 * params.rho ** params.alpha1
    cand = np.flatnonzero(np.abs(lam - target) < window)
    if cand.size == 0:
        return None
    best, best_mass, best_vec, cluster = -1, -1.0, None, ()
    masses = []
    for N in cand:
        tol = degeneracy_tol * max(1.0, abs(lam[N]))
        block = np.flatnonzero(np.abs(lam - lam[N]) <= tol)
        vecs = _rotate_cluster(spec.b_table[:, block].astype(complex), row)
        first = block[0] == N
        mass = abs(vecs[row, 0]) if first else 0.0
        if not first:
            continue
        masses.append(mass)
        if mass > best_mass:
            best, best_mass, best_vec, cluster = N, mass, vecs[:, 0], tuple(block)
    if best_mass <= c4 * params.rho ** (-c * params.alpha):
        return None
    others = sorted(masses)[:-1]
    runner = others[-1] ** 2 if others else 0.0
    return Match(int(best), float(lam[best]), complex(best_vec[row]), best_vec, float(runner), cluster)


def binding_residual(spec: OracleSpectrum, N: int, gamma_coords, q: FourierPotential | None = None,
                     vector=None):
    """Return (residual, interior_flag) of the plane-wave binding identity at gamma."""
    q = spec.q if q is None else q
    vec = spec.b_table[:, N] if vector is None else vector
    gamma_coords = np.asarray(gamma_coords)
    i = spec.position(gamma_coords)
    if i < 0:
        raise ValueError("gamma is not in the oracle basis")
    lhs = (spec.eigenvalues[N] - spec.kinetic[i]) * vec[i]
    rhs = 0j
    interior = True
    for s, v in zip(q.coords, q.values):
        k = spec.position(gamma_coords - s)
        if k < 0:
            interior = False
        else:
            rhs += v * vec[k]
    return float(abs(lhs - rhs)), interior


def max_interior_binding_residual(spec: OracleSpectrum) -> float:
    """Largest binding-identity residual over all eigenpairs and interior rows, via support shifts."""
    q = spec.q
    rows = np.flatnonzero(spec.interior)
    if rows.size == 0 or spec.eigenvalues.size == 0:
        return 0.0
    B = spec.b_table
    acc = (spec.eigenvalues[None, :] - spec.kinetic[rows, None]) * B[rows]
    for s, v in zip(q.coords, q.values):
        src = spec.index.find(spec.coords[rows] - s)
        acc = acc - v * B[src]
    return float(np.max(np.abs(acc)))


def truncation_shift(q: FourierPotential, t, cutoff: float, window, inner: float = 0.0,
                     factor: float = 1.25) -> float:
    """Largest eigenvalue change in ``window`` when the basis is widened by ``factor``."""
    a = assemble_and_solve(q, t, cutoff, window, inner)
    b = assemble_and_solve(q, t, cutoff * factor, window, inner / factor)
    if len(a.eigenvalues) != len(b.eigenvalues):
        return float("inf")
    if len(a.eigenvalues) == 0:
        return 0.0
    return float(np.max(np.abs(a.eigenvalues - b.eigenvalues)))


def count_in_window(q: FourierPotential, t, centre: float, half_width: float, margin: float = 8.0) -> int:
    r_hi = np.sqrt(centre + half_width)
    r_lo = np.sqrt(max(0.0, centre - half_width))
    spec = assemble_and_solve(q, t, r_hi + margin, window=(centre - half_width, centre + half_width),
                              inner=max(0.0, r_lo - margin))
    return len(spec.eigenvalues)


@dataclass(frozen=True)
class DeltaOverlap:
    """Overlaps (Psi_N, Phi_{j,beta}) for every computed N, plus bookkeeping flags."""

    values: np.ndarray
    truncated: bool
    rows: np.ndarray
    coeffs: np.ndarray


def resonance_b(spec: OracleSpectrum, ctx, state, coeff_floor: float = 1e-13) -> DeltaOverlap:
    """b(N, j, beta) = sum_m conj(c_m) b(N, gamma(beta, m)) for the Hill eigenfunction of ``state``.

    ``ctx`` supplies the direction geometry and Hill spectra (a SingleResonanceContext).
    """
    geom = ctx.geom
    if np.max(np.abs(ctx.t - spec.t)) > 1e-12:
        raise ValueError("context and spectrum use different quasimomenta")
    pair = ctx.spectrum(state.key).pair(state.j)
    beta = ctx.beta_of(state.key)
    v = ctx.v_of(state.key)
    pts = beta + ctx.tau + np.multiply.outer(pair.modes + v, geom.delta) - spec.t
    coords = spec.q.lattice.dual_int_coords(pts)
    rows = spec.index.find(coords)
    inside = rows >= 0
    truncated = bool(np.any(np.abs(pair.coeffs[~inside]) > coeff_floor))
    vals = np.conj(pair.coeffs[inside]) @ spec.b_table[rows[inside]]
    return DeltaOverlap(vals, truncated, rows, pair.coeffs)


def match_delta_state(spec: OracleSpectrum, ctx, state, window: float | None = None):
    """Index N maximizing |(Psi_N, Phi_{j,beta})| among eigenvalues near lambda_{j,beta}.

    Returns (N, Lambda_N, overlap) or None when no eigenvalue lies in the window.
    """
    lam = ctx.lam(state)
    if window is None:
        window = 0.5 * ctx.params.rho ** ctx.params.alpha1
    ov = resonance_b(spec, ctx, state)
    cand = np.flatnonzero(np.abs(spec.eigenvalues - lam) < window)
    if cand.size == 0:
        return None
    N = int(cand[np.argmax(np.abs(ov.values[cand]))])
    return N, float(spec.eigenvalues[N]), complex(ov.values[N])
