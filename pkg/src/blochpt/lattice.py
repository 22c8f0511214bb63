"""Period lattices, their duals, and the geometry attached to a lattice direction."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi
_INT_TOL = 1e-8


def build_dual(basis) -> np.ndarray:
    """Rows g_i of the dual basis with (g_i, w_j) = 2*pi*delta_ij."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.shape[0] != basis.shape[1]:
        raise ValueError(f"basis must be square, got shape {basis.shape}")
    # Rank test first so the error can name the offending row.
    for i in range(basis.shape[0]):
        if np.linalg.matrix_rank(basis[: i + 1]) < i + 1:
            raise ValueError(f"basis row {i} is linearly dependent on the previous rows")
    return TWO_PI * np.linalg.inv(basis).T


def _frac(x, tol=1e-12):
    x = np.asarray(x, dtype=float)
    fl = np.floor(x + tol)
    # values within tol below an integer snap to it
    return np.maximum(x - fl, 0.0), fl


@dataclass(frozen=True, eq=False)
class Lattice:
    """Period lattice with rows of ``basis`` as generators.

    The plane waves exp(i(g+t, x)) are orthonormal for the normalized measure
    on a period cell, so ``cell_volume`` is reported but never rescaled.
    """

    basis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "basis", np.atleast_2d(np.asarray(self.basis, dtype=float)))
        build_dual(self.basis)

    @classmethod
    def from_dual(cls, dual_basis) -> "Lattice":
        return cls(build_dual(dual_basis))

    @classmethod
    def square(cls, d: int = 2) -> "Lattice":
        """Period 2*pi in every axis, so the dual lattice is Z^d."""
        return cls(TWO_PI * np.eye(d))

    @classmethod
    def hexagonal(cls) -> "Lattice":
        """Dual lattice spanned by (1, 0) and (1/2, sqrt(3)/2)."""
        return cls.from_dual([[1.0, 0.0], [0.5, math.sqrt(3) / 2]])

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def dual(self) -> np.ndarray:
        return build_dual(self.basis)

    @cached_property
    def _dual_inv(self) -> np.ndarray:
        return np.linalg.inv(self.dual)

    @property
    def cell_volume(self) -> float:
        return abs(np.linalg.det(self.basis))

    def pairing_error(self) -> float:
        return float(np.max(np.abs(self.dual @ self.basis.T - TWO_PI * np.eye(self.d))))

    def dual_coords(self, vectors) -> np.ndarray:
        return np.asarray(vectors, dtype=float) @ self._dual_inv

    def dual_int_coords(self, vectors, tol=_INT_TOL) -> np.ndarray:
        """Integer dual coordinates; raises if the vectors are not in the dual lattice."""
        c = self.dual_coords(vectors)
        n = np.rint(c)
        if np.any(np.abs(c - n) > tol):
            raise ValueError("vector is not an element of the dual lattice")
        return n.astype(np.int64)

    def from_dual_coords(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=float) @ self.dual

    def split(self, x):
        """Write x = g + t with g in the dual lattice and t in the half-open dual cell."""
        c = self.dual_coords(x)
        frac, fl = _frac(c)
        return fl.astype(np.int64), self.from_dual_coords(frac)

    def lattice_points(self, r_out: float, shift=None, r_in: float = 0.0, strict=True):
        """Integer coordinates n with r_in <= |n.G + shift| < r_out (or <= if not strict)."""
        d = self.d
        shift = np.zeros(d) if shift is None else np.asarray(shift, dtype=float)
        centre = -shift @ self._dual_inv
        span = r_out * np.linalg.norm(self._dual_inv, axis=0)
        lo = np.floor(centre - span).astype(int)
        hi = np.ceil(centre + span).astype(int)
        axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        r = np.linalg.norm(grid @ self.dual + shift, axis=1)
        keep = (r < r_out) if strict else (r <= r_out)
        keep &= r >= r_in
        return grid[keep]


def enumerate_ball(lattice: Lattice, radius: float) -> np.ndarray:
    """Dual-lattice vectors with 0 < |g| < radius, sorted by length then coordinates."""
    if radius <= 0:
        return np.zeros((0, lattice.d))
    n = lattice.lattice_points(radius)
    n = n[np.any(n != 0, axis=1)]
    vecs = lattice.from_dual_coords(n)
    order = np.lexsort((*n.T[::-1], np.round(np.linalg.norm(vecs, axis=1), 12)))
    return vecs[order]


def _unimodular_completion(n: np.ndarray) -> np.ndarray:
    """Integer matrix M with det +-1 and n @ M = (1, 0, ..., 0); needs gcd(n) = 1."""
    d = len(n)
    r = [int(v) for v in n]
    m = np.eye(d, dtype=np.int64)
    while sum(1 for v in r if v != 0) > 1:
        i = min((k for k in range(d) if r[k] != 0), key=lambda k: abs(r[k]))
        for j in range(d):
            if j != i and r[j] != 0:
                f = r[j] // r[i]
                r[j] -= f * r[i]
                m[:, j] -= f * m[:, i]
    i0 = next(k for k in range(d) if r[k] != 0)
    if r[i0] < 0:
        m[:, i0] *= -1
        r[i0] *= -1
    if r[i0] != 1:
        raise ValueError("coordinates are not coprime")
    m[:, [0, i0]] = m[:, [i0, 0]]
    return m


@dataclass(frozen=True, eq=False)
class DeltaGeometry:
    """Sublattice data attached to a maximal dual vector ``delta``."""

    lattice: Lattice
    delta: np.ndarray
    delta_coords: np.ndarray
    delta_star: np.ndarray
    omega_delta: np.ndarray
    gamma_delta: np.ndarray

    @property
    def delta_norm(self) -> float:
        return float(np.linalg.norm(self.delta))

    @cached_property
    def _gd_pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.gamma_delta)

    @cached_property
    def d_delta(self) -> float:
        """Diameter of the half-open cell spanned by the transverse dual basis."""
        k = self.gamma_delta.shape[0]
        best = 0.0
        for s in itertools.product((-1, 0, 1), repeat=k):
            best = max(best, float(np.linalg.norm(np.asarray(s, float) @ self.gamma_delta)))
        return best

    def axial(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.delta / self.delta_norm**2

    def transverse(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x - np.multiply.outer(self.axial(x), self.delta)

    def transverse_coords(self, x) -> np.ndarray:
        return self.transverse(x) @ self._gd_pinv


def sublattice_geometry(lattice: Lattice, delta, n_checks: int = 3) -> DeltaGeometry:
    delta = np.asarray(delta, dtype=float)
    coords = lattice.dual_int_coords(delta)
    g = math.gcd(*[int(abs(c)) for c in coords])
    if g != 1:
        pair = {f"w_{i + 1}": f"2pi*{int(c)}" for i, c in enumerate(coords)}
        raise ValueError(
            f"delta={delta.tolist()} is not maximal: pairings with the period generators are "
            f"{pair}, all multiples of 2pi*{g}, so no period w gives (delta, w) = 2pi")
    m = _unimodular_completion(coords)
    w = lattice.basis
    delta_star = m[:, 0] @ w
    omega_delta = (m[:, 1:].T @ w) if lattice.d > 1 else np.zeros((0, lattice.d))
    if lattice.d > 1:
        gram = omega_delta @ omega_delta.T
        gamma_delta = TWO_PI * np.linalg.solve(gram, omega_delta)
    else:
        gamma_delta = np.zeros((0, 1))
    geom = DeltaGeometry(lattice, delta, coords, delta_star, omega_delta, gamma_delta)
    _verify_sublattice(geom, n_checks)
    return geom


def _verify_sublattice(geom: DeltaGeometry, n_checks: int):
    """Every period splits as h + l*delta_star, every dual vector as b + c*delta."""
    lat = geom.lattice
    d = lat.d
    combos = np.array(list(itertools.product(range(-n_checks, n_checks + 1), repeat=d)))
    if abs(geom.delta_star @ geom.delta - TWO_PI) > 1e-10:
        raise ArithmeticError("delta_star pairing failed")
    if geom.gamma_delta.size and np.max(np.abs(geom.gamma_delta @ geom.delta)) > 1e-10:
        raise ArithmeticError("transverse dual basis is not orthogonal to delta")
    omegas = combos @ lat.basis
    ell = omegas @ geom.delta / TWO_PI
    if np.any(np.abs(ell - np.rint(ell)) > _INT_TOL):
        raise ArithmeticError("period pairing with delta not in 2pi Z")
    if d > 1:
        h = omegas - np.outer(np.rint(ell), geom.delta_star)
        hc = h @ np.linalg.pinv(geom.omega_delta)
        if np.any(np.abs(hc - np.rint(hc)) > _INT_TOL) or np.max(np.abs(np.rint(hc) @ geom.omega_delta - h)) > 1e-8:
            raise ArithmeticError("period decomposition failed")
        gammas = combos @ lat.dual
        bc = geom.transverse_coords(gammas)
        if np.any(np.abs(bc - np.rint(bc)) > _INT_TOL):
            raise ArithmeticError("dual decomposition failed: transverse part not in the transverse dual lattice")
        n = gammas @ geom.delta_star / TWO_PI
        if np.any(np.abs(n - np.rint(n)) > _INT_TOL):
            raise ArithmeticError("dual decomposition failed: axial index not integral")


def decompose_t(t, geom: DeltaGeometry):
    """Split t into (a, tau, axial) with t = a + tau + axial*delta.

    ``a`` lies in the transverse dual lattice and ``tau`` in its half-open cell.
    """
    t = np.asarray(t, dtype=float)
    axial = float(geom.axial(t))
    if geom.gamma_delta.size == 0:
        return np.zeros_like(t), np.zeros_like(t), axial
    c = geom.transverse_coords(t)
    frac, fl = _frac(c)
    return fl @ geom.gamma_delta, frac @ geom.gamma_delta, axial


@dataclass(frozen=True)
class DeltaDecomposition:
    beta: np.ndarray
    tau: np.ndarray
    j: int
    v: float

    def reconstruct(self, geom: DeltaGeometry) -> np.ndarray:
        return self.beta + self.tau + (self.j + self.v) * geom.delta


def v_of_beta(beta, geom: DeltaGeometry, t) -> float:
    """Quasi-periodicity phase of the one-dimensional problem attached to beta."""
    a, _, axial = decompose_t(t, geom)
    val = axial - (np.asarray(beta) - a) @ geom.delta_star / TWO_PI
    v, _ = _frac(val)
    return float(v)


def gamma_delta_decompose(x, geom: DeltaGeometry, t) -> DeltaDecomposition:
    """Write x = beta + tau + (j + v) delta, where x - t must be a dual-lattice vector."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    try:
        geom.lattice.dual_int_coords(x - t)
    except ValueError:
        raise ValueError("x is not of the form gamma + t") from None
    _, tau, _ = decompose_t(t, geom)
    beta = geom.transverse(x) - tau
    if geom.gamma_delta.size:
        bc = beta @ geom._gd_pinv
        beta = np.rint(bc) @ geom.gamma_delta
    v = v_of_beta(beta, geom, t)
    j = int(np.rint(geom.axial(x) - v))
    return DeltaDecomposition(beta=beta, tau=tau, j=j, v=v)


def gamma_from_delta(beta, m, geom: DeltaGeometry, t) -> np.ndarray:
    """Integer dual coordinates of the vector g with g + t = beta + tau + (m + v) delta."""
    _, tau, _ = decompose_t(t, geom)
    v = v_of_beta(beta, geom, t)
    m = np.atleast_1d(np.asarray(m))
    pts = np.asarray(beta) + tau + np.multiply.outer(m + v, geom.delta) - t
    return geom.lattice.dual_int_coords(pts)
