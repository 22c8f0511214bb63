"""One-dimensional quasi-periodic operator -|delta|^2 y'' + Q y with y(z + 2pi) = exp(2 pi i v) y(z)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment


def q_support(Q: dict) -> int:
    return max((abs(n) for n in Q), default=0)


def q_l1(Q: dict) -> float:
    return float(sum(abs(v) for v in Q.values()))


def hill_matrix(Q: dict, v: float, delta_norm: float, modes: np.ndarray) -> np.ndarray:
    """Entry (m, m') = |delta|^2 (m+v)^2 on the diagonal plus Q_{m-m'}."""
    n = len(modes)
    complex_q = any(complex(c).imag != 0 for c in Q.values())
    h = np.zeros((n, n), dtype=complex if complex_q else float)
    h[np.diag_indices(n)] = delta_norm**2 * (modes + v) ** 2
    for k, c in Q.items():
        if k == 0:
            continue
        val = c if complex_q else complex(c).real
        idx = np.arange(max(0, k), min(n, n + k))
        h[idx, idx - k] = val
    return h


@dataclass(frozen=True)
class HillEigenpair:
    j: int
    v: float
    mu: float
    modes: np.ndarray
    coeffs: np.ndarray
    flagged: bool = False

    @property
    def phi_coeffs(self) -> dict:
        return {int(m): complex(c) for m, c in zip(self.modes, self.coeffs) if c != 0}

    def coefficient(self, m: int) -> complex:
        i = m - int(self.modes[0])
        return complex(self.coeffs[i]) if 0 <= i < len(self.coeffs) else 0j


@dataclass(eq=False)
class HillSpectrum:
    """All eigenpairs of a truncated Hill matrix, labelled by dominant Fourier mode.

    Labels come from a maximum-weight matching between eigenvectors and modes,
    which agrees with "the mode carrying most of the mass" whenever that mass
    exceeds one half; pairs below that threshold are flagged.
    """

    Q: dict
    v: float
    delta_norm: float
    modes: np.ndarray
    mu: np.ndarray
    vectors: np.ndarray
    labels: np.ndarray
    mass: np.ndarray

    @property
    def n_modes(self) -> int:
        return int(self.modes[-1])

    @property
    def trusted_radius(self) -> int:
        return self.n_modes - q_support(self.Q) - 8

    @cached_property
    def _by_label(self) -> dict:
        return {int(j): i for i, j in enumerate(self.labels)}

    def pair(self, j: int) -> HillEigenpair:
        if abs(j) > self.trusted_radius:
            raise ValueError(f"mode {j} outside trusted range {self.trusted_radius}; increase n_modes")
        i = self._by_label[j]
        return HillEigenpair(j, self.v, float(self.mu[i]), self.modes, self.vectors[:, i],
                             bool(self.mass[i] < 0.5))

    def mu_of(self, j: int) -> float:
        return float(self.mu[self._by_label[j]])

    def coeff_matrix(self, js) -> np.ndarray:
        """Columns of eigenvector coefficients for the labels ``js``."""
        return self.vectors[:, [self._by_label[int(j)] for j in js]]

    def nondecreasing(self) -> np.ndarray:
        return np.sort(self.mu)

    def pairs(self) -> list[HillEigenpair]:
        r = self.trusted_radius
        return [self.pair(int(j)) for j in sorted(self.labels) if abs(j) <= r]


def solve_Tv(Q: dict, v: float, delta_norm: float, n_modes: int) -> HillSpectrum:
    """Diagonalize on modes -n_modes..n_modes."""
    if n_modes < 8 + q_support(Q):
        raise ValueError("n_modes must be at least 8 + support radius of Q")
    modes = np.arange(-n_modes, n_modes + 1)
    h = hill_matrix(Q, v, delta_norm, modes)
    mu, vec = scipy.linalg.eigh(h)
    weight = np.abs(vec) ** 2
    rows, cols = linear_sum_assignment(-weight)
    labels = np.empty(len(mu), dtype=np.int64)
    labels[cols] = modes[rows]
    mass = weight[rows, cols][np.argsort(cols)]
    # fix the gauge: largest coefficient real and positive
    top = np.argmax(np.abs(vec), axis=0)
    phase = vec[top, np.arange(vec.shape[1])]
    vec = vec * (np.abs(phase) / phase)
    return HillSpectrum(dict(Q), float(v), float(delta_norm), modes, mu, vec, labels, mass)


def default_n_modes(Q: dict, max_j: int) -> int:
    return 4 * max_j + q_support(Q) + 16


class HillCache:
    """Memoized Hill spectra keyed by (v rounded to 1e-12, potential fingerprint)."""

    def __init__(self, Q: dict, delta_norm: float, n_modes: int):
        self.Q = dict(Q)
        self.delta_norm = delta_norm
        self.n_modes = n_modes
        self._key = tuple(sorted((k, complex(c)) for k, c in self.Q.items()))
        self._store: dict = {}

    def get(self, v: float) -> HillSpectrum:
        key = (round(v % 1.0, 12) % 1.0, self._key, self.delta_norm, self.n_modes)
        if key not in self._store:
            self._store[key] = solve_Tv(self.Q, v, self.delta_norm, self.n_modes)
        return self._store[key]


def in_W_rho(v: float, rho: float, spectrum: HillSpectrum, window: int) -> bool:
    """True when all eigenvalues labelled |j| <= window are pairwise more than 2/ln(rho) apart."""
    if window > spectrum.trusted_radius:
        raise ValueError(f"gap window {window} exceeds trusted range {spectrum.trusted_radius}; "
                         "increase n_modes")
    if abs(spectrum.v - v % 1.0) > 1e-12 and abs(spectrum.v - v) > 1e-12:
        raise ValueError("spectrum computed at a different v")
    sel = np.abs(spectrum.labels) <= window
    mu = np.sort(spectrum.mu[sel])
    return bool(np.all(np.diff(mu) > 2.0 / math.log(rho)))


def refined_tail(pair: HillEigenpair, Q: dict, delta_norm: float, sweeps: int = 6) -> np.ndarray:
    """Recompute tiny coefficients from the eigen-equation, keeping relative accuracy.

    Far from the dominant modes eigenvector entries are lost in roundoff; each
    entry is recomputed as -sum_k Q_k c_{m-k} / (|delta|^2 (m+v)^2 - mu), sweeping outward.
    """
    c = pair.coeffs.astype(complex).copy()
    modes = pair.modes
    big = np.abs(c) > 1e-6
    lo, hi = np.flatnonzero(big)[[0, -1]]
    denom = delta_norm**2 * (modes + pair.v) ** 2 - pair.mu
    order = list(range(hi + 1, len(c))) + list(range(lo - 1, -1, -1))
    for _ in range(sweeps):
        for i in order:
            acc = 0j
            for k, qk in Q.items():
                if k != 0 and 0 <= i - k < len(c):
                    acc += qk * c[i - k]
            c[i] = -acc / denom[i]
    return c


def fourier_decay_check(pair: HillEigenpair, Q: dict, delta_norm: float, m_range=(10, 30)):
    """Log-log slope of |coefficient| against |m delta| over m_range (both signs); returns (slope, rms residual)."""
    c = refined_tail(pair, Q, delta_norm) if Q else pair.coeffs.astype(complex)
    m = pair.modes
    sel = (np.abs(m) >= m_range[0]) & (np.abs(m) <= m_range[1])
    if sel.sum() < 4 or m_range[1] > pair.modes[-1] - q_support(Q):
        raise ValueError("insufficient modes for the decay fit")
    mag = np.abs(c[sel])
    if np.all(mag == 0):
        return -math.inf, 0.0
    ok = mag > 0
    xs = np.log(np.abs(m[sel][ok]) * delta_norm)
    ys = np.log(mag[ok])
    worst = None
    for sign in (1, -1):
        s = np.sign(m[sel][ok]) == sign
        if s.sum() < 3:
            continue
        A = np.vstack([xs[s], np.ones(s.sum())]).T
        coef, *_ = np.linalg.lstsq(A, ys[s], rcond=None)
        resid = float(np.sqrt(np.mean((A @ coef - ys[s]) ** 2)))
        if worst is None or coef[0] > worst[0]:
            worst = (float(coef[0]), resid)
    return worst
