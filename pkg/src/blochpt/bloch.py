"""Eigenfunction asymptotics: Fourier coefficients predicted from chain sums, compared with the oracle."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_CONFIG, NumericConfig, PaperParams
from .nonres import DenominatorFloorError, F_series, working_potential
from .oracle import Match, OracleSpectrum, resonance_b
from .potential import FourierPotential

log = logging.getLogger(__name__)


def phi_1(center, q: FourierPotential, params: PaperParams, cfg: NumericConfig = DEFAULT_CONFIG) -> dict:
    """First correction: coefficient q_g / (|x|^2 - |x+g|^2) at offset g, keyed by dual coordinates."""
    x = np.asarray(center, dtype=float)
    qt = working_potential(q, params, cfg)
    floor = 0.5 * params.rho**params.alpha1
    out = {}
    for c, g, v in zip(qt.coords.tolist(), qt.vectors, qt.values):
        den = x @ x - np.sum((x + g) ** 2)
        if abs(den) <= floor:
            raise DenominatorFloorError(f"denominator {den:.3e} at offset {c}: centre is resonant")
        out[tuple(c)] = complex(v / den)
    return out


def admissible_order_cap(params: PaperParams) -> int:
    d, q, p = params.d, params.q_exp, params.p
    return int(np.floor((2 * p - (3 * d - 1) * q - d * 3**d / 2 - 6) / 6))


def _walk_tables(x, P, qt: FourierPotential, n: int, floor: float):
    """W[k][p] = sum over k-step walks 0 -> p avoiding 0 of prod q_step / prod (P - |x + pos|^2)."""
    lat = qt.lattice
    steps = [(tuple(c), v) for c, v in zip(qt.coords.tolist(), qt.values)]
    tables = []
    prev = {(0,) * lat.d: 1.0 + 0j}
    for k in range(1, n):
        cur: dict = {}
        for pos, w in prev.items():
            if k > 1 and not any(pos):
                continue
            for s, v in steps:
                p = tuple(a + b for a, b in zip(pos, s))
                if not any(p):
                    continue
                cur[p] = cur.get(p, 0j) + w * v
        for p in list(cur):
            vec = lat.from_dual_coords(np.array(p))
            den = P - np.sum((x + vec) ** 2)
            if abs(den) <= floor:
                raise DenominatorFloorError(f"denominator {den:.3e} at offset {list(p)}")
            cur[p] /= den
        tables.append(cur)
        prev = cur
    return tables


def A_k_coeffs(center, gamma_prime, k: int, q: FourierPotential, params: PaperParams,
               cfg: NumericConfig = DEFAULT_CONFIG, P: float | None = None) -> complex:
    """A_k at one offset (dual coordinates); P defaults to |x|^2 + F from the configured series order."""
    x = np.asarray(center, dtype=float)
    qt = working_potential(q, params, cfg)
    if P is None:
        P = _P_value(x, qt, params, cfg)
    tables = _walk_tables(x, P, qt, k + 1, 0.5 * params.rho**params.alpha1)
    return complex(tables[k - 1].get(tuple(int(v) for v in gamma_prime), 0j))


def _P_value(x, qt, params, cfg) -> float:
    order = min(params.p // 3, cfg.f_order - 1) + 1
    return F_series(x, order, qt, params, cfg, truncated=True).predicted


@dataclass
class BlochExpansion:
    center: np.ndarray
    order: int
    coefficients: dict = field(default_factory=dict)
    b_center: float = 1.0
    requested_order: int = 0

    def norm_squared(self) -> float:
        return self.b_center**2 + sum(abs(c) ** 2 for c in self.coefficients.values())


def predict_expansion(center, order: int, q: FourierPotential, params: PaperParams,
                      cfg: NumericConfig = DEFAULT_CONFIG) -> BlochExpansion:
    """Predicted coefficients b(N, gamma + g) / phase for offsets g, using A_1..A_{n-1}."""
    x = np.asarray(center, dtype=float)
    cap = admissible_order_cap(params)
    n = min(order, cap)
    log.info("expansion order requested %d, admissible cap %d, used %d", order, cap, n)
    qt = working_potential(q, params, cfg)
    if n <= 1 or qt.size == 0:
        return BlochExpansion(x, max(n, 1), {}, 1.0, order)
    P = _P_value(x, qt, params, cfg)
    tables = _walk_tables(x, P, qt, n, 0.5 * params.rho**params.alpha1)
    radius = (n - 1) * cfg.support_multiplier * params.rho**params.alpha
    summed: dict = {}
    for tab in tables:
        for p, a in tab.items():
            if np.linalg.norm(qt.lattice.from_dual_coords(np.array(p))) >= radius:
                continue
            summed[p] = summed.get(p, 0j) + a
    # normalizing the summed coefficients keeps the predicted vector at unit norm;
    # summing |A_k|^2 order by order drops O(rho^(-4 alpha1)) cross terms
    b0 = (1.0 + sum(abs(a) ** 2 for a in summed.values())) ** -0.5
    return BlochExpansion(x, n, {p: a * b0 for p, a in summed.items()}, b0, order)


def aligned(vector: np.ndarray, row: int) -> np.ndarray:
    """Multiply by a unit phase making entry ``row`` real and nonnegative."""
    z = vector[row]
    if z == 0:
        return vector.astype(complex)
    # the angle form stays finite when |z| is subnormal
    return vector * np.exp(-1j * np.angle(z))


def eigenfunction_error(spec: OracleSpectrum, expansion: BlochExpansion, match: Match | None,
                        gamma_coords) -> tuple[float, float]:
    """(l2 distance between aligned oracle and predicted coefficients, oracle mass off the centre)."""
    if match is None:
        raise ValueError("no oracle eigenvalue matched this centre")
    gamma_coords = np.asarray(gamma_coords, dtype=np.int64)
    row = spec.position(gamma_coords)
    vec = aligned(np.asarray(match.vector, dtype=complex), row)
    pred = np.zeros_like(vec)
    pred[row] = expansion.b_center
    outside = 0.0
    for off, c in expansion.coefficients.items():
        i = spec.position(gamma_coords + np.asarray(off))
        if i < 0:
            outside += abs(c) ** 2
        else:
            pred[i] += c
    err = float(np.sqrt(np.sum(np.abs(vec - pred) ** 2) + outside))
    tail = float(np.sum(np.abs(vec) ** 2) - abs(vec[row]) ** 2)
    return err, tail


def count_dominant(spec: OracleSpectrum, gamma_coords) -> int:
    """Number of computed eigenvectors with |b(N, gamma)|^2 > 1/2."""
    row = spec.position(gamma_coords)
    return int(np.count_nonzero(np.abs(spec.b_table[row]) ** 2 > 0.5))


def resonance_eigenfunction_error(spec: OracleSpectrum, ctx, state, N: int, verdict=None) -> float:
    """Distance between the N-th oracle eigenvector and the phase-aligned Hill product function."""
    if verdict is not None and not verdict.member:
        raise ValueError(f"point is not in the simple set: {verdict.failed_condition}")
    ov = resonance_b(spec, ctx, state)
    inside = ov.rows >= 0
    phi = np.zeros(len(spec.coords), dtype=complex)
    phi[ov.rows[inside]] = ov.coeffs[inside]
    missing = float(np.sum(np.abs(ov.coeffs[~inside]) ** 2))
    z = ov.values[N]
    psi = spec.b_table[:, N] * (np.exp(-1j * np.angle(z)) if z != 0 else 1.0)
    return float(np.sqrt(np.sum(np.abs(psi - phi) ** 2) + missing))
