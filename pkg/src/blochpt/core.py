"""Exponent bookkeeping and numeric configuration shared by every module."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction


def standard_exponent_base(d: int) -> int:
    return 3**d + d + 2


def delta_exponent_base(d: int) -> int:
    """Exponent base used by the single-resonance simple-set machinery."""
    return 4 * 3**d * (d + 1)


def minimal_smoothness(d: int) -> Fraction:
    """Smallest smoothness order for which the full asymptotic series is claimed."""
    q = standard_exponent_base(d)
    return Fraction((3 * d - 1) * q, 2) + Fraction(d * 3**d, 4) + d + 6


@dataclass(frozen=True)
class PaperParams:
    """Dimension, smoothness, spectral scale and the derived exponents.

    ``q_exp`` defaults to ``3**d + d + 2``; the single-resonance preset
    (:meth:`delta_preset`) swaps in ``4 * 3**d * (d + 1)``.
    """

    d: int
    s: int
    rho: float
    q_exp: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.q_exp == 0:
            object.__setattr__(self, "q_exp", standard_exponent_base(self.d))

    @classmethod
    def standard(cls, d: int, rho: float, s: int | None = None) -> "PaperParams":
        if s is None:
            s = math.ceil(minimal_smoothness(d))
        return cls(d=d, s=s, rho=rho)

    @classmethod
    def delta_preset(cls, d: int, rho: float, s: int | None = None) -> "PaperParams":
        if s is None:
            s = 6 * 3**d * (d + 1) ** 2 + d
        return cls(d=d, s=s, rho=rho, q_exp=delta_exponent_base(d))

    def at(self, rho: float) -> "PaperParams":
        return replace(self, rho=rho)

    @property
    def p(self) -> int:
        return self.s - self.d

    @property
    def alpha_exact(self) -> Fraction:
        return Fraction(1, self.q_exp)

    @property
    def alpha(self) -> float:
        return 1.0 / self.q_exp

    def alpha_k_exact(self, k: int) -> Fraction:
        return 3**k * self.alpha_exact

    def alpha_k(self, k: int) -> float:
        return float(self.alpha_k_exact(k))

    @property
    def alpha1(self) -> float:
        return self.alpha_k(1)

    @property
    def alpha2(self) -> float:
        return self.alpha_k(2)

    @property
    def k1(self) -> int:
        return math.floor(Fraction(self.d) / (3 * self.alpha_exact)) + 2

    @property
    def k2(self) -> int:
        return math.floor(Fraction(self.d) / (9 * self.alpha_exact)) + 2

    @property
    def p1(self) -> int:
        return self.p // 3 + 1

    @property
    def eps1(self) -> float:
        return self.rho ** (-self.d - 2 * self.alpha)

    def rho_pow(self, exponent: float) -> float:
        return self.rho**exponent


def validate_params(params: PaperParams) -> list[str]:
    """Check the seven exponent inequalities in exact rational arithmetic.

    Returns a list of human-readable descriptions of the violated ones.
    """
    d = params.d
    a = params.alpha_exact
    ak = params.alpha_k_exact
    q = params.q_exp
    p = params.p
    bad = []
    if not ak(1) + d * a < 1 - a:
        bad.append("alpha_1 + d*alpha < 1 - alpha")
    if not d * a < ak(d) / 2:
        bad.append("d*alpha < alpha_d / 2")
    if not params.k1 <= Fraction(p) / 3 - Fraction(q * (d - 1), 6):
        bad.append("k1 <= (p - q(d-1)/2) / 3")
    if not params.p1 * ak(1) >= p * a:
        bad.append("p1*alpha_1 >= p*alpha")
    if not 3 * params.k1 * a > d + 2 * a:
        bad.append("3*k1*alpha > d + 2*alpha")
    for k in range(1, d + 1):
        if not ak(k) + (k - 1) * a < 1:
            bad.append(f"alpha_{k} + {k - 1}*alpha < 1")
        if not ak(k + 1) > 2 * (ak(k) + (k - 1) * a):
            bad.append(f"alpha_{k + 1} > 2*(alpha_{k} + {k - 1}*alpha)")
    return bad


def _default_constants() -> tuple[float, ...]:
    return (1.0,) * 23


@dataclass(frozen=True)
class NumericConfig:
    """Tunable constants and desk-scale knobs.

    ``constants`` holds c_1..c_23 (all 1.0 unless configured).  The
    multipliers replace asymptotic radii that are far too large at
    desk-scale rho:

    * ``support_multiplier``: truncation ball radius for q is this times rho^alpha.
    * ``resonance_multiplier``: radius factor of the direction ball used for slabs.
    * ``bk_a_multiplier``: radius factor of the a-ball in the resonance index set.
    * ``f_order`` / ``e_order``: series orders used inside the simple-set tests.
    * ``e_chain_depth``: deepest chain in the single-resonance sums.
    """

    constants: tuple[float, ...] = field(default_factory=_default_constants)
    oracle_cutoff_margin: float = 8.0
    eig_tolerance: float = 1e-8
    mc_samples: int = 10_000
    support_multiplier: float = 1.0
    resonance_multiplier: float = 1.0
    bk_a_multiplier: float = 3.0
    f_order: int = 3
    e_order: int = 2
    e_chain_depth: int = 3
    bk_cap: int = 4000
    hill_modes: int | None = None
    coupling_prune: float = 1e-14

    def __post_init__(self):
        if len(self.constants) != 23:
            raise ValueError("expected 23 constants")
        positive = [*self.constants, self.oracle_cutoff_margin, self.eig_tolerance,
                    self.mc_samples, self.support_multiplier, self.resonance_multiplier,
                    self.bk_a_multiplier, self.f_order, self.e_order, self.e_chain_depth,
                    self.bk_cap]
        if any(v <= 0 for v in positive):
            raise ValueError("numeric configuration values must be positive")

    def c(self, i: int) -> float:
        return self.constants[i - 1]

    def with_(self, **kw) -> "NumericConfig":
        return replace(self, **kw)


DEFAULT_CONFIG = NumericConfig()
