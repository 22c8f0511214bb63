"""Finite Fourier representation of a periodic potential."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .lattice import DeltaGeometry, Lattice


@dataclass(frozen=True, eq=False)
class FourierPotential:
    """Coefficients q_g on dual-lattice vectors g, keyed by integer dual coordinates.

    A zero-mean, real potential is enforced: no g = 0 entry and q_{-g} = conj(q_g).
    """

    lattice: Lattice
    coords: np.ndarray
    values: np.ndarray
    declared_s: int | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, self.lattice.d)
        values = np.asarray(self.values, dtype=complex).reshape(-1)
        if len(coords) != len(values):
            raise ValueError("coords and values differ in length")
        keep = values != 0
        coords, values = coords[keep], values[keep]
        if np.any(np.all(coords == 0, axis=1)):
            raise ValueError("potential must have zero mean (no coefficient at the origin)")
        if len({tuple(c) for c in coords.tolist()}) != len(coords):
            raise ValueError("duplicate Fourier coordinates")
        order = np.lexsort(coords.T[::-1]) if len(coords) else np.arange(0)
        object.__setattr__(self, "coords", coords[order])
        object.__setattr__(self, "values", values[order])

    @classmethod
    def from_dict(cls, lattice: Lattice, coeffs: dict, declared_s=None, check_real=True):
        coords = np.array([list(k) for k in coeffs], dtype=np.int64).reshape(-1, lattice.d)
        q = cls(lattice, coords, np.array(list(coeffs.values()), dtype=complex), declared_s)
        if check_real:
            q.check_reality()
        return q

    @classmethod
    def zero(cls, lattice: Lattice) -> "FourierPotential":
        return cls(lattice, np.zeros((0, lattice.d), dtype=np.int64), np.zeros(0, complex))

    @classmethod
    def cosines(cls, lattice: Lattice, terms: dict) -> "FourierPotential":
        """Sum of amp * 2cos(g . x) terms, each contributing amp at g and -g."""
        coeffs = {}
        for g, amp in terms.items():
            g = tuple(int(v) for v in g)
            coeffs[g] = coeffs.get(g, 0) + amp
            ng = tuple(-v for v in g)
            coeffs[ng] = coeffs.get(ng, 0) + amp
        return cls.from_dict(lattice, coeffs)

    def check_reality(self, tol=1e-14):
        lookup = self.lookup
        for c, v in zip(self.coords.tolist(), self.values):
            partner = lookup.get(tuple(-x for x in c))
            if partner is None or abs(partner - np.conj(v)) > tol * max(1.0, abs(v)):
                raise ValueError(f"potential is not real: coefficient at {c} has no conjugate partner")

    @cached_property
    def lookup(self) -> dict:
        return {tuple(c): v for c, v in zip(self.coords.tolist(), self.values)}

    @cached_property
    def vectors(self) -> np.ndarray:
        return self.lattice.from_dual_coords(self.coords)

    @property
    def size(self) -> int:
        return len(self.values)

    def __len__(self):
        return self.size

    def coefficient(self, coords) -> complex:
        return self.lookup.get(tuple(int(v) for v in coords), 0.0)

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha1()
        h.update(self.lattice.basis.tobytes())
        h.update(self.coords.tobytes())
        h.update(self.values.tobytes())
        return h.hexdigest()

    def support_radius(self) -> float:
        if not self.size:
            return 0.0
        return float(np.max(np.linalg.norm(self.vectors, axis=1)))

    def subset(self, mask) -> "FourierPotential":
        return FourierPotential(self.lattice, self.coords[mask], self.values[mask], self.declared_s)

    def __add__(self, other: "FourierPotential") -> "FourierPotential":
        coeffs = dict(self.lookup)
        for k, v in other.lookup.items():
            coeffs[k] = coeffs.get(k, 0) + v
        return FourierPotential.from_dict(self.lattice, coeffs, self.declared_s, check_real=False)

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.exp(1j * x @ self.vectors.T) @ self.values


def truncate(q: FourierPotential, rho: float, alpha: float, multiplier: float = 1.0):
    """Keep coefficients with |g| < multiplier * rho**alpha; return (kept, dropped l1 mass)."""
    radius = multiplier * rho**alpha
    inside = np.linalg.norm(q.vectors, axis=1) < radius if q.size else np.zeros(0, bool)
    return q.subset(inside), float(np.sum(np.abs(q.values[~inside])))


def sup_bound(q: FourierPotential) -> float:
    return float(np.sum(np.abs(q.values)))


def directional(q: FourierPotential, geom: DeltaGeometry) -> dict[int, complex]:
    """Coefficients n -> q_{n delta} of the part of q living on the line through delta."""
    out = {}
    dc = geom.delta_coords
    for c, v in zip(q.coords, q.values):
        # c is collinear with the primitive dc iff c = n * dc for an integer n
        i = int(np.argmax(np.abs(dc)))
        n = c[i] // dc[i] if c[i] % dc[i] == 0 else None
        if n is not None and np.array_equal(n * dc, c):
            out[int(n)] = complex(v)
    return dict(sorted(out.items()))


def embed_directional(Q: dict[int, complex], geom: DeltaGeometry) -> FourierPotential:
    coords = np.array([n * geom.delta_coords for n in Q], dtype=np.int64).reshape(-1, geom.lattice.d)
    return FourierPotential(geom.lattice, coords, np.array(list(Q.values()), dtype=complex))


def split_directional(q: FourierPotential, geom: DeltaGeometry):
    """(q restricted to the delta line, the remainder)."""
    onaxis = np.zeros(q.size, bool)
    Q = directional(q, geom)
    keys = {tuple(n * geom.delta_coords) for n in Q}
    for i, c in enumerate(q.coords.tolist()):
        onaxis[i] = tuple(c) in keys
    return q.subset(onaxis), q.subset(~onaxis)


def save_potential(q: FourierPotential, path):
    lines = [f"# dim {q.lattice.d}: integer dual coordinates, real part, imaginary part"]
    for c, v in zip(q.coords.tolist(), q.values):
        lines.append(" ".join(str(x) for x in c) + f" {float(v.real)!r} {float(v.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_potential(path, lattice: Lattice, check_real=True, declared_s=None) -> FourierPotential:
    coords, vals = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != lattice.d + 2:
            raise ValueError(f"{path}:{lineno}: expected {lattice.d + 2} fields, got {len(parts)}")
        coords.append([int(x) for x in parts[: lattice.d]])
        vals.append(complex(float(parts[-2]), float(parts[-1])))
    q = FourierPotential(lattice, np.array(coords, dtype=np.int64).reshape(-1, lattice.d),
                         np.array(vals, dtype=complex), declared_s)
    if check_real:
        q.check_reality()
    return q
