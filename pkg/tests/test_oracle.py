import itertools

import numpy as np
import pytest
import scipy.special

from conftest import params
from blochpt.lattice import Lattice
from blochpt.oracle import (assemble_and_solve, binding_residual, count_in_window, match_eigenvalue,
                            max_interior_binding_residual, shell_solve, truncation_shift)
from blochpt.potential import FourierPotential


def test_free_spectrum_brute_force(q_zero):
    t = np.array([0.2, 0.3])
    spec = assemble_and_solve(q_zero, t, 6.0)
    brute = sorted(float((m + t[0]) ** 2 + (n + t[1]) ** 2) for m, n in itertools.product(range(-8, 9), repeat=2)
                   if (m + t[0]) ** 2 + (n + t[1]) ** 2 <= 36.0)
    assert np.allclose(spec.eigenvalues, brute)


@pytest.mark.parametrize("t, kind", [(0.0, "periodic"), (0.5, "antiperiodic")])
def test_one_dimensional_cosine_against_mathieu(t, kind):
    # -y'' + 2cos(x) y = lam y with x = 2z becomes Mathieu's equation with a = 4 lam, q = 4
    lat = Lattice.square(1)
    q = FourierPotential.cosines(lat, {(1,): 1.0})
    spec = assemble_and_solve(q, np.array([t]), 40.0)
    orders = range(0, 12, 2) if kind == "periodic" else range(1, 12, 2)
    ref = []
    for m in orders:
        ref.append(scipy.special.mathieu_a(m, 4.0))
        if m > 0:
            ref.append(scipy.special.mathieu_b(m, 4.0))
    ref = np.sort(ref) / 4
    assert np.allclose(spec.eigenvalues[: len(ref) - 1], ref[:-1], atol=1e-9)


def test_eigenvectors_orthonormal_and_complete(q_sep):
    spec = assemble_and_solve(q_sep, np.array([0.31, 0.77]), 8.0)
    B = spec.b_table
    assert np.allclose(B.conj().T @ B, np.eye(B.shape[1]), atol=1e-12)
    assert np.allclose(np.sum(np.abs(B) ** 2, axis=1), 1.0, atol=1e-12)


def test_binding_identity_interior(q_sep):
    spec = assemble_and_solve(q_sep, np.array([0.31, 0.77]), 8.0)
    assert max_interior_binding_residual(spec) < 1e-10
    i = int(np.flatnonzero(spec.interior)[0])
    r, interior = binding_residual(spec, 3, spec.coords[i])
    assert interior and r < 1e-10


def test_shell_solve_matches_full_basis(q_sep):
    t = np.array([0.13, 0.41])
    rho = 12.0
    shell = shell_solve(q_sep, t, rho, 8.0, 3.0)
    full = assemble_and_solve(q_sep, t, rho + 8.0)
    ref = full.eigenvalues[np.abs(full.eigenvalues - rho**2) <= 3.0]
    assert np.allclose(shell.eigenvalues, ref, atol=1e-9)


def test_widening_leaves_window_unchanged(q_sep):
    t = np.array([0.13, 0.41])
    rho = 15.0
    assert truncation_shift(q_sep, t, rho + 8.0, (rho**2 - 3, rho**2 + 3), rho - 8.0) < 1e-10


def test_count_in_window_free(q_zero):
    t = np.array([0.13, 0.41])
    n = count_in_window(q_zero, t, 100.0, 5.0)
    brute = sum(1 for m, k in itertools.product(range(-20, 21), repeat=2)
                if abs((m + t[0]) ** 2 + (k + t[1]) ** 2 - 100.0) <= 5.0)
    assert n == brute


def test_match_free_plane_wave(q_zero):
    t = np.array([0.13, 0.41])
    spec = assemble_and_solve(q_zero, t, 14.0)
    g = np.array([7, 9])
    m = match_eigenvalue(spec, g, params(11.4))
    assert m is not None
    assert m.value == pytest.approx((7.13**2 + 9.41**2))
    assert abs(m.b_gamma) == pytest.approx(1.0)


def test_match_absent_gamma_raises(q_zero):
    spec = assemble_and_solve(q_zero, np.array([0.1, 0.1]), 5.0)
    with pytest.raises(ValueError):
        match_eigenvalue(spec, np.array([30, 0]), params(20))
