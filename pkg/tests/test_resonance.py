import numpy as np
import pytest

from conftest import params
from blochpt.core import DEFAULT_CONFIG
from blochpt.lattice import sublattice_geometry
from blochpt.resonance import C_at, build_C, chain_depth, grad_E_check, predict_singleres


def E1_closed(y):
    """E_1 for 2cos x1 + 2cos x2 near the plane of e1, including four-step excursions."""
    return 2 / (4 * y * y - 1) - 1 / ((2 * y + 1) ** 2 * (4 * y + 4)) + 1 / ((2 * y - 1) ** 2 * (4 * y - 4))


@pytest.fixture
def geom_e1(square):
    return sublattice_geometry(square, np.array([1.0, 0.0]))


def test_C_hermitian_with_kinetic_diagonal(q_sep):
    x = np.array([0.3, 20.0])
    C = build_C(x, np.array([[1.0, 0.0]]), q_sep, params(20))
    assert np.array_equal(C.entries, C.entries.T.conj())
    assert np.allclose(np.diag(C.entries), np.sum(C.index.members**2, axis=1))
    assert np.allclose(C.eigenvalues, np.linalg.eigvalsh(C.entries))


def test_C_zero_potential_is_kinetic(q_zero):
    x = np.array([0.3, 20.0])
    C = build_C(x, np.array([[1.0, 0.0]]), q_zero, params(20))
    assert np.allclose(C.eigenvalues, np.sort(np.sum(C.index.members**2, axis=1)))


def test_C_at_same_centre_reproduces(q_sep):
    x = np.array([0.3, 20.0])
    C = build_C(x, np.array([[1.0, 0.0]]), q_sep, params(20))
    from blochpt.nonres import working_potential
    assert np.allclose(C_at(x, C.index, working_potential(q_sep, params(20))), C.eigenvalues)


def test_C_invariant_under_offset_permutation(q_sep):
    x = np.array([0.3, 20.0])
    C = build_C(x, np.array([[1.0, 0.0]]), q_sep, params(20))
    perm = np.random.default_rng(0).permutation(C.index.b_k)
    M = C.entries[np.ix_(perm, perm)]
    assert np.allclose(np.linalg.eigvalsh(M), C.eigenvalues)


@pytest.mark.parametrize("rho", [20.0, 40.0])
def test_zero_potential_single_resonance(q_zero, geom_e1, rho):
    x = np.array([0.21, rho + 0.4])
    ctx, res = predict_singleres(x, geom_e1, q_zero, params(rho))
    assert res.lambda_jb == pytest.approx(x @ x, rel=1e-13)
    assert res.E_values[-1] == 0.0


@pytest.mark.parametrize("rho", [20.0, 40.0, 80.0])
def test_first_correction_closed_form(q_sep, geom_e1, rho):
    assert chain_depth(params(rho), DEFAULT_CONFIG) >= 3
    y = rho + 0.213
    _, res = predict_singleres(np.array([-0.37, y]), geom_e1, q_sep, params(rho))
    assert res.E_values[1] == pytest.approx(E1_closed(y), rel=1e-9)


def test_gradient_of_first_correction(q_sep, geom_e1):
    rho = 30.0
    y = rho + 0.213
    h = 1e-3
    fd = grad_E_check(np.array([-0.37, y]), geom_e1, q_sep, params(rho), 1, h)[0]
    exact = (E1_closed(y + 1e-5) - E1_closed(y - 1e-5)) / 2e-5
    assert abs(fd) == pytest.approx(abs(exact), rel=1e-4)


def test_lambda_tracks_kinetic_energy(q_sep, geom_e1):
    # the Hill shift of a low axial band is O(1); the transverse part dominates
    rho = 40.0
    x = np.array([0.3, rho])
    _, res = predict_singleres(x, geom_e1, q_sep, params(rho))
    assert abs(res.lambda_jb - x @ x) < 2.0
