import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import params
from blochpt.bloch import (A_k_coeffs, BlochExpansion, aligned, eigenfunction_error, admissible_order_cap, phi_1,
                           predict_expansion)
from blochpt.core import PaperParams
from blochpt.nonres import DenominatorFloorError
from blochpt.oracle import assemble_and_solve, match_eigenvalue


def test_phi1_signs(q_x1):
    # |x|^2 - |x + g|^2 is 100 - 121 for g = e1 and 100 - 81 for g = -e1
    c = phi_1(np.array([10.0, 0.0]), q_x1, params(10))
    assert c[(1, 0)] == pytest.approx(-1 / 21)
    assert c[(-1, 0)] == pytest.approx(1 / 19)


def test_phi1_floor(q_x1):
    with pytest.raises(DenominatorFloorError):
        phi_1(np.array([0.5, 20.0]), q_x1, params(20))


def test_A1_equals_phi1_with_free_energy(q_sep):
    x = np.array([17.3, 11.9])
    P = params(25)
    ref = phi_1(x, q_sep, P)
    for off, val in ref.items():
        assert A_k_coeffs(x, off, 1, q_sep, P, P=float(x @ x)) == pytest.approx(val, rel=1e-13)


def test_A2_single_cosine(q_x1):
    x = np.array([17.3, 11.9])
    E = float(x @ x)
    e1 = np.array([1.0, 0.0])
    expected = 1 / ((E - np.sum((x + e1) ** 2)) * (E - np.sum((x + 2 * e1) ** 2)))
    P = params(25)
    assert A_k_coeffs(x, (2, 0), 2, q_x1, P, P=E) == pytest.approx(expected, rel=1e-13)
    assert A_k_coeffs(x, (0, 1), 2, q_x1, P, P=E) == 0
    assert A_k_coeffs(x, (0, 0), 2, q_x1, P, P=E) == 0


def test_order_cap():
    assert admissible_order_cap(PaperParams.standard(2, 20.0)) == 1
    assert admissible_order_cap(PaperParams.standard(2, 20.0, s=60)) > 2


def test_zero_potential_expansion(q_zero):
    e = predict_expansion(np.array([17.3, 11.9]), 4, q_zero, PaperParams.standard(2, 25.0, s=60))
    assert e.coefficients == {} and e.b_center == 1.0


def test_expansion_order_is_capped(q_sep):
    e = predict_expansion(np.array([17.3, 11.9]), 9, q_sep, params(25))
    assert e.order == 1 and e.requested_order == 9


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 1.3))
def test_predicted_norm_at_most_one(theta):
    from blochpt.lattice import Lattice
    from blochpt.potential import FourierPotential
    q = FourierPotential.cosines(Lattice.square(2), {(1, 0): 1.0, (0, 1): 1.0})
    x = 25 * np.array([np.cos(theta), np.sin(theta)])
    try:
        e = predict_expansion(x, 4, q, PaperParams.standard(2, 25.0, s=60))
    except DenominatorFloorError:
        return
    assert e.norm_squared() <= 1 + 1e-8


@settings(max_examples=30)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=3,
                max_size=6), st.integers(0, 2))
def test_alignment_idempotent(vals, row):
    v = np.array(vals)
    a = aligned(v, row)
    assert np.allclose(aligned(a, row), a)
    assert np.allclose(np.abs(a), np.abs(v))
    if v[row] != 0:
        assert abs(a[row].imag) < 1e-12 and a[row].real >= 0


@pytest.mark.parametrize("theta", [0.3, 0.61, 1.1])
def test_error_against_oracle_shrinks_with_order(q_sep, theta):
    P = PaperParams.standard(2, 20.0, s=60)
    x = 20 * np.array([np.cos(theta), np.sin(theta)])
    g, t = q_sep.lattice.split(x)
    spec = assemble_and_solve(q_sep, t, 28.0, window=(x @ x - 4, x @ x + 4), inner=12.0)
    m = match_eigenvalue(spec, g, P)
    errs = []
    for n in (1, 2, 3, 4):
        err, tail = eigenfunction_error(spec, predict_expansion(x, n, q_sep, P), m, g)
        errs.append(err)
    # the centre-only expansion misses exactly the off-centre mass, up to the b_center deficit
    assert errs[0] ** 2 == pytest.approx(tail, rel=0.05)
    assert all(b < a / 10 for a, b in zip(errs, errs[1:]))


def test_free_eigenfunction_error_zero(q_zero):
    P = PaperParams.standard(2, 20.0, s=60)
    x = np.array([13.3, 14.7])
    g, t = q_zero.lattice.split(x)
    spec = assemble_and_solve(q_zero, t, 22.0, window=(x @ x - 0.5, x @ x + 0.5), inner=17.0)
    m = match_eigenvalue(spec, g, P)
    assert eigenfunction_error(spec, predict_expansion(x, 3, q_zero, P), m, g) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_second_order_b_center(q_x1):
    # with P = |x|^2 the corrections are the phi_1 values 1/19 and -1/21; P shifts them at O(rho^-3)
    P = PaperParams.standard(2, 10.0, s=60)
    e = predict_expansion(np.array([10.0, 0.0]), 2, q_x1, P)
    assert e.b_center == pytest.approx((1 + 1 / 19**2 + 1 / 21**2) ** -0.5, abs=1e-6)
    assert e.norm_squared() == pytest.approx(1.0, abs=1e-14)


def test_error_requires_match(q_sep):
    spec = assemble_and_solve(q_sep, np.zeros(2), 5.0)
    with pytest.raises(ValueError):
        eigenfunction_error(spec, BlochExpansion(np.zeros(2), 1), None, np.zeros(2, int))
