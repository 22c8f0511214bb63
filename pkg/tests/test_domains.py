import numpy as np
import pytest

from conftest import params
from blochpt.core import DEFAULT_CONFIG
from blochpt.domains import (build_Bk, classify, in_E_k, in_K_rho, in_U, in_V_prime, mc_nonresonance_fraction,
                             primitive, shell_ok, slab_defect, wilson_interval)


def test_slab_defect_formula():
    x = np.array([[1.0, 2.0]])
    b = np.array([[0.5, -1.0]])
    assert slab_defect(x, b)[0, 0] == pytest.approx(1 + 4 - (1.5**2 + 1.0))


def test_shell_bounds():
    assert shell_ok([10.0, 0.0], 20.0) and shell_ok([30.0, 0.0], 20.0)
    assert not shell_ok([9.9, 0.0], 20.0) and not shell_ok([30.1, 0.0], 20.0)


def test_classify_point_near_vertical_plane(square):
    lab = classify(np.array([0.3, 40.0]), square, params(40))
    assert lab.kind == "single"
    assert np.allclose(lab.delta, [1.0, 0.0])


def test_classify_generic_point_nonresonant(square):
    x = 40 * np.array([np.cos(0.7123), np.sin(0.7123)])
    lab = classify(x, square, params(40))
    assert lab.nonresonant == in_U(x, square, params(40))


def test_classify_near_lattice_corner(square):
    # near both coordinate planes of e1 and e2 inside the shell is impossible; use a point near e1 and e1+e2
    x = np.array([0.1, 20.0])
    assert in_E_k(x, 1, square, params(20))


def test_primitive_normalises(square):
    assert np.allclose(primitive(square, np.array([-4.0, -6.0])), [2.0, 3.0])


def test_V_prime_excludes_second_set(square):
    x = np.array([0.3, 40.0])
    P = params(40)
    assert in_V_prime(x, np.array([1.0, 0.0]), square, P) == (not in_E_k(x, 2, square, P))


def test_K_rho():
    P = params(20)
    assert in_K_rho([20.0, 0.0], P)
    assert not in_K_rho([25.0, 0.0], P)


def test_Bk_centre_first_and_unique(square):
    idx = build_Bk(np.array([0.3, 40.0]), np.array([[1.0, 0.0]]), square, params(40))
    assert not np.any(idx.offsets[0])
    assert len(np.unique(idx.offsets, axis=0)) == idx.b_k
    assert np.allclose(idx.members - idx.center, square.from_dual_coords(idx.offsets))


def test_Bk_dependent_directions_rejected(square):
    with pytest.raises(ValueError):
        build_Bk(np.zeros(2), np.array([[1.0, 0.0], [2.0, 0.0]]), square, params(20))


@pytest.mark.parametrize("k,n", [(0, 10), (5, 10), (10, 10), (37, 100)])
def test_wilson_interval_contains_estimate(k, n):
    lo, hi = wilson_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_mc_fraction_close_to_slab_measure(square, rng):
    # each slab of direction b covers a fraction about rho^a1 / (pi rho |b|) of the circle (two arcs)
    P = params(40)
    est = mc_nonresonance_fraction(square, P, 40000, rng)
    assert est.low <= est.fraction <= est.high
    assert 0.0 < est.fraction < 1.0
    from blochpt.domains import resonance_directions
    dirs = resonance_directions(square, P, DEFAULT_CONFIG)
    w = P.rho**P.alpha1
    union_bound = sum(2 * np.arcsin(min(1.0, (w / 2) / (P.rho * np.linalg.norm(b)))) * 2 / (2 * np.pi)
                      for b in dirs)
    assert 1 - est.fraction <= union_bound + 0.02
