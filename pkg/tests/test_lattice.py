import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blochpt.lattice import (TWO_PI, Lattice, build_dual, decompose_t, enumerate_ball, gamma_delta_decompose,
                             gamma_from_delta, sublattice_geometry, v_of_beta)


def test_square_dual_is_integer_lattice(square):
    assert np.allclose(square.dual, np.eye(2))
    assert square.pairing_error() < 1e-12


def test_hexagonal_pairing(hexagonal):
    assert hexagonal.pairing_error() < 1e-12
    assert np.allclose(hexagonal.dual @ hexagonal.basis.T, TWO_PI * np.eye(2))


def test_singular_basis_names_row():
    with pytest.raises(ValueError, match="row 1"):
        build_dual([[1.0, 2.0], [2.0, 4.0]])


def test_ball_count_matches_brute_force(square):
    # strict inequality 0 < |g| < 10: the closed disk has 316 points, the open one 304
    pts = enumerate_ball(square, 10.0)
    brute = sum(1 for a, b in itertools.product(range(-10, 11), repeat=2) if 0 < a * a + b * b < 100)
    assert len(pts) == brute == 304


def test_ball_sorted_and_excludes_origin(hexagonal):
    pts = enumerate_ball(hexagonal, 3.0)
    r = np.linalg.norm(pts, axis=1)
    assert np.all(r > 0) and np.all(np.diff(r) >= -1e-12) and np.all(r < 3.0)
    assert len(pts) == sum(1 for a, b in itertools.product(range(-5, 6), repeat=2)
                           if 0 < np.linalg.norm(hexagonal.from_dual_coords(np.array([a, b]))) < 3.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_split_round_trip(x1, x2):
    lat = Lattice.hexagonal()
    x = np.array([x1, x2])
    g, t = lat.split(x)
    assert np.linalg.norm(lat.from_dual_coords(g) + t - x) < 1e-10
    c = lat.dual_coords(t)
    assert np.all(c >= -1e-12) and np.all(c < 1 + 1e-12)


def test_delta_decomposition_example(square):
    geom = sublattice_geometry(square, np.array([1.0, 0.0]))
    dec = gamma_delta_decompose(np.array([3.2, 2.3]), geom, np.array([0.2, 0.3]))
    assert np.allclose(dec.beta, [0, 2]) and np.allclose(dec.tau, [0, 0.3])
    assert dec.j == 3 and dec.v == pytest.approx(0.2)


def test_non_maximal_delta_rejected(square):
    with pytest.raises(ValueError):
        sublattice_geometry(square, np.array([2.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(st.floats(-40, 40), st.floats(-40, 40), st.sampled_from([(1, 0), (1, 1), (2, 1), (1, -1)]))
def test_delta_round_trip_hexagonal(x1, x2, dc):
    lat = Lattice.hexagonal()
    geom = sublattice_geometry(lat, lat.from_dual_coords(np.array(dc)))
    x = np.array([x1, x2])
    _, t = lat.split(x)
    dec = gamma_delta_decompose(x, geom, t)
    assert np.linalg.norm(dec.reconstruct(geom) - x) < 1e-10
    assert 0 <= dec.v < 1
    assert dec.v == pytest.approx(v_of_beta(dec.beta, geom, t), abs=1e-9) or \
        abs(abs(dec.v - v_of_beta(dec.beta, geom, t)) - 1) < 1e-9


def test_gamma_from_delta_inverts(square):
    geom = sublattice_geometry(square, np.array([1.0, 1.0]))
    t = np.array([0.31, 0.44])
    beta = geom.gamma_delta[0] * 3
    g = gamma_from_delta(beta, 5, geom, t)[0]
    x = square.from_dual_coords(g) + t
    dec = gamma_delta_decompose(x, geom, t)
    assert np.allclose(dec.beta, beta) and dec.j == 5


def test_decompose_t_parts(hexagonal):
    geom = sublattice_geometry(hexagonal, hexagonal.dual[0])
    t = np.array([0.3, 0.2])
    a, tau, axial = decompose_t(t, geom)
    assert np.allclose(a + tau + axial * geom.delta, t)
    assert abs(tau @ geom.delta) < 1e-12


def test_lattice_points_annulus(square):
    pts = square.lattice_points(5.0, shift=np.array([0.25, 0.5]), r_in=3.0)
    r = np.linalg.norm(pts + [0.25, 0.5], axis=1)
    assert np.all((r >= 3.0) & (r < 5.0))
    assert math.isclose(len(pts), sum(1 for a, b in itertools.product(range(-6, 7), repeat=2)
                                      if 3.0 <= math.hypot(a + 0.25, b + 0.5) < 5.0))
