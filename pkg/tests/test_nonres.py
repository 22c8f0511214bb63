import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import params
from blochpt.nonres import DenominatorFloorError, F_series, S_k, closed_chains, grad_F_check


def test_first_sum_single_cosine(q_x1):
    # |q|^2 / (100 - 81) + |q|^2 / (100 - 121)
    x = np.array([10.0, 0.0])
    assert S_k(100.0, x, 1, q_x1, params(10)) == pytest.approx(2 / 399, rel=1e-14)


def test_second_sum_vanishes_without_triangles(q_x1):
    assert closed_chains(q_x1, 2).weight.size == 0
    assert S_k(100.0, np.array([10.0, 0.0]), 2, q_x1, params(10)) == 0.0


def test_zero_potential_gives_free_eigenvalue(q_zero):
    r = F_series(np.array([3.0, 19.0]), 4, q_zero, params(20))
    assert r.predicted == pytest.approx(3.0**2 + 19.0**2)
    assert r.F_values == [0.0, 0.0, 0.0, 0.0]


def test_a_outside_window_rejected(q_x1):
    with pytest.raises(ValueError):
        S_k(150.0, np.array([10.0, 0.0]), 1, q_x1, params(10))


def test_floor_error_near_plane(q_x1):
    # 2 x1 - 1 = -0.4 for the step e1
    with pytest.raises(DenominatorFloorError):
        F_series(np.array([0.3, 20.0]), 2, q_x1, params(20))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 1.3))
def test_F1_closed_form_single_cosine(theta):
    rho = 30.0
    x = rho * np.array([np.cos(theta), np.sin(theta)])
    from blochpt.domains import in_U
    from blochpt.lattice import Lattice
    if not in_U(x, Lattice.square(2), params(rho)):
        return
    from blochpt.potential import FourierPotential
    q = FourierPotential.cosines(Lattice.square(2), {(1, 0): 1.0})
    F1 = F_series(x, 2, q, params(rho)).F_values[1]
    assert F1 == pytest.approx(2 / (4 * x[0] ** 2 - 1), rel=1e-12)


def test_gradient_matches_closed_form(q_x1):
    x = np.array([11.3, 17.1])
    exact = np.array([-16 * x[0] / (4 * x[0] ** 2 - 1) ** 2, 0.0])
    g = grad_F_check(x, 1, q_x1, params(20), h=1e-3)
    assert np.allclose(g, exact, rtol=1e-5, atol=1e-12)


def test_series_within_majorant_and_settles(q_sep):
    # four-step returns first enter at s = 3, so consecutive corrections need not shrink monotonically
    x = 40 * np.array([np.cos(0.61), np.sin(0.61)])
    r = F_series(x, 6, q_sep, params(40))
    assert all(abs(f) <= r.majorant for f in r.F_values)
    steps = np.abs(np.diff(r.F_values))
    assert steps[-1] < 1e-3 * steps[0]


def test_chains_close_and_avoid_origin(q_sep):
    ch = closed_chains(q_sep, 3)
    assert ch.weight.size > 0
    assert np.all(np.any(ch.partial_coords != 0, axis=2))
    lookup = q_sep.lookup
    for p in ch.partial_coords:
        assert tuple((-p[-1]).tolist()) in lookup
