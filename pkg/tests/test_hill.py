import math

import numpy as np
import pytest

from blochpt.hill import HillCache, fourier_decay_check, in_W_rho, solve_Tv
from blochpt.lattice import Lattice
from blochpt.oracle import assemble_and_solve
from blochpt.potential import FourierPotential

Q2COS = {1: 1.0, -1: 1.0}


def test_free_hill_eigenvalues():
    sp = solve_Tv({}, 0.3, 1.0, 30)
    for j in range(-5, 6):
        assert sp.mu_of(j) == pytest.approx((j + 0.3) ** 2, abs=1e-13)


def test_truncation_doubling():
    a, b = solve_Tv(Q2COS, 0.3, 1.0, 40), solve_Tv(Q2COS, 0.3, 1.0, 80)
    for j in range(-10, 11):
        assert abs(a.mu_of(j) - b.mu_of(j)) < 1e-8


def test_matches_one_dimensional_oracle():
    lat = Lattice.square(1)
    q = FourierPotential.cosines(lat, {(1,): 1.0})
    spec = assemble_and_solve(q, np.array([0.3]), 40.0)
    sp = solve_Tv(Q2COS, 0.3, 1.0, 60)
    assert np.allclose(np.sort(sp.mu)[:20], spec.eigenvalues[:20], atol=1e-10)


def test_band_monotonicity_on_half_period():
    # on (0, 1/2) odd-numbered bands increase with v and even-numbered bands decrease
    vs = np.linspace(0.05, 0.45, 9)
    bands = np.array([np.sort(solve_Tv(Q2COS, v, 1.0, 40).mu)[:6] for v in vs])
    for n in range(6):
        d = np.diff(bands[:, n])
        assert np.all(d > 0) if n % 2 == 0 else np.all(d < 0)


def test_periodicity_in_v():
    a = np.sort(solve_Tv(Q2COS, 0.2, 1.0, 40).mu)[:10]
    b = np.sort(solve_Tv(Q2COS, 1.2, 1.0, 40).mu)[:10]
    assert np.allclose(a, b, atol=1e-10)


def test_eigenvectors_normalized_and_gauge_fixed():
    sp = solve_Tv(Q2COS, 0.3, 1.0, 30)
    for pair in sp.pairs()[:10]:
        c = pair.coeffs
        assert np.linalg.norm(c) == pytest.approx(1.0)
        top = c[np.argmax(np.abs(c))]
        assert abs(top.imag) < 1e-14 and top.real > 0


def test_fourier_coefficients_decay_fast():
    sp = solve_Tv(Q2COS, 0.3, 1.0, 60)
    slope, _ = fourier_decay_check(sp.pair(0), Q2COS, 1.0)
    assert slope < -50


def test_W_rejects_degenerate_v():
    sp = solve_Tv({}, 0.0, 1.0, 40)
    assert not in_W_rho(0.0, 20.0, sp, 5)


@pytest.mark.parametrize("v", [0.1, 0.25, 0.45, 0.7])
@pytest.mark.parametrize("rho", [5.0, 20.0, 1e4])
def test_W_gap_threshold_free(v, rho):
    mu = np.sort([(j + v) ** 2 for j in range(-5, 6)])
    expected = bool(np.min(np.diff(mu)) > 2 / math.log(rho))
    assert in_W_rho(v, rho, solve_Tv({}, v, 1.0, 40), 5) == expected


def test_cache_reuses_spectra():
    cache = HillCache(Q2COS, 1.0, 30)
    assert cache.get(0.3) is cache.get(1.3)
