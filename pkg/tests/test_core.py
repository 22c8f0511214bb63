from fractions import Fraction

import pytest

from blochpt.core import (DEFAULT_CONFIG, NumericConfig, PaperParams, delta_exponent_base, minimal_smoothness,
                          standard_exponent_base, validate_params)


@pytest.mark.parametrize("d, q", [(1, 6), (2, 13), (3, 32)])
def test_standard_exponent_base(d, q):
    assert standard_exponent_base(d) == q


def test_delta_exponent_base_d2():
    assert delta_exponent_base(2) == 108


def test_standard_preset_d2_rho20():
    p = PaperParams.standard(2, 20.0)
    assert p.s == 45 and p.p == 43
    assert p.alpha_exact == Fraction(1, 13)
    assert p.alpha_k_exact(1) == Fraction(3, 13)
    assert p.k1 == 10 and p.p1 == 15 and p.k2 == 4
    assert p.eps1 == pytest.approx(20.0 ** (-2 - 2 / 13))


def test_delta_preset_d2():
    p = PaperParams.delta_preset(2, 30.0)
    assert p.q_exp == 108 and p.s == 488
    assert p.k2 == 26 and p.p1 == 163


def test_minimal_smoothness_is_admissible():
    d = 2
    s0 = minimal_smoothness(d)
    assert validate_params(PaperParams.standard(d, 20.0, s=int(s0))) == []


@pytest.mark.parametrize("d, s, rho", [(2, 45, 20.0), (3, 200, 10.0)])
def test_valid_parameter_sets(d, s, rho):
    assert validate_params(PaperParams(d, s, rho)) == []
    assert validate_params(PaperParams.delta_preset(2, rho)) == []


def test_invalid_smoothness_is_reported():
    bad = validate_params(PaperParams(2, 2, 20.0))
    assert bad == ["k1 <= (p - q(d-1)/2) / 3"]


def test_at_changes_only_rho():
    p = PaperParams.standard(2, 20.0)
    p2 = p.at(40.0)
    assert (p2.d, p2.s, p2.q_exp, p2.rho) == (p.d, p.s, p.q_exp, 40.0)


def test_numeric_config_override():
    cfg = DEFAULT_CONFIG.with_(f_order=4)
    assert cfg.f_order == 4 and DEFAULT_CONFIG.f_order == 3
    assert isinstance(cfg, NumericConfig)
    with pytest.raises(TypeError):
        DEFAULT_CONFIG.with_(no_such_knob=1)
