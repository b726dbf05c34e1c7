import numpy as np
import pytest
from hypothesis import given, strategies as st

from stabledrift.regularity import RegularityParams, check_gate

INF = np.inf


def test_brownian_threshold():
    for gamma, ok in ((0.4, False), (0.5, False), (0.51, True), (0.99, True)):
        rep = check_gate(RegularityParams(2.0, 1, gamma=gamma))
        assert rep.weak_ok is ok
    rep = check_gate(RegularityParams(2.0, 1, gamma=0.7))
    assert rep.weak_gamma_threshold == 0.5
    assert rep.theta == pytest.approx(1.7)


def test_stable_threshold():
    rep = check_gate(RegularityParams(1.5, 1, gamma=0.9))
    assert rep.weak_gamma_threshold == 0.75
    assert rep.theta == pytest.approx(1.4)
    assert rep.chi == pytest.approx(0.5 - 0.1 / 1.5)
    assert rep.eps_prime == pytest.approx((0.9 - 1 + 0.4) / 1.5)
    assert rep.weak_ok and rep.dyn_ok
    assert not check_gate(RegularityParams(1.5, 1, gamma=0.75)).weak_ok


def test_finite_integrability():
    rep = check_gate(RegularityParams(2.0, 1, p=4.0, q=4.0, r=4.0, gamma=0.9))
    assert rep.weak_gamma_threshold == pytest.approx(0.875)
    assert rep.weak_ok
    assert rep.theta == pytest.approx(1.15)
    assert not rep.dyn_ok  # (3 - 2 + 0.5 + 1)/2 = 1.25
    assert rep.krylov_roeckner_ok  # d/p + 2/r = 3/4 < 1

def test_harness_examples():
    rep = check_gate(RegularityParams(1.5, 1, gamma=0.8))
    assert rep.weak_ok and rep.dyn_ok and rep.theta == pytest.approx(1.3)


def test_alpha_condition():
    # alpha must exceed (1 + d/p)/(1 - 1/r) = (1 + 1/2)/(1 - 1/4) = 2
    rep = check_gate(RegularityParams(1.9, 1, p=2.0, r=4.0, gamma=0.99))
    assert rep.alpha_threshold == pytest.approx(2.0) and not rep.weak_ok
    assert not check_gate(RegularityParams(1.5, 1, r=1.0, gamma=0.99)).weak_ok


def test_validation():
    with pytest.raises(ValueError):
        RegularityParams(0.9, 1)
    with pytest.raises(ValueError):
        RegularityParams(1.5, 1, p=0.5)


indices = st.one_of(st.just(INF), st.floats(1.0, 200.0))


@given(st.floats(1.01, 2.0), st.sampled_from([1, 2]), indices, indices, st.floats(0.01, 0.99))
def test_gate_implications(alpha, d, p, r, gamma):
    par = RegularityParams(alpha, d, p, INF, r, gamma)
    rep = check_gate(par)
    if rep.weak_ok:
        assert rep.theta > 1
    if rep.dyn_ok:
        assert rep.weak_ok and rep.chi > 0 and rep.eps_prime > 0


@given(st.floats(1.01, 2.0), st.floats(0.01, 0.99))
def test_theta_formula(alpha, gamma):
    par = RegularityParams(alpha, 2, 8.0, INF, 16.0, gamma)
    assert par.theta == pytest.approx(gamma - 1 + alpha - 2 / 8 - alpha / 16)
    assert par.green_gradient_threshold == pytest.approx(2 - alpha * (1 - 1 / 16) + 2 / 8)
