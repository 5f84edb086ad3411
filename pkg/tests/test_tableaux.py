import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings, strategies as st

from acmbp.tableaux import (
    TABLEAUX,
    algebraic_stability_matrix,
    check_assumptions,
    gauss_legendre,
    get_tableau,
    radau_iia,
    sigma_minus_exp,
    sigma_p_eval,
    strict_accuracy_residual,
    verify_order_conditions,
)

NAMES = list(TABLEAUX)


def _collocation_A(c):
    # collocation: sum_j a_ij c_j^(l-1) = c_i^l / l for l = 1..m
    m = len(c)
    V = np.vander(c, m, increasing=True)
    rhs = np.array([[ci**l / l for l in range(1, m + 1)] for ci in c])
    return np.linalg.solve(V.T, rhs.T).T


def test_gl2_from_moment_system():
    # Gauss nodes/weights: b1 + b2 = 1, b c = 1/2, b c^2 = 1/3, b c^3 = 1/4
    def eqs(z):
        b1, b2, c1, c2 = z
        return [b1 * c1**q + b2 * c2**q - 1 / (q + 1) for q in range(4)]

    b1, b2, c1, c2 = scipy.optimize.fsolve(eqs, [0.4, 0.6, 0.2, 0.8], xtol=1e-15)
    t = gauss_legendre(2)
    np.testing.assert_allclose(t.c, [c1, c2], atol=1e-14)
    np.testing.assert_allclose(t.b, [b1, b2], atol=1e-14)
    np.testing.assert_allclose(t.A, _collocation_A(np.array([c1, c2])), atol=1e-14)
    np.testing.assert_allclose(t.A, [[0.25, 0.25 - np.sqrt(3) / 6], [0.25 + np.sqrt(3) / 6, 0.25]], atol=1e-15)


def test_radau2_from_moment_system():
    # right endpoint fixed: b1 c1^q + b2 = 1/(q+1), q = 0..2
    def eqs(z):
        b1, b2, c1 = z
        return [b1 * c1**q + b2 - 1 / (q + 1) for q in range(3)]

    b1, b2, c1 = scipy.optimize.fsolve(eqs, [0.7, 0.3, 0.3], xtol=1e-15)
    t = radau_iia(2)
    np.testing.assert_allclose(t.c, [c1, 1.0], atol=1e-14)
    np.testing.assert_allclose(t.b, [b1, b2], atol=1e-14)
    np.testing.assert_allclose(t.A, [[5 / 12, -1 / 12], [3 / 4, 1 / 4]], atol=1e-15)


def test_gl1_is_implicit_midpoint():
    t = get_tableau("gl1")
    assert t.A.tolist() == [[0.5]] and t.b.tolist() == [1.0] and t.c.tolist() == [0.5]


@pytest.mark.parametrize("name", NAMES)
def test_collocation_and_orders(name):
    t = get_tableau(name)
    np.testing.assert_allclose(t.A, _collocation_A(t.c), atol=1e-13)
    assert verify_order_conditions(t).max_residual < 1e-13
    expected_p = {"gl1": 2, "gl2": 4, "gl3": 6, "radau2": 3, "radau3": 5}[name]
    assert t.p == expected_p
    assert t.k == min(t.p, t.m + 1)


def test_extrapolation_depths():
    assert [get_tableau(n).k for n in ("gl1", "gl2", "gl3")] == [2, 3, 4]
    assert [get_tableau(n).k for n in ("radau2", "radau3")] == [3, 4]


def test_order_stops_at_p():
    t = get_tableau("radau3")
    assert verify_order_conditions(t, p=5).max_residual < 1e-13
    assert verify_order_conditions(t, p=6).quadrature[6] > 1e-4
    t = get_tableau("gl2")
    assert verify_order_conditions(t, p=5).quadrature[5] > 1e-4


@pytest.mark.parametrize("name", NAMES)
def test_perturbed_weights_detected(name):
    t = get_tableau(name)
    bad = t.perturbed(np.full(t.m, 1e-3))
    assert verify_order_conditions(bad).quadrature[1] == pytest.approx(1e-3 * t.m, rel=1e-9)


@pytest.mark.parametrize("name", NAMES)
def test_algebraic_stability(name):
    t = get_tableau(name)
    M = algebraic_stability_matrix(t)
    assert np.all(t.b > 0)
    assert np.linalg.eigvalsh(M).min() > -1e-13
    if name.startswith("gl"):
        np.testing.assert_allclose(M, 0, atol=1e-14)


def test_unknown_tableau():
    with pytest.raises(ValueError):
        get_tableau("rk4")


def test_sigma_gl1_hand_values():
    sigma, p = sigma_p_eval(get_tableau("gl1"), 2.0)
    assert sigma == pytest.approx(0.0, abs=1e-15)
    assert p[0] == pytest.approx(0.5)
    sigma, _ = sigma_p_eval(get_tableau("gl1"), np.array([0.1, 1.0]))
    np.testing.assert_allclose(sigma, [0.95 / 1.05, 0.5 / 1.5])


def _brute_force_step(t, lam):
    # y' = -lam y, y0 = 1: stages K_i = -lam (1 + sum_j a_ij K_j)
    K = np.linalg.solve(np.eye(t.m) + lam * t.A, -lam * np.ones(t.m))
    return 1.0 + t.b @ K


@settings(max_examples=60)
@given(name=st.sampled_from(NAMES), lam=st.floats(1e-3, 1e4))
def test_sigma_matches_stage_form(name, lam):
    t = get_tableau(name)
    sigma, p = sigma_p_eval(t, lam)
    assert sigma == pytest.approx(_brute_force_step(t, lam), abs=1e-12)
    assert abs(sigma) < 1
    np.testing.assert_allclose(p, np.linalg.solve((np.eye(t.m) + lam * t.A).T, t.b), atol=1e-14)


def test_gl2_pade():
    # GL2 stability function is the (2,2) Pade approximant of exp(-z)
    lam = np.linspace(0.1, 50, 40)
    sigma, _ = sigma_p_eval(get_tableau("gl2"), lam)
    pade = (1 - lam / 2 + lam**2 / 12) / (1 + lam / 2 + lam**2 / 12)
    np.testing.assert_allclose(sigma, pade, atol=1e-14)


@pytest.mark.parametrize("name", NAMES)
@pytest.mark.parametrize("lam", [0.3, 1.0, 7.0, 120.0])
def test_strict_accuracy(name, lam):
    t = get_tableau(name)
    for j in range(t.m):
        assert abs(strict_accuracy_residual(t, lam, j)) < 1e-11


@pytest.mark.parametrize("name", NAMES)
def test_taylor_slopes(name):
    t = get_tableau(name)
    rep = check_assumptions(t)
    assert rep.taylor_slope == pytest.approx(t.p + 1, abs=0.1)
    assert rep.contractive.all()
    assert rep.algebraically_stable
    assert rep.ok


def test_l_stability():
    for name in ("radau2", "radau3"):
        assert check_assumptions(get_tableau(name)).l_stable
    for name in ("gl1", "gl2", "gl3"):
        rep = check_assumptions(get_tableau(name))
        assert not rep.l_stable
        assert rep.sigma_at_infinity == pytest.approx(1.0, abs=1e-6)


def test_sigma_minus_exp_high_precision():
    # implicit midpoint: sigma - e^-lam ~ lam^3 / 12
    lam = 1e-3
    assert sigma_minus_exp(get_tableau("gl1"), lam) == pytest.approx(lam**3 / 12, rel=1e-2)
