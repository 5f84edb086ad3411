import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acmbp.mesh_fem import assemble_stiffness, build_mesh
from acmbp.problems import AllenCahnProblem, LinearReactionProblem
from acmbp.spectral import spectral_operator
from acmbp.steppers import (
    History,
    SchemeConfig,
    StartupError,
    cutoff,
    extrapolation_coeffs,
    run,
    simulate,
    startup,
    step_rk_cutoff,
    step_sav_rk_cutoff,
)
from acmbp.tableaux import gauss_legendre, get_tableau, sigma_p_eval

AC = AllenCahnProblem()


def test_extrapolation_examples():
    assert extrapolation_coeffs(1, 0.3).tolist() == [1.0]
    np.testing.assert_allclose(extrapolation_coeffs(2, 0.5), [1.5, -0.5])
    with pytest.raises(ValueError):
        extrapolation_coeffs(0, 0.5)


@given(k=st.integers(1, 6), theta=st.floats(0, 1), data=st.data())
def test_extrapolation_reproduces_polynomials(k, theta, data):
    L = extrapolation_coeffs(k, theta)
    assert abs(L.sum() - 1) < 1e-13
    deg = data.draw(st.integers(0, k - 1))
    coef = np.array(data.draw(st.lists(st.floats(-2, 2), min_size=deg + 1, max_size=deg + 1)))
    nodes = -np.arange(k, dtype=float)
    assert abs(L @ np.polyval(coef, nodes) - np.polyval(coef, theta)) < 1e-10


def test_cutoff_examples():
    v, rho = cutoff(np.array([1.3, -0.5, -2.0]), 1.0)
    assert v.tolist() == [1.0, -0.5, -1.0]
    assert rho == pytest.approx(1.0)
    v, rho = cutoff(np.array([1.3, -0.5]), 1.0)
    assert rho == pytest.approx(0.3)
    w = np.array([0.2, -1.0, 1.0])
    v, rho = cutoff(w, 1.0)
    assert rho == 0.0 and np.array_equal(v, w)
    with pytest.raises(ValueError):
        cutoff(w, 0.0)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30))
def test_cutoff_idempotent(vals):
    v, _ = cutoff(np.array(vals), 1.0)
    v2, rho = cutoff(v, 1.0)
    assert np.array_equal(v, v2) and rho == 0.0
    assert np.all(np.abs(v) <= 1.0)


@settings(max_examples=100)
@given(st.integers(0, 2**31))
def test_clamp_never_increases_gradient_r1(seed):
    mesh = build_mesh(0, 2, 30, 1)
    K = assemble_stiffness(mesh)
    v = 2 * np.random.default_rng(seed).standard_normal(mesh.n_nodes)
    c, _ = cutoff(v, 1.0)
    assert c @ K @ c <= v @ K @ v + 1e-12


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(get_tableau("gl1"), 0.1, "rk4")
    with pytest.raises(ValueError):
        SchemeConfig(get_tableau("gl1"), -0.1)
    with pytest.raises(ValueError):
        SchemeConfig(get_tableau("gl1"), 0.1, problem=AllenCahnProblem(alpha=0))


@pytest.mark.parametrize("kind", ["rk", "sav"])
@pytest.mark.parametrize("name", ["gl1", "gl2", "gl3", "radau2"])
@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_equilibria(kind, name, sign):
    mesh = build_mesh(0, 2, 16, 1)
    u0 = np.full(mesh.n_nodes, sign)
    # startup plus one extrapolated step is exact even for a large step
    k = get_tableau(name).k
    res = run(mesh, SchemeConfig(get_tableau(name), 0.05, kind), k, u0=u0)
    assert np.max(np.abs(res.final - sign)) <= 1e-14
    # long runs stay at rounding level while 2 tau / eps^2 is small
    res = run(mesh, SchemeConfig(get_tableau(name), 0.002, kind), 40, u0=u0)
    assert np.max(np.abs(res.final - sign)) <= 1e-12
    assert max(r.rho for r in res.records) <= 1e-12
    if kind == "sav":
        assert res.records[0].z == 1.0
        assert max(abs(r.z - 1.0) for r in res.records) <= 1e-12


def _linear_zero_source():
    return LinearReactionProblem(mu=0.0)


@pytest.mark.parametrize("name", ["gl1", "gl2", "gl3"])
def test_zero_source_step_is_rational_form(name):
    mesh = build_mesh(0, 2, 12, 2)
    op = spectral_operator(mesh)
    t = get_tableau(name)
    cfg = SchemeConfig(t, 0.01, "rk", _linear_zero_source())
    j = 3
    phi = op.mode(j).values
    hist = History.start(0.2 * phi, t.k)
    for _ in range(t.k - 1):
        hist.push(0.2 * phi)
    u, rho, u_hat = step_rk_cutoff(hist, cfg, op)
    s, _ = sigma_p_eval(t, 0.01 * op.eigenvalues[j])
    np.testing.assert_allclose(u_hat, s * 0.2 * phi, atol=1e-12)
    np.testing.assert_array_equal(u, np.clip(u_hat, -1, 1))


def test_rk_step_requires_full_history():
    mesh = build_mesh(0, 2, 4, 1)
    op = spectral_operator(mesh)
    cfg = SchemeConfig(get_tableau("gl2"), 0.01)
    with pytest.raises(ValueError):
        step_rk_cutoff(History.start(np.zeros(5), 3), cfg, op)


def test_sav_rejects_higher_degree():
    mesh = build_mesh(0, 2, 4, 2)
    with pytest.raises(ValueError):
        run(mesh, SchemeConfig(get_tableau("gl1"), 0.01, "sav"), 2)


def test_sav_step_requires_z():
    mesh = build_mesh(0, 2, 4, 1)
    op = spectral_operator(mesh)
    cfg = SchemeConfig(get_tableau("gl1"), 0.01, "sav")
    hist = History.start(np.zeros(5), 2)
    hist.push(np.zeros(5))
    with pytest.raises(ValueError):
        step_sav_rk_cutoff(hist, cfg, op)


def test_sav_superposition_against_dense_solve():
    # assemble the coupled linear (u, z) stage system and solve it directly
    mesh = build_mesh(0, 2, 10, 1)
    op = spectral_operator(mesh)
    t = get_tableau("gl2")
    tau = 0.01
    cfg = SchemeConfig(t, tau, "sav")
    rng = np.random.default_rng(3)
    fields = [np.clip(0.8 * rng.standard_normal(op.size), -1, 1) for _ in range(t.k)]
    hist = History.start(fields[-1], t.k, 1.3)
    for f in fields[-2::-1]:
        hist.push(f)
    _, z_lib, _, u_hat_lib = step_sav_rk_cutoff(hist, cfg, op)

    w = mesh.lumped_weights
    N, m = op.size, t.m
    L = -op.stiffness / w[:, None]
    E1 = lambda u: float(w @ AC.F(u))
    Wf = lambda u: AC.f(u) / np.sqrt(E1(u) + AC.c0)
    Wl = [Wf(u) for u in hist.fields]
    W = np.array([extrapolation_coeffs(t.k, ci) @ np.array(Wl) for ci in t.c])
    # unknowns: Udot (m*N) and zdot (m)
    n = m * N + m
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    u_prev, z_prev = hist.latest, hist.z
    for i in range(m):
        rows = slice(i * N, (i + 1) * N)
        # Udot_i - L (u_prev + tau sum_j a_ij Udot_j) - W_i (z_prev + tau sum_j a_ij zdot_j) = 0
        A[rows, rows] += np.eye(N)
        for j in range(m):
            A[rows, j * N : (j + 1) * N] -= tau * t.A[i, j] * L
            A[rows, m * N + j] -= tau * t.A[i, j] * W[i]
        rhs[rows] = L @ u_prev + z_prev * W[i]
        # zdot_i + 1/2 (W_i, Udot_i)_h = 0
        A[m * N + i, rows] = 0.5 * w * W[i]
        A[m * N + i, m * N + i] = 1.0
    sol = np.linalg.solve(A, rhs)
    Udot = sol[: m * N].reshape(m, N)
    zdot = sol[m * N :]
    np.testing.assert_allclose(u_hat_lib, u_prev + tau * t.b @ Udot, atol=1e-10)
    assert z_lib == pytest.approx(z_prev + tau * t.b @ zdot, abs=1e-12)


def test_startup_k1_is_empty():
    mesh = build_mesh(0, 2, 4, 1)
    op = spectral_operator(mesh)
    t = gauss_legendre(1)
    t1 = dataclasses.replace(t, p=1)  # k = 1
    cfg = SchemeConfig(t1, 0.1)
    hist, levels = startup(np.zeros(op.size), cfg, op)
    assert levels == [] and len(hist.fields) == 1


def test_startup_linear_matches_gl3_factor():
    mesh = build_mesh(0, 2, 10, 2)
    op = spectral_operator(mesh)
    t = get_tableau("gl3")
    cfg = SchemeConfig(t, 0.02, "rk_plain", _linear_zero_source())
    u0 = op.mode(2).values + 0.3 * op.mode(7).values
    hist, levels = startup(u0, cfg, op)
    assert len(levels) == t.k - 1
    s, _ = sigma_p_eval(get_tableau("gl3"), 0.02 * op.eigenvalues)
    c = op.to_modal(u0)
    for n, (u, rho, z) in enumerate(levels, start=1):
        np.testing.assert_allclose(op.to_modal(u), s**n * c, atol=1e-12)
        assert rho == 0.0 and z is None


def test_startup_equilibrium():
    mesh = build_mesh(0, 2, 10, 1)
    op = spectral_operator(mesh)
    cfg = SchemeConfig(get_tableau("gl3"), 0.01, "sav")
    hist, levels = startup(np.ones(op.size), cfg, op, z0=1.0)
    for u, rho, z in levels:
        assert np.max(np.abs(u - 1.0)) <= 1e-14 and rho <= 1e-14 and z == pytest.approx(1.0, abs=1e-14)


def test_startup_non_convergence_raises():
    mesh = build_mesh(0, 2, 10, 1)
    op = spectral_operator(mesh)
    cfg = SchemeConfig(get_tableau("gl2"), 5.0, "rk", AllenCahnProblem(eps=0.01))
    u0 = np.cos(np.pi * mesh.global_nodes) * 0.9
    with pytest.raises(StartupError, match="smaller time step"):
        startup(u0, cfg, op)


@pytest.mark.parametrize("name", ["gl1", "gl2", "gl3"])
def test_mbp_and_records(name):
    mesh = build_mesh(0, 2, 60, 2)
    res = run(mesh, SchemeConfig(get_tableau(name), 0.005, "rk"), 20)
    assert len(res.records) == 21
    assert [r.n for r in res.records] == list(range(21))
    assert all(r.max_abs <= 1.0 and r.rho >= 0 for r in res.records)
    assert res.records[-1].t == pytest.approx(0.1)


def test_sav_energy_decays_on_coarse_run():
    mesh = build_mesh(0, 2, 80, 1)
    res = run(mesh, SchemeConfig(get_tableau("gl2"), 0.005, "sav"), 60)
    se = np.array([r.sav_energy for r in res.records])
    assert np.all(np.diff(se) <= 1e-10)
    assert all(r.max_abs <= 1.0 for r in res.records)


def test_plain_rk_can_overshoot():
    mesh = build_mesh(0, 2, 300, 1)
    res = run(mesh, SchemeConfig(get_tableau("gl1"), 1 / 150, "rk_plain"), 60)
    assert max(r.max_abs for r in res.records) > 1.0
    assert all(r.rho == 0.0 for r in res.records)


def test_simulate_and_run_agree():
    mesh = build_mesh(0, 2, 20, 1)
    cfg = SchemeConfig(get_tableau("gl2"), 0.01, "rk")
    states = [u for u, _ in simulate(mesh, cfg, 6)]
    np.testing.assert_array_equal(states[-1], run(mesh, cfg, 6).final)
    assert len(states) == 7


def test_fewer_steps_than_startup():
    mesh = build_mesh(0, 2, 20, 1)
    res = run(mesh, SchemeConfig(get_tableau("gl3"), 0.01, "rk"), 1)
    assert len(res.records) == 2
