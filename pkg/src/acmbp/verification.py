"""Property suites behind ``acmbp selfcheck``.

Each suite returns a SuiteResult; none of them raise on a failed check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .mesh_fem import assemble_mass, assemble_stiffness, build_mesh
from .problems import AllenCahnProblem, LinearReactionProblem
from .spectral import StagePropagator, spectral_operator
from .steppers import SchemeConfig, cutoff, run
from .tableaux import TABLEAUX, algebraic_stability_matrix, get_tableau, sigma_p_eval, verify_order_conditions


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def quadrature_exactness(rng: np.random.Generator, degrees=(1, 2, 3), tol: float = 1e-12) -> SuiteResult:
    """(p, q)_h equals the exact integral when deg(p q) <= 2r - 1."""
    worst = 0.0
    for r in degrees:
        mesh = build_mesh(0.0, 2.0, 7, r)
        x = mesh.global_nodes
        for _ in range(20):
            dp = int(rng.integers(0, 2 * r))
            dq = 2 * r - 1 - dp
            p = rng.standard_normal(dp + 1)
            q = rng.standard_normal(dq + 1)
            discrete = float(np.dot(mesh.lumped_weights, P.polyval(x, p) * P.polyval(x, q)))
            anti = P.polyint(P.polymul(p, q))
            exact = float(P.polyval(2.0, anti) - P.polyval(0.0, anti))
            worst = max(worst, abs(discrete - exact) / max(1.0, abs(exact)))
    return SuiteResult("quadrature exactness", worst <= tol, f"max rel err {worst:.2e} (tol {tol:g})")


def order_conditions(tableaux=None, tol: float = 1e-12) -> SuiteResult:
    tableaux = tableaux or [get_tableau(n) for n in TABLEAUX]
    worst = max(verify_order_conditions(t).max_residual for t in tableaux)
    return SuiteResult("tableau order conditions", worst <= tol, f"max residual {worst:.2e} (tol {tol:g})")


def algebraic_stability(tableaux=None, tol: float = -1e-12) -> SuiteResult:
    tableaux = tableaux or [get_tableau(n) for n in TABLEAUX]
    low = min(float(np.linalg.eigvalsh(algebraic_stability_matrix(t)).min()) for t in tableaux)
    pos = all(np.all(t.b > 0) for t in tableaux)
    return SuiteResult("algebraic stability", low >= tol and pos, f"min eig of M {low:.2e}, b > 0: {pos}")


def eigen_oracle(sizes=(4, 8, 40), tol: float = 1e-9) -> SuiteResult:
    """r = 1 lumped Neumann Laplacian eigenvalues (4/h^2) sin^2(j pi / (2M))."""
    worst = 0.0
    for M in sizes:
        mesh = build_mesh(0.0, 2.0, M, 1)
        op = spectral_operator(mesh)
        j = np.arange(M + 1)
        exact = 4.0 / mesh.h**2 * np.sin(j * np.pi / (2 * M)) ** 2
        worst = max(worst, float(np.max(np.abs(op.eigenvalues - exact)) / exact.max()))
    return SuiteResult("eigenvalue oracle (r=1)", worst <= tol, f"max rel err {worst:.2e} (tol {tol:g})")


def stage_rational_equivalence(tol: float = 1e-12) -> SuiteResult:
    """Zero-source stage solve on single modes reproduces sigma(tau lam)."""
    worst = 0.0
    for r in (1, 2):
        mesh = build_mesh(0.0, 2.0, 12, r)
        op = spectral_operator(mesh)
        for name in TABLEAUX:
            t = get_tableau(name)
            for tau in (1e-3, 1e-1):
                prop = StagePropagator(op, t, tau)
                sigma, _ = sigma_p_eval(t, tau * op.eigenvalues)
                _, _, c_new = prop.solve_modal(np.eye(op.size), None)
                worst = max(worst, float(np.max(np.abs(np.diag(c_new) - sigma))))
    return SuiteResult("stage form = rational form", worst <= tol, f"max deviation {worst:.2e} (tol {tol:g})")


def clamp_gradient_decay(rng: np.random.Generator, n_fields: int = 500) -> SuiteResult:
    """r = 1: clamping nodal values never increases ||grad v||."""
    mesh = build_mesh(0.0, 2.0, 50, 1)
    K = assemble_stiffness(mesh)
    worst = -np.inf
    for _ in range(n_fields):
        v = 1.5 * rng.standard_normal(mesh.n_nodes)
        c, _ = cutoff(v, 1.0)
        worst = max(worst, float(c @ K @ c - v @ K @ v))
    return SuiteResult("clamp gradient decay (r=1)", worst <= 1e-12, f"max increase {worst:.2e} over {n_fields} fields")


def consistency_decay(degrees=(1, 2, 3), elements=(5, 10, 20, 40)) -> SuiteResult:
    """Dual H1 norm of Pi_h Delta v - Delta_h Pi_h v for v = cos(pi x / 2) decays like h^(r+1)."""
    details = []
    ok = True
    for r in degrees:
        vals = []
        for M in elements:
            mesh = build_mesh(0.0, 2.0, M, r)
            op = spectral_operator(mesh)
            v = np.cos(np.pi * mesh.global_nodes / 2)
            e = -((np.pi / 2) ** 2) * v - op.apply_laplacian(v)
            ell = mesh.lumped_weights * e
            H = assemble_stiffness(mesh) + assemble_mass(mesh)
            vals.append(np.sqrt(ell @ np.linalg.solve(H, ell)))
        rate = float(np.log2(vals[-2] / vals[-1]))
        ok &= rate >= r + 1 - 0.05
        details.append(f"r={r}: {rate:.2f}")
    return SuiteResult("consistency term decay", ok, ", ".join(details))


def equilibria(tol: float = 1e-12) -> SuiteResult:
    """u = +-1 are fixed points of the cut-off RK and SAV-RK steppers."""
    worst = 0.0
    mesh = build_mesh(0.0, 2.0, 20, 1)
    for kind in ("rk", "sav"):
        for name in ("gl1", "gl2", "gl3"):
            for sign in (1.0, -1.0):
                cfg = SchemeConfig(get_tableau(name), 0.01, kind, AllenCahnProblem())
                res = run(mesh, cfg, 6, u0=np.full(mesh.n_nodes, sign))
                dev = float(np.max(np.abs(res.final - sign)))
                rho = max(r.rho for r in res.records)
                dz = 0.0 if kind == "rk" else max(abs(r.z - 1.0) for r in res.records)
                worst = max(worst, dev, rho, dz)
    return SuiteResult("equilibrium preservation", worst <= tol, f"max deviation {worst:.2e} (tol {tol:g})")


def mbp_and_energy(tol: float = 1e-10) -> SuiteResult:
    """Coarse runs: nodal bound for rk and sav, SAV energy never increases."""
    mesh = build_mesh(0.0, 2.0, 100, 1)
    worst_bound = 0.0
    worst_inc = -np.inf
    for kind in ("rk", "sav"):
        cfg = SchemeConfig(get_tableau("gl1"), 1 / 150, kind, AllenCahnProblem())
        res = run(mesh, cfg, 60)
        worst_bound = max(worst_bound, max(r.max_abs for r in res.records))
        if kind == "sav":
            se = np.array([r.sav_energy for r in res.records])
            worst_inc = float(np.max(np.diff(se)))
    ok = worst_bound <= 1.0 and worst_inc <= tol
    return SuiteResult("maximum bound and SAV energy decay", ok, f"max |u| {worst_bound!r}, max SAV energy increase {worst_inc:.2e}")


def linear_temporal_order(tol: float = 0.2) -> SuiteResult:
    """Extrapolated RK on u_t = u_xx + u: observed order min(p, m+1)."""
    prob = LinearReactionProblem(mu=1.0)
    mesh = build_mesh(0.0, 2.0, 20, 2)
    op = spectral_operator(mesh)
    u0 = prob.u0(mesh.global_nodes)
    T = 1.0
    exact = op.from_modal(np.exp(T * (prob.mu - op.eigenvalues)) * op.to_modal(u0))
    details = []
    ok = True
    for name in ("gl1", "gl2", "gl3"):
        t = get_tableau(name)
        errs = []
        for nt in (20, 40):
            res = run(mesh, SchemeConfig(t, T / nt, "rk_plain", prob), nt, u0=u0, keep_records=False)
            errs.append(np.sqrt(np.dot(mesh.lumped_weights, (res.final - exact) ** 2)))
        rate = float(np.log2(errs[0] / errs[1]))
        ok &= abs(rate - t.k) <= tol
        details.append(f"{name}: {rate:.2f} (expect {t.k})")
    return SuiteResult("linear temporal order", ok, ", ".join(details))


def run_all(seed: int = 1, inject_fault: bool = False) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    tableaux = [get_tableau(n) for n in TABLEAUX]
    if inject_fault:
        # negative control: one weight off by 1e-3 must trip the order check
        tableaux[0] = tableaux[0].perturbed(np.full(tableaux[0].m, 1e-3))
    return [
        quadrature_exactness(rng),
        order_conditions(tableaux),
        algebraic_stability(tableaux),
        eigen_oracle(),
        stage_rational_equivalence(),
        clamp_gradient_decay(rng),
        consistency_decay(),
        equilibria(),
        mbp_and_energy(),
        linear_temporal_order(),
    ]
