"""Extrapolated cut-off Runge-Kutta and cut-off SAV-RK time integrators."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .mesh_fem import Mesh1D, NodalField
from .problems import AllenCahnProblem
from .spectral import SpectralOperator, StagePropagator, spectral_operator
from .tableaux import ButcherTableau, gauss_legendre

SCHEMES = ("rk", "rk_plain", "sav")

STARTUP_TOL = 1e-12
STARTUP_MAXITER = 100


class StartupError(RuntimeError):
    pass


def extrapolation_coeffs(k: int, theta: float) -> np.ndarray:
    """Lagrange weights L_1..L_k on t_{n-1}, ..., t_{n-k}, evaluated at t_{n-1} + theta tau."""
    if k < 1:
        raise ValueError("extrapolation depth must be >= 1")
    nodes = -np.arange(k, dtype=float)
    out = np.ones(k)
    for l in range(k):
        for q in range(k):
            if q != l:
                out[l] *= (theta - nodes[q]) / (nodes[l] - nodes[q])
    return out


def cutoff(v: np.ndarray, alpha: float):
    """Nodewise clamp to [-alpha, alpha]; returns (clamped, max modification)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    v = np.asarray(v, dtype=float)
    out = np.clip(v, -alpha, alpha)
    rho = float(np.max(np.abs(out - v))) if v.size else 0.0
    return out, rho


@dataclass(frozen=True)
class SchemeConfig:
    tableau: ButcherTableau
    tau: float
    kind: str = "rk"
    problem: AllenCahnProblem = field(default_factory=AllenCahnProblem)

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}; choose from {SCHEMES}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.problem.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def k(self) -> int:
        return self.tableau.k

    @property
    def alpha(self) -> float:
        return self.problem.alpha

    @property
    def clamps(self) -> bool:
        return self.kind != "rk_plain"


@dataclass
class History:
    """Most recent accepted states, newest first: fields[l-1] = u^{n-l}."""

    fields: deque
    k: int
    n: int  # index of the newest stored level
    z: Optional[float] = None

    @classmethod
    def start(cls, u0: np.ndarray, k: int, z0: Optional[float] = None) -> "History":
        return cls(deque([np.asarray(u0, dtype=float)], maxlen=k), k, 0, z0)

    @property
    def full(self) -> bool:
        return len(self.fields) == self.k

    @property
    def latest(self) -> np.ndarray:
        return self.fields[0]

    def push(self, u: np.ndarray, z: Optional[float] = None) -> None:
        self.fields.appendleft(u)
        self.n += 1
        if z is not None:
            self.z = z


@dataclass
class StepRecord:
    n: int
    t: float
    rho: float
    max_abs: float
    energy: float
    sav_energy: Optional[float] = None
    z: Optional[float] = None
    wall_time: float = 0.0


def gradient_energy(op: SpectralOperator, u: np.ndarray) -> float:
    """1/2 ||grad u_h||^2 through the exact stiffness form."""
    v = u - u[0]
    return 0.5 * float(v @ (op.stiffness @ v))


def _potential(op: SpectralOperator, problem, u: np.ndarray) -> float:
    return float(np.dot(op.mesh.lumped_weights, problem.F(u)))


def _record(n, t, rho, u, op, problem, z, t0) -> StepRecord:
    grad = gradient_energy(op, u)
    return StepRecord(
        n=n,
        t=t,
        rho=rho,
        max_abs=float(np.max(np.abs(u))),
        energy=grad + _potential(op, problem, u),
        sav_energy=None if z is None else grad + z * z,
        z=z,
        wall_time=time.perf_counter() - t0,
    )


def _W(op: SpectralOperator, problem, u: np.ndarray) -> np.ndarray:
    """Nodal W(u) = f(u) / sqrt(E_1(u) + C_0)."""
    return problem.f(u) / np.sqrt(_potential(op, problem, u) + problem.c0)


def _extrapolated_modal(op, cfg: SchemeConfig, hist: History, fn) -> np.ndarray:
    """Modal coefficients of sum_l L_l(t_{n-1} + c_i tau) fn(u^{n-l}), shape (m, N)."""
    k = cfg.k
    weights = np.array([extrapolation_coeffs(k, ci) for ci in cfg.tableau.c])  # (m, k)
    vals = np.array([fn(u) for u in hist.fields])  # (k, N)
    return op.to_modal(weights @ vals)


def step_rk_cutoff(hist: History, cfg: SchemeConfig, op: SpectralOperator, prop: StagePropagator | None = None):
    """One extrapolated RK step with the cut-off; returns (u^n, rho, u_hat)."""
    if not hist.full:
        raise ValueError(f"history holds {len(hist.fields)} levels, need {cfg.k}")
    prop = prop or StagePropagator(op, cfg.tableau, cfg.tau)
    g_hat = _extrapolated_modal(op, cfg, hist, cfg.problem.f)
    _, _, c_new = prop.solve_modal(op.to_modal(hist.latest), g_hat)
    u_hat = op.from_modal(c_new)
    if cfg.clamps:
        u, rho = cutoff(u_hat, cfg.alpha)
    else:
        u, rho = u_hat, 0.0
    return u, rho, u_hat


def sav_stage_solve(prop: StagePropagator, c_prev: np.ndarray, z_prev: float, W_hat: np.ndarray):
    """Linear SAV-RK stage system by superposition.

    Solves  Udot_i = -lam U_i + z_i W_i,  U_i = c + tau sum_j a_ij Udot_j,
            zdot_i = -1/2 (W_i, Udot_i)_h,  z_i = z + tau sum_j a_ij zdot_j
    in modal coordinates. Returns (Udot, zdot, c_new, z_new).
    """
    t = prop.tableau
    m = t.m
    tau = prop.tau
    _, V0, _ = prop.solve_modal(c_prev, z_prev * W_hat)
    # response to a unit zdot_j: sources tau a_ij W_i, zero initial state
    unit_src = tau * t.A.T[:, :, None] * W_hat[None, :, :]  # (j, i, N)
    _, V, _ = prop.solve_modal(np.zeros((m, len(c_prev))), unit_src)  # (j, i, N)
    G = np.einsum("ik,jik->ij", W_hat, V)
    rhs = -0.5 * np.einsum("ik,ik->i", W_hat, V0)
    mat = np.eye(m) + 0.5 * G
    try:
        zdot = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(f"singular SAV scalar system, cond={np.linalg.cond(mat):.3e}") from None
    Udot = V0 + np.einsum("j,jik->ik", zdot, V)
    c_new = c_prev + tau * (t.b @ Udot)
    z_new = z_prev + tau * float(t.b @ zdot)
    return Udot, zdot, c_new, z_new


def step_sav_rk_cutoff(hist: History, cfg: SchemeConfig, op: SpectralOperator, prop: StagePropagator | None = None):
    """One cut-off SAV-RK step; returns (u^n, z^n, rho, u_hat)."""
    if op.mesh is not None and op.mesh.r != 1:
        raise ValueError("the SAV scheme is defined for linear elements (r = 1) only")
    if not hist.full:
        raise ValueError(f"history holds {len(hist.fields)} levels, need {cfg.k}")
    if hist.z is None or not np.isfinite(hist.z):
        raise ValueError("SAV history needs a finite auxiliary variable z")
    prop = prop or StagePropagator(op, cfg.tableau, cfg.tau)
    W_hat = _extrapolated_modal(op, cfg, hist, lambda u: _W(op, cfg.problem, u))
    _, _, c_new, z_new = sav_stage_solve(prop, op.to_modal(hist.latest), hist.z, W_hat)
    u_hat = op.from_modal(c_new)
    u, rho = cutoff(u_hat, cfg.alpha)
    return u, z_new, rho, u_hat


def _startup_step(op, cfg: SchemeConfig, prop: StagePropagator, u_prev: np.ndarray, z_prev: Optional[float]):
    """One nonlinear implicit RK step by fixed-point iteration on the stages."""
    t = prop.tableau
    problem = cfg.problem
    c_prev = op.to_modal(u_prev)
    U = np.tile(u_prev, (t.m, 1))
    zs = None if z_prev is None else np.full(t.m, z_prev)
    w = op.mesh.lumped_weights
    with np.errstate(over="ignore", invalid="ignore"):
        return _fixed_point(op, t, problem, prop, c_prev, U, zs, z_prev, w)


def _fixed_point(op, t, problem, prop, c_prev, U, zs, z_prev, w):
    delta = np.inf
    for it in range(STARTUP_MAXITER):
        if zs is None:
            g = np.array([problem.f(Ui) for Ui in U])
            Uh, Udot_h, c_new = prop.solve_modal(c_prev, op.to_modal(g))
            z_new = None
        else:
            Wn = np.array([_W(op, problem, Ui) for Ui in U])
            Uh, Udot_h, c_new = prop.solve_modal(c_prev, op.to_modal(zs[:, None] * Wn))
            Udot = op.from_modal(Udot_h)
            zdot = -0.5 * np.einsum("ik,k,ik->i", Wn, w, Udot)
            zs_next = z_prev + prop.tau * t.A @ zdot
            z_new = z_prev + prop.tau * float(t.b @ zdot)
        U_next = op.from_modal(Uh)
        delta = np.sqrt(np.max(np.einsum("ik,k,ik->i", U_next - U, w, U_next - U)))
        if zs is not None:
            delta = max(delta, float(np.max(np.abs(zs_next - zs))))
            zs = zs_next
        U = U_next
        if not np.isfinite(delta):
            raise StartupError(f"startup fixed-point iteration diverged after {it + 1} iterations; use a smaller time step")
        if delta < STARTUP_TOL:
            return op.from_modal(c_new), z_new
    raise StartupError(
        f"startup fixed-point iteration did not converge in {STARTUP_MAXITER} iterations "
        f"(last update {delta:.2e}); use a smaller time step"
    )


def startup(u0: np.ndarray, cfg: SchemeConfig, op: SpectralOperator, z0: Optional[float] = None):
    """History of k levels: u0 plus k-1 clamped steps of the nonlinear 3-stage
    Gauss-Legendre method.

    Returns (history, levels) where levels lists (u, rho, z) for n = 1..k-1.
    """
    hist = History.start(u0, cfg.k, z0)
    prop = StagePropagator(op, gauss_legendre(3), cfg.tau)
    info = []
    for _ in range(cfg.k - 1):
        u_hat, z = _startup_step(op, cfg, prop, hist.latest, hist.z)
        if cfg.clamps:
            u, rho = cutoff(u_hat, cfg.alpha)
        else:
            u, rho = u_hat, 0.0
        hist.push(u, z)
        info.append((u, rho, z))
    return hist, info


@dataclass
class RunResult:
    mesh: Mesh1D
    final: np.ndarray
    records: list
    z: Optional[float] = None

    @property
    def field(self) -> NodalField:
        return NodalField(self.mesh, self.final)


def simulate(
    mesh: Mesh1D,
    cfg: SchemeConfig,
    n_steps: int,
    u0: np.ndarray | None = None,
    op: SpectralOperator | None = None,
) -> Iterator[tuple[np.ndarray, StepRecord]]:
    """Yield (u^n, record) for n = 0..n_steps."""
    op = op or spectral_operator(mesh)
    problem = cfg.problem
    if u0 is None:
        u0 = problem.u0(mesh.global_nodes)
    u0 = np.asarray(u0, dtype=float)
    sav = cfg.kind == "sav"
    if sav and mesh.r != 1:
        raise ValueError("the SAV scheme is defined for linear elements (r = 1) only")
    t0 = time.perf_counter()
    z0 = float(np.sqrt(_potential(op, problem, u0) + problem.c0)) if sav else None
    yield u0, _record(0, 0.0, 0.0, u0, op, problem, z0, t0)
    hist, levels = startup(u0, cfg, op, z0)
    for n, (u, rho, z) in enumerate(levels[:n_steps], start=1):
        yield u, _record(n, n * cfg.tau, rho, u, op, problem, z, t0)
    prop = StagePropagator(op, cfg.tableau, cfg.tau)
    for n in range(cfg.k, n_steps + 1):
        t1 = time.perf_counter()
        if sav:
            u, z, rho, _ = step_sav_rk_cutoff(hist, cfg, op, prop)
            hist.push(u, z)
        else:
            u, rho, _ = step_rk_cutoff(hist, cfg, op, prop)
            hist.push(u)
        yield u, _record(n, n * cfg.tau, rho, u, op, problem, hist.z if sav else None, t1)


def run(mesh: Mesh1D, cfg: SchemeConfig, n_steps: int, u0=None, op=None, keep_records: bool = True) -> RunResult:
    records = []
    u = None
    for u, rec in simulate(mesh, cfg, n_steps, u0, op):
        if keep_records:
            records.append(rec)
        last = rec
    return RunResult(mesh, u, records, last.z)
