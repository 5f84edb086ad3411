"""Eigen-decomposition of the lumped-mass discrete Laplacian and the modal
implicit-stage solver shared by every time integrator."""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .mesh_fem import Mesh1D, NodalField, assemble_stiffness
from .tableaux import ButcherTableau, sigma_p_eval


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """-Delta_h = D^{-1} K diagonalised as Phi diag(lam) Phi^T D.

    Columns of ``Q`` are orthonormal eigenvectors of D^{-1/2} K D^{-1/2};
    the (.,.)_h-orthonormal eigenfunctions are ``D^{-1/2} Q``.
    """

    mesh: Mesh1D
    eigenvalues: np.ndarray
    Q: np.ndarray
    sqrt_w: np.ndarray
    stiffness: np.ndarray

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def eigenvectors(self) -> np.ndarray:
        """Nodal values of phi_j in column j."""
        return self.Q / self.sqrt_w[:, None]

    def to_modal(self, values: np.ndarray) -> np.ndarray:
        """Coefficients (v, phi_j)_h; acts on the last axis."""
        return (values * self.sqrt_w) @ self.Q

    def from_modal(self, coeffs: np.ndarray) -> np.ndarray:
        return (coeffs @ self.Q.T) / self.sqrt_w

    def mode(self, j: int) -> NodalField:
        return NodalField(self.mesh, self.eigenvectors[:, j].copy())

    def apply_laplacian(self, values: np.ndarray) -> np.ndarray:
        """Delta_h v = -D^{-1} K v."""
        return -(values @ self.stiffness) / self.sqrt_w**2


def eigendecompose(K: np.ndarray, w: np.ndarray, mesh: Mesh1D | None = None, tridiagonal: bool = False) -> SpectralOperator:
    """Solve K phi = lam D phi, D = diag(w), by symmetric scaling with D^{-1/2}."""
    K = np.asarray(K, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("lumped weights must be positive")
    s = np.sqrt(w)
    S = K / s[:, None] / s[None, :]
    S = 0.5 * (S + S.T)
    try:
        if tridiagonal:
            lam, Q = scipy.linalg.eigh_tridiagonal(np.diag(S).copy(), np.diag(S, 1).copy())
        else:
            lam, Q = scipy.linalg.eigh(S)
    except (np.linalg.LinAlgError, ValueError) as exc:
        cond = np.linalg.cond(S)
        raise np.linalg.LinAlgError(f"eigensolver failed for n={len(w)}, cond(S)={cond:.3e}: {exc}") from exc
    # the Neumann Laplacian is PSD; negative values are rounding noise on the constant mode
    lam = np.maximum(lam, 0.0)
    lam[0] = 0.0
    Q = np.array(Q)
    # the kernel is spanned exactly by D^{1/2} 1; pin it so constants round-trip cleanly
    q0 = s / np.linalg.norm(s)
    Q[:, 0] = q0
    Q[:, 1:] -= np.outer(q0, q0 @ Q[:, 1:])
    # fix eigenvector signs so results do not depend on LAPACK choices
    signs = np.sign(Q[np.argmax(np.abs(Q), axis=0), np.arange(Q.shape[1])])
    Q = Q * signs
    for arr in (lam, Q, s, K):
        arr.setflags(write=False)
    return SpectralOperator(mesh, lam, Q, s, K)


_CACHE: "weakref.WeakKeyDictionary[Mesh1D, SpectralOperator]" = weakref.WeakKeyDictionary()


def spectral_operator(mesh: Mesh1D) -> SpectralOperator:
    """Cached eigen-decomposition for a mesh."""
    op = _CACHE.get(mesh)
    if op is None:
        op = eigendecompose(assemble_stiffness(mesh), mesh.lumped_weights, mesh, tridiagonal=mesh.r == 1)
        _CACHE[mesh] = op
    return op


def apply_sigma_p(op: SpectralOperator, t: ButcherTableau, tau: float, v: NodalField, which: int | None = None) -> NodalField:
    """sigma(-tau Delta_h) v, or p_i(-tau Delta_h) v when ``which = i`` (0-based)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    sigma, p = sigma_p_eval(t, tau * op.eigenvalues)
    factor = sigma if which is None else p[:, which]
    return NodalField(v.mesh, op.from_modal(factor * op.to_modal(v.values)))


class StagePropagator:
    """Per-eigenvalue inverses of (I + tau lam A) for one (operator, tableau, tau)."""

    def __init__(self, op: SpectralOperator, t: ButcherTableau, tau: float):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.op = op
        self.tableau = t
        self.tau = float(tau)
        lam = op.eigenvalues
        mats = np.eye(t.m)[None] + (tau * lam)[:, None, None] * t.A[None]
        try:
            self.inv = np.linalg.inv(mats)
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError("singular stage matrix I + tau*lam*A") from None
        # stage coefficients from the previous state: (I + tau lam A)^{-1} 1
        self.from_prev = self.inv.sum(axis=2)
        # stage coefficients from sources: tau (I + tau lam A)^{-1} A
        self.from_src = tau * self.inv @ t.A[None]

    def solve_modal(self, c_prev: np.ndarray, g_hat: np.ndarray | None):
        """Modal stage solve.

        c_prev: (..., N) modal coefficients of u^{n-1}; g_hat: (..., m, N) modal
        sources or None. Returns (U, Udot, c_new) with U, Udot of shape (..., m, N).
        """
        lam = self.op.eigenvalues
        # U[..., i, j] = from_prev[j, i] c_prev[..., j] + sum_l from_src[j, i, l] g[..., l, j]
        U = self.from_prev.T * c_prev[..., None, :]
        if g_hat is not None:
            U = U + np.einsum("jil,...lj->...ij", self.from_src, g_hat)
        Udot = -lam * U
        if g_hat is not None:
            Udot = Udot + g_hat
        c_new = c_prev + self.tau * np.einsum("i,...ij->...j", self.tableau.b, Udot)
        return U, Udot, c_new


@dataclass
class StageSolution:
    stages: np.ndarray       # (m, N) nodal values of u^{ni}
    derivatives: np.ndarray  # (m, N) nodal values of du^{ni}/dt
    update: np.ndarray       # (N,) nodal values of the uncut update


def solve_stages(
    op: SpectralOperator,
    t: ButcherTableau,
    tau: float,
    u_prev: np.ndarray,
    sources: np.ndarray | None = None,
    propagator: StagePropagator | None = None,
) -> StageSolution:
    """Solve u^{ni} = u^{n-1} + tau sum_j a_ij (Delta_h u^{nj} + g^{nj}) and form
    the b-weighted update, with frozen stage sources g (shape (m, N))."""
    prop = propagator or StagePropagator(op, t, tau)
    if sources is not None and np.shape(sources) != (t.m, op.size):
        raise ValueError(f"expected sources of shape {(t.m, op.size)}, got {np.shape(sources)}")
    c_prev = op.to_modal(np.asarray(u_prev, dtype=float))
    g_hat = None if sources is None else op.to_modal(np.asarray(sources, dtype=float))
    U, Udot, c_new = prop.solve_modal(c_prev, g_hat)
    return StageSolution(op.from_modal(U), op.from_modal(Udot), op.from_modal(c_new))
