"""Degree-r Lagrange finite elements on a uniform 1D mesh with Gauss-Lobatto
nodes and the lumped-mass (nodal quadrature) inner product."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from numpy.polynomial import legendre

MAX_DEGREE = 8


@dataclass(frozen=True)
class GaussLobattoRule:
    """(r+1)-point Gauss-Lobatto rule on the unit interval [0, 1]."""

    r: int
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def gauss_lobatto_rule(r: int) -> GaussLobattoRule:
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= MAX_DEGREE:
        raise ValueError(f"unsupported Gauss-Lobatto degree r={r!r}; need 1 <= r <= {MAX_DEGREE}")
    r = int(r)
    # interior nodes are the roots of P_r' on [-1, 1]
    coeffs = np.zeros(r + 1)
    coeffs[-1] = 1.0
    interior = np.sort(legendre.legroots(legendre.legder(coeffs))) if r > 1 else np.empty(0)
    xi = np.concatenate(([-1.0], interior, [1.0]))
    xi = 0.5 * (xi - xi[::-1])  # exact antisymmetry
    pr = legendre.legval(xi, coeffs)
    w = 2.0 / (r * (r + 1) * pr**2)
    w = 0.5 * (w + w[::-1])
    nodes = 0.5 * (xi + 1.0)
    nodes[0], nodes[-1] = 0.0, 1.0
    nodes.setflags(write=False)
    weights = 0.5 * w
    weights.setflags(write=False)
    return GaussLobattoRule(r, nodes, weights)


@lru_cache(maxsize=None)
def gauss_legendre_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule mapped to [0, 1]."""
    x, w = legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def lagrange_basis(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Values of the Lagrange basis at points x, shape (len(x), len(nodes)).

    Barycentric second form; exact (one-hot) when x hits a node.
    """
    x = np.asarray(x, dtype=float)
    bw = _barycentric_weights(nodes)
    diff = x[:, None] - nodes[None, :]
    hit = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = bw[None, :] / diff
        vals = terms / terms.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    vals[rows] = hit[rows].astype(float)
    return vals


def lagrange_basis_derivative(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Derivatives of the Lagrange basis at points x, shape (len(x), len(nodes))."""
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    out = np.zeros((len(x), n))
    for j in range(n):
        others = np.delete(nodes, j)
        denom = np.prod(nodes[j] - others)
        # d/dx prod_{k != j}(x - x_k) via sum over the dropped factor
        total = np.zeros(len(x))
        for q in range(n - 1):
            total += np.prod(x[:, None] - np.delete(others, q)[None, :], axis=1)
        out[:, j] = total / denom
    return out


@dataclass(frozen=True, eq=False)
class Mesh1D:
    a: float
    b: float
    M: int
    r: int
    h: float
    global_nodes: np.ndarray
    lumped_weights: np.ndarray
    rule: GaussLobattoRule = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.M * self.r + 1

    def element_dofs(self, i: int) -> slice:
        return slice(i * self.r, i * self.r + self.r + 1)

    def dof_table(self) -> np.ndarray:
        """(M, r+1) global indices of each element's local nodes."""
        return np.arange(self.M)[:, None] * self.r + np.arange(self.r + 1)[None, :]

    def same_as(self, other: "Mesh1D") -> bool:
        return self is other or (
            self.a == other.a and self.b == other.b and self.M == other.M and self.r == other.r
        )

    def evaluate(self, values: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Evaluate the piecewise polynomial with nodal values at points x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < self.a - 1e-12 * (self.b - self.a)) or np.any(x > self.b + 1e-12 * (self.b - self.a)):
            raise ValueError("evaluation point outside the mesh domain")
        s = (x - self.a) / self.h
        elem = np.clip(np.floor(s).astype(int), 0, self.M - 1)
        local = s - elem
        # snap to element nodes so nodal values come back exactly
        gap = np.abs(local[:, None] - self.rule.nodes[None, :])
        near = gap.argmin(axis=1)
        hit = gap[np.arange(len(local)), near] < 1e-12
        local[hit] = self.rule.nodes[near[hit]]
        basis = lagrange_basis(self.rule.nodes, local)
        dofs = self.dof_table()[elem]
        return np.sum(basis * values[dofs], axis=1)


def build_mesh(a: float, b: float, M: int, r: int) -> Mesh1D:
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if M < 1:
        raise ValueError(f"need at least one element, got M={M}")
    rule = gauss_lobatto_rule(r)
    h = (b - a) / M
    starts = a + h * np.arange(M)
    nodes = np.empty(M * r + 1)
    for i in range(M):
        nodes[i * r : i * r + r + 1] = starts[i] + h * rule.nodes
    nodes[0], nodes[-1] = a, b
    # composite quadrature: interface nodes collect both neighbouring endpoint weights
    w = np.zeros(M * r + 1)
    for i in range(M):
        w[i * r : i * r + r + 1] += h * rule.weights
    nodes.setflags(write=False)
    w.setflags(write=False)
    return Mesh1D(float(a), float(b), int(M), int(r), h, nodes, w, rule)


@dataclass(frozen=True, eq=False)
class NodalField:
    """A member of the finite element space, stored by its nodal values."""

    mesh: Mesh1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_nodes,):
            raise ValueError(f"expected {self.mesh.n_nodes} nodal values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    def __call__(self, x):
        return self.mesh.evaluate(self.values, x)


def _check_same(f: NodalField, g: NodalField) -> None:
    if not f.mesh.same_as(g.mesh):
        raise ValueError("fields live on different meshes")


def discrete_inner(f: NodalField, g: NodalField) -> float:
    _check_same(f, g)
    return float(np.dot(f.mesh.lumped_weights * f.values, g.values))


def discrete_norm(f: NodalField) -> float:
    return float(np.sqrt(discrete_inner(f, f)))


def interpolate(fn: Callable[[np.ndarray], np.ndarray], mesh: Mesh1D) -> NodalField:
    x = mesh.global_nodes
    values = np.asarray(fn(x), dtype=float)
    if values.ndim == 0:
        values = np.full(mesh.n_nodes, float(values))
    if not np.all(np.isfinite(values)):
        bad = x[~np.isfinite(values)]
        raise ValueError(f"non-finite function value at x={bad[0]!r}")
    return NodalField(mesh, values.copy())


@lru_cache(maxsize=None)
def _reference_stiffness(r: int) -> np.ndarray:
    rule = gauss_lobatto_rule(r)
    xq, wq = gauss_legendre_unit(r + 1)  # exact for degree 2r+1 >= 2r-2
    d = lagrange_basis_derivative(rule.nodes, xq)
    return (d * wq[:, None]).T @ d


def assemble_stiffness(mesh: Mesh1D) -> np.ndarray:
    """Dense symmetric stiffness matrix K_ij = (phi_i', phi_j')."""
    local = _reference_stiffness(mesh.r) / mesh.h
    n = mesh.n_nodes
    K = np.zeros((n, n))
    for i in range(mesh.M):
        s = mesh.element_dofs(i)
        K[s, s] += local
    return 0.5 * (K + K.T)


def _union_breaks(m1: Mesh1D, m2: Mesh1D) -> np.ndarray:
    b1 = m1.a + m1.h * np.arange(m1.M + 1)
    b2 = m2.a + m2.h * np.arange(m2.M + 1)
    br = np.unique(np.concatenate((b1, b2)))
    tol = 1e-12 * (m1.b - m1.a)
    keep = np.concatenate(([True], np.diff(br) > tol))
    return br[keep]


def l2_error(u: NodalField, v: Union[NodalField, Callable[[np.ndarray], np.ndarray]]) -> float:
    """L2(a, b) norm of u - v.

    v may be a field on any mesh of the same domain (integrated on the common
    refinement of both partitions) or a pointwise function.
    """
    mesh = u.mesh
    if isinstance(v, NodalField):
        if not (np.isclose(v.mesh.a, mesh.a) and np.isclose(v.mesh.b, mesh.b)):
            raise ValueError("fields are defined on different domains")
        breaks = _union_breaks(mesh, v.mesh)
        degree = 2 * max(mesh.r, v.mesh.r) + 2
        other = v
    else:
        breaks = mesh.a + mesh.h * np.arange(mesh.M + 1)
        degree = 2 * mesh.r + 2
        other = v
    xq, wq = gauss_legendre_unit(degree // 2 + 1)
    lengths = np.diff(breaks)
    x = (breaks[:-1, None] + lengths[:, None] * xq[None, :]).ravel()
    w = (lengths[:, None] * wq[None, :]).ravel()
    diff = u(x) - np.asarray(other(x), dtype=float)
    return float(np.sqrt(np.sum(w * diff**2)))


def l2_norm(u: NodalField) -> float:
    return l2_error(u, lambda x: np.zeros_like(x))


@lru_cache(maxsize=None)
def _reference_mass(r: int) -> np.ndarray:
    rule = gauss_lobatto_rule(r)
    xq, wq = gauss_legendre_unit(r + 1)
    phi = lagrange_basis(rule.nodes, xq)
    return (phi * wq[:, None]).T @ phi


def assemble_mass(mesh: Mesh1D) -> np.ndarray:
    """Consistent (exact L2 Gram) mass matrix; the schemes themselves use the lumped one."""
    local = _reference_mass(mesh.r) * mesh.h
    n = mesh.n_nodes
    Mc = np.zeros((n, n))
    for i in range(mesh.M):
        s = mesh.element_dofs(i)
        Mc[s, s] += local
    return 0.5 * (Mc + Mc.T)
