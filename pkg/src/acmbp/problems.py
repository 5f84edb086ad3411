"""Allen-Cahn with the Ginzburg-Landau double well: nonlinearity, potential,
SAV quantities and the benchmark initial state."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh_fem import NodalField


def nonlinearity(u, eps: float):
    """f(u) = (u - u^3) / eps^2."""
    u = np.asarray(u, dtype=float)
    return (u - u**3) / eps**2


def potential(u, eps: float):
    """F(u) = (1 - u^2)^2 / (4 eps^2), so that f = -F'."""
    u = np.asarray(u, dtype=float)
    return (1.0 - u**2) ** 2 / (4.0 * eps**2)


def initial_condition(x):
    """Benchmark initial state on [0, 2]: 1 on [0, 1/2), cos(2 pi (x + 1/2) / 3)
    on [1/2, 2]. Discontinuous at x = 1/2 as written; the cosine branch owns
    x = 1/2."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 2.0):
        raise ValueError("initial condition is defined on [0, 2] only")
    return np.where(x < 0.5, 1.0, np.cos(2.0 * np.pi / 3.0 * (x + 0.5)))


def initial_condition_smooth(x):
    """C^1 variant with the cosine shifted to cos(2 pi (x - 1/2) / 3); it joins
    the plateau at x = 1/2 and is flat at x = 2."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 2.0):
        raise ValueError("initial condition is defined on [0, 2] only")
    return np.where(x < 0.5, 1.0, np.cos(2.0 * np.pi / 3.0 * (x - 0.5)))


INITIAL_CONDITIONS: dict[str, Callable] = {
    "printed": initial_condition,
    "smooth": initial_condition_smooth,
}


@dataclass(frozen=True)
class AllenCahnProblem:
    eps: float = 0.1
    alpha: float = 1.0
    a: float = 0.0
    b: float = 2.0
    c0: float = 1.0
    initial: str = "smooth"

    def f(self, u):
        return nonlinearity(u, self.eps)

    def F(self, u):
        return potential(u, self.eps)

    def u0(self, x):
        try:
            fn = INITIAL_CONDITIONS[self.initial]
        except KeyError:
            raise ValueError(f"unknown initial condition {self.initial!r}") from None
        return fn(x)


def potential_energy(u: NodalField, eps: float) -> float:
    """E_1 = (F(u), 1)_h."""
    return float(np.dot(u.mesh.lumped_weights, potential(u.values, eps)))


def sav_quantities(u: NodalField, eps: float, c0: float = 1.0):
    """(E_1, z, W) with z = sqrt(E_1 + C_0) and W = f(u) / z nodewise."""
    e1 = potential_energy(u, eps)
    z = float(np.sqrt(e1 + c0))
    W = NodalField(u.mesh, nonlinearity(u.values, eps) / z)
    return e1, z, W


@dataclass(frozen=True)
class LinearReactionProblem:
    """u_t = u_xx + mu u on (a, b) with u0 = cos(pi (x - a) / (b - a)).

    Linear test case for order studies; its semi-discrete solution is
    exp(t (Delta_h + mu)) u0 mode by mode.
    """

    mu: float = 1.0
    alpha: float = float("inf")
    a: float = 0.0
    b: float = 2.0
    c0: float = 1.0
    eps: float = 1.0

    def f(self, u):
        return self.mu * np.asarray(u, dtype=float)

    def F(self, u):
        return -0.5 * self.mu * np.asarray(u, dtype=float) ** 2

    def u0(self, x):
        return np.cos(np.pi * (np.asarray(x, dtype=float) - self.a) / (self.b - self.a))
