"""Implicit Runge-Kutta collocation tableaux and their stability checks.

Gauss-Legendre (m = 1, 2, 3) and Radau IIA (m = 2, 3). Coefficients are the
closed-form surds evaluated in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ButcherTableau",
    "gauss_legendre",
    "radau_iia",
    "get_tableau",
    "TABLEAUX",
    "verify_order_conditions",
    "algebraic_stability_matrix",
    "sigma_p_eval",
    "check_assumptions",
    "strict_accuracy_residual",
    "sigma_minus_exp",
]


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    p: int
    label: str
    m: int = field(init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        m = len(b)
        if A.shape != (m, m) or c.shape != (m,):
            raise ValueError("inconsistent tableau shapes")
        if len(np.unique(c)) != m:
            raise ValueError("abscissae must be distinct")
        for arr in (A, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "m", m)

    @property
    def k(self) -> int:
        """Extrapolation depth min(p, m+1)."""
        return min(self.p, self.m + 1)

    def perturbed(self, db: np.ndarray) -> "ButcherTableau":
        return ButcherTableau(self.A, self.b + np.asarray(db), self.c, self.p, self.label + "*")


def _gl_coefficients(m, sqrt, one):
    if m == 1:
        h = one / 2
        return [[h]], [one], [h]
    if m == 2:
        s3 = sqrt(3 * one)
        A = [[one / 4, one / 4 - s3 / 6], [one / 4 + s3 / 6, one / 4]]
        return A, [one / 2, one / 2], [one / 2 - s3 / 6, one / 2 + s3 / 6]
    if m == 3:
        s15 = sqrt(15 * one)
        A = [
            [5 * one / 36, 2 * one / 9 - s15 / 15, 5 * one / 36 - s15 / 30],
            [5 * one / 36 + s15 / 24, 2 * one / 9, 5 * one / 36 - s15 / 24],
            [5 * one / 36 + s15 / 30, 2 * one / 9 + s15 / 15, 5 * one / 36],
        ]
        b = [5 * one / 18, 4 * one / 9, 5 * one / 18]
        c = [one / 2 - s15 / 10, one / 2, one / 2 + s15 / 10]
        return A, b, c
    raise ValueError(f"Gauss-Legendre tableau available for m in {{1, 2, 3}}, got m={m!r}")


def _radau_coefficients(m, sqrt, one):
    if m == 2:
        A = [[5 * one / 12, -one / 12], [3 * one / 4, one / 4]]
        return A, [3 * one / 4, one / 4], [one / 3, one]
    if m == 3:
        s6 = sqrt(6 * one)
        A = [
            [(88 - 7 * s6) / 360, (296 - 169 * s6) / 1800, (-2 + 3 * s6) / 225],
            [(296 + 169 * s6) / 1800, (88 + 7 * s6) / 360, (-2 - 3 * s6) / 225],
            [(16 - s6) / 36, (16 + s6) / 36, one / 9],
        ]
        b = [(16 - s6) / 36, (16 + s6) / 36, one / 9]
        c = [(4 - s6) / 10, (4 + s6) / 10, one]
        return A, b, c
    raise ValueError(f"Radau IIA tableau available for m in {{2, 3}}, got m={m!r}")


def gauss_legendre(m: int) -> ButcherTableau:
    A, b, c = _gl_coefficients(m, np.sqrt, 1.0)
    return ButcherTableau(A, b, c, p=2 * m, label=f"gl{m}")


def radau_iia(m: int) -> ButcherTableau:
    A, b, c = _radau_coefficients(m, np.sqrt, 1.0)
    return ButcherTableau(A, b, c, p=2 * m - 1, label=f"radau{m}")


def _mp_coefficients(t: ButcherTableau):
    """Closed-form coefficients of a cataloged tableau at mpmath precision."""
    import mpmath

    one = mpmath.mpf(1)
    if t.label.startswith("gl"):
        return _gl_coefficients(t.m, mpmath.sqrt, one)
    if t.label.startswith("radau"):
        return _radau_coefficients(t.m, mpmath.sqrt, one)
    return [[mpmath.mpf(x) for x in row] for row in t.A], [mpmath.mpf(x) for x in t.b], None


def sigma_minus_exp(t: ButcherTableau, lam: float, dps: int = 50) -> float:
    """|sigma(lam) - exp(-lam)| evaluated in extended precision."""
    import mpmath

    with mpmath.workdps(dps):
        A, b, _ = _mp_coefficients(t)
        lam = mpmath.mpf(lam)
        mat = mpmath.eye(t.m) + lam * mpmath.matrix(A)
        y = mpmath.lu_solve(mat, mpmath.matrix([1] * t.m))
        sigma = 1 - lam * sum(b[i] * y[i] for i in range(t.m))
        return float(abs(sigma - mpmath.exp(-lam)))


TABLEAUX = {
    "gl1": lambda: gauss_legendre(1),
    "gl2": lambda: gauss_legendre(2),
    "gl3": lambda: gauss_legendre(3),
    "radau2": lambda: radau_iia(2),
    "radau3": lambda: radau_iia(3),
}


def get_tableau(name: str) -> ButcherTableau:
    try:
        return TABLEAUX[name]()
    except KeyError:
        raise ValueError(f"unknown tableau {name!r}; choose from {sorted(TABLEAUX)}") from None


@dataclass
class OrderReport:
    quadrature: dict[int, float]
    stage: dict[int, float]

    @property
    def max_residual(self) -> float:
        return max(list(self.quadrature.values()) + list(self.stage.values()))


def verify_order_conditions(t: ButcherTableau, p: int | None = None, q: int | None = None) -> OrderReport:
    """Residuals of sum b_i c_i^(l-1) = 1/l (l <= p) and
    sum_j a_ij c_j^(l-1) = c_i^l / l (l <= q); defaults p = t.p, q = t.m."""
    p = t.p if p is None else p
    q = t.m if q is None else q
    quad = {l: abs(float(t.b @ t.c ** (l - 1)) - 1.0 / l) for l in range(1, p + 1)}
    stage = {l: float(np.max(np.abs(t.A @ t.c ** (l - 1) - t.c**l / l))) for l in range(1, q + 1)}
    return OrderReport(quad, stage)


def algebraic_stability_matrix(t: ButcherTableau) -> np.ndarray:
    BA = t.b[:, None] * t.A
    return BA + BA.T - np.outer(t.b, t.b)


def sigma_p_eval(t: ButcherTableau, lam):
    """Stability function sigma(lam) and stage weights p_i(lam).

    (p_1..p_m) = b^T (I + lam A)^{-1}, sigma = 1 - lam * sum_j p_j, which is
    what one stage-form step of y' = -lam y produces.
    Accepts a scalar or an array of lam; returns (sigma, p) with p of shape
    lam.shape + (m,).
    """
    lam_arr = np.asarray(lam, dtype=float)
    flat = lam_arr.reshape(-1)
    mats = np.eye(t.m)[None, :, :] + flat[:, None, None] * t.A[None, :, :]
    # solve (I + lam A)^T p = b
    rhs = np.broadcast_to(t.b, (len(flat), t.m))[..., None]
    try:
        p = np.linalg.solve(np.transpose(mats, (0, 2, 1)), rhs)[..., 0]
    except np.linalg.LinAlgError:
        dets = np.linalg.det(mats)
        bad = flat[np.argmin(np.abs(dets))]
        raise np.linalg.LinAlgError(f"I + lam*A is singular at lam={bad!r}") from None
    sigma = 1.0 - flat * p.sum(axis=1)
    return sigma.reshape(lam_arr.shape), p.reshape(lam_arr.shape + (t.m,))


def strict_accuracy_residual(t: ButcherTableau, lam: float, j: int) -> float:
    """sum_i c_i^j p_i - j!/(-lam)^(j+1) (sigma - sum_{l<=j} (-lam)^l / l!)."""
    from math import factorial

    sigma, p = sigma_p_eval(t, lam)
    taylor = sum((-lam) ** l / factorial(l) for l in range(j + 1))
    lhs = float(p @ t.c**j)
    rhs = factorial(j) / (-lam) ** (j + 1) * (float(sigma) - taylor)
    return lhs - rhs


@dataclass
class AssumptionReport:
    lam: np.ndarray
    sigma: np.ndarray
    p: np.ndarray
    contractive: np.ndarray  # |sigma| < 1 per sample
    p_bound: float
    taylor_slope: float
    sigma_at_infinity: float
    l_stable: bool
    algebraically_stable: bool
    min_stability_eig: float

    @property
    def ok(self) -> bool:
        return bool(self.contractive.all() and np.isfinite(self.p_bound) and self.algebraically_stable)


def check_assumptions(t: ButcherTableau, lam: np.ndarray | None = None) -> AssumptionReport:
    """Sampled checks of |sigma| < 1, bounded p_i, sigma ~ exp(-lam) + O(lam^(p+1))
    and the large-lam limit of sigma."""
    if lam is None:
        lam = np.logspace(-6, 8, 141)
    lam = np.asarray(lam, dtype=float)
    sigma, p = sigma_p_eval(t, lam)
    small = np.logspace(-4, -2, 9)
    resid = np.array([sigma_minus_exp(t, x) for x in small])
    slope = float(np.polyfit(np.log(small), np.log(resid), 1)[0])
    s_inf, _ = sigma_p_eval(t, 1e12)
    eig = float(np.linalg.eigvalsh(algebraic_stability_matrix(t)).min())
    alg = bool(np.linalg.matrix_rank(t.A) == t.m and np.all(t.b > 0) and eig >= -1e-12)
    return AssumptionReport(
        lam=lam,
        sigma=sigma,
        p=p,
        contractive=np.abs(sigma) < 1.0,
        p_bound=float(np.max(np.abs(p))),
        taylor_slope=slope,
        sigma_at_infinity=float(abs(s_inf)),
        l_stable=bool(abs(s_inf) < 1e-6),
        algebraically_stable=alg,
        min_stability_eig=eig,
    )
