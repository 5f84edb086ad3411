"""Energies and convergence-rate tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .mesh_fem import NodalField, assemble_stiffness
from .problems import potential


def gradient_norm_sq(u: NodalField, K: np.ndarray | None = None) -> float:
    """||grad u_h||^2_{L2}, exact for the piecewise polynomial."""
    K = assemble_stiffness(u.mesh) if K is None else K
    v = u.values - u.values[0]  # K annihilates constants; shifting keeps them exactly zero
    return float(v @ (K @ v))


def free_energy(u: NodalField, eps: float, K: np.ndarray | None = None) -> float:
    """1/2 ||grad u||^2 + (F(u), 1)_h."""
    pot = float(np.dot(u.mesh.lumped_weights, potential(u.values, eps)))
    return 0.5 * gradient_norm_sq(u, K) + pot


def sav_energy(u: NodalField, z: float, K: np.ndarray | None = None) -> float:
    """1/2 ||grad u||^2 + z^2."""
    return 0.5 * gradient_norm_sq(u, K) + z * z


@dataclass
class EnergyReport:
    n: np.ndarray
    energy: np.ndarray
    sav_energy: Optional[np.ndarray]
    max_increase: float
    max_sav_increase: Optional[float]


def energy_report(records) -> EnergyReport:
    n = np.array([r.n for r in records])
    e = np.array([r.energy for r in records])
    se = None
    if records and records[0].sav_energy is not None:
        se = np.array([r.sav_energy for r in records])
    inc = float(np.max(np.diff(e))) if len(e) > 1 else 0.0
    sinc = float(np.max(np.diff(se))) if se is not None and len(se) > 1 else None
    return EnergyReport(n, e, se, inc, sinc)


@dataclass
class RateTable:
    resolutions: list
    errors: list
    rates: list  # rates[i] between rows i and i+1

    @property
    def headline(self) -> float:
        return self.rates[-1]

    def mean_rate(self, last: int) -> float:
        """Least-squares slope over the last `last` refinement pairs."""
        res = np.log(np.asarray(self.resolutions[-(last + 1):], dtype=float))
        err = np.log(np.asarray(self.errors[-(last + 1):], dtype=float))
        return float(-np.polyfit(res, err, 1)[0])


def error_table(rows: Sequence[tuple[float, float]]) -> RateTable:
    """Rates log(e_i / e_{i+1}) / log(n_{i+1} / n_i) between consecutive rows.

    Rows are (resolution, error) with resolution growing (N_x or N_t); for the
    usual factor-2 refinement this is log2 of the error ratio.
    """
    if len(rows) < 2:
        raise ValueError("need at least two rows to compute a rate")
    res = [float(r) for r, _ in rows]
    err = [float(e) for _, e in rows]
    if any(not np.isfinite(e) or e <= 0 for e in err):
        raise ValueError("errors must be finite and positive")
    rates = [
        float(np.log(err[i] / err[i + 1]) / np.log(res[i + 1] / res[i])) for i in range(len(rows) - 1)
    ]
    return RateTable(res, err, rates)
