"""Maximum-bound-preserving high-order schemes for the 1D Allen-Cahn equation."""

from .mesh_fem import NodalField, build_mesh, discrete_inner, gauss_lobatto_rule, interpolate, l2_error
from .problems import AllenCahnProblem, LinearReactionProblem
from .spectral import SpectralOperator, spectral_operator
from .steppers import SchemeConfig, cutoff, extrapolation_coeffs, run
from .tableaux import ButcherTableau, gauss_legendre, get_tableau, radau_iia

__version__ = "0.1.0"

__all__ = [
    "AllenCahnProblem",
    "ButcherTableau",
    "LinearReactionProblem",
    "NodalField",
    "SchemeConfig",
    "SpectralOperator",
    "build_mesh",
    "cutoff",
    "discrete_inner",
    "extrapolation_coeffs",
    "gauss_legendre",
    "gauss_lobatto_rule",
    "get_tableau",
    "interpolate",
    "l2_error",
    "radau_iia",
    "run",
    "spectral_operator",
]
