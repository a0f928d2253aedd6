"""Optimisation kernels: simplex LP, Frank-Wolfe, minimax ascent, golden section."""

from .config import SolverConfig
from .frank_wolfe import FWResult, frank_wolfe
from .lp import LinearProgram, LPResult, solve_lp
from .minimax import (
    MinimaxResult,
    eu_maximize,
    eu_minimax_barrier,
    eu_supergradient,
    supergradient_minimax,
)
from .scalar import ScalarMin, minimize_scalar_convex

__all__ = [
    "SolverConfig", "LinearProgram", "LPResult", "solve_lp", "FWResult", "frank_wolfe",
    "MinimaxResult", "supergradient_minimax", "eu_supergradient", "eu_maximize",
    "eu_minimax_barrier", "ScalarMin", "minimize_scalar_convex",
]
