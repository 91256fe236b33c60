"""Finite-difference experiments on planar sectors."""

from .fit import ExponentFit, fit_exponent, fit_values, shell_maxima
from .green import (GreenBoundReport, discrete_green, discrete_mass, edge_ratio,
                    green_bound_check, reversal_pairs)
from .grid import SectorGrid
from .solver import GridField, OperatorAssembly, check_m_matrix, solve_sector

__all__ = [
    "ExponentFit", "GreenBoundReport", "GridField", "OperatorAssembly", "SectorGrid",
    "check_m_matrix", "discrete_green", "discrete_mass", "edge_ratio", "fit_exponent",
    "fit_values", "green_bound_check", "reversal_pairs", "shell_maxima", "solve_sector",
]
