"""Numerical experiments for parabolic Dirichlet problems in cones and wedges
with coefficients that depend measurably on time."""

from .coeffs import (CoefficientSchedule, canonical_transform, ellipticity_constant,
                     integrate, transformed_sector)
from .errors import (ArgumentError, CertificationError, ConfigError, NumericalError,
                     ScheduleError, WedgeLabError)
from .geometry import ConeGeometry

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "CertificationError", "CoefficientSchedule", "ConeGeometry",
    "ConfigError", "NumericalError", "ScheduleError", "WedgeLabError",
    "canonical_transform", "ellipticity_constant", "integrate", "transformed_sector",
]
