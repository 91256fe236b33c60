"""Weighted norms, the coercivity scan and the appendix inequalities."""

from .appendix import (aux_integral, caccioppoli_check, gradient_interpolation_check,
                       hardy_check, hardy_passes, random_bump, sine_profile)
from .coercivity import BumpSource, coercivity_scan, default_family, window, worst_ratios
from .norms import (MixedNormAccumulator, WeightedNormSpec, gradient, hessian, sobolev_norm,
                    weighted_norm)

__all__ = [
    "BumpSource", "MixedNormAccumulator", "WeightedNormSpec", "aux_integral",
    "caccioppoli_check", "coercivity_scan", "default_family", "gradient",
    "gradient_interpolation_check", "hardy_check", "hardy_passes", "hessian",
    "random_bump", "sine_profile", "sobolev_norm", "weighted_norm", "window", "worst_ratios",
]
