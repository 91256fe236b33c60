"""Log-log regression of the vertex decay of a discrete field."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ArgumentError, NumericalError

MIN_RADII = 8


@dataclass
class ExponentFit:
    lambda_hat: float
    r_window: tuple
    residual: float
    kappa: float
    n_radii: int
    intercept: float
    t_eval: float
    per_snapshot: list = None

    def to_dict(self):
        d = asdict(self)
        d["r_window"] = list(self.r_window)
        return d


def shell_maxima(values, radius, h, r_min, r_max):
    """Radii r_k = r_min + k h <= r_max and M(r_k) = max |u| over r_k <= |x| < r_k + h."""
    radii = r_min + h * np.arange(int(np.floor((r_max - r_min) / h + 1e-9)) + 1)
    shell = np.floor((radius - r_min) / h + 1e-12).astype(np.int64)
    ok = (shell >= 0) & (shell < len(radii))
    m = np.zeros(len(radii))
    np.maximum.at(m, shell[ok], np.abs(values[ok]))
    return radii, m


def fit_power(radii, m):
    """Least-squares slope of log m against log r; returns (slope, intercept, rms)."""
    x, y = np.log(radii), np.log(m)
    design = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    rms = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    return float(coef[0]), float(coef[1]), rms


def fit_values(values, grid, r_window, t_eval=float("nan")):
    r_min, r_max = (float(v) for v in r_window)
    if not (0 < r_min < r_max <= grid.R_outer / 2 * (1 + 1e-12)):
        raise ArgumentError(f"fit window {r_window} must satisfy 0 < r_min < r_max <= R/2")
    radii, m = shell_maxima(values, grid.radius, grid.h, r_min, r_max)
    if len(radii) < MIN_RADII:
        raise ArgumentError(f"fit window holds {len(radii)} radii, need at least {MIN_RADII}")
    if np.any(m <= 0):
        raise NumericalError("degenerate field: M(r) = 0 inside the fit window",
                             report={"zero_radii": radii[m <= 0].tolist()})
    slope, icpt, rms = fit_power(radii, m)
    return ExponentFit(slope, (r_min, r_max), rms, r_max / grid.R_outer, len(radii), icpt,
                       float(t_eval))


def fit_exponent(field, r_window, t_eval):
    """Fitted vertex exponent of ``field`` at one or several snapshot times.

    With several times the smallest slope is returned: the decay rate must
    hold at every time, so the worst snapshot decides.
    """
    times = np.atleast_1d(np.asarray(t_eval, dtype=float))
    fits = [fit_values(field.snapshot(t), field.grid, r_window, t) for t in times]
    best = min(fits, key=lambda f: f.lambda_hat)
    if len(fits) > 1:
        best.per_snapshot = [{"t": f.t_eval, "lambda_hat": f.lambda_hat,
                              "residual": f.residual} for f in fits]
    return best
