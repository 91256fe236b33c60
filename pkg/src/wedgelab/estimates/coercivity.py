"""Refinement study of the weighted coercive estimate.

For each source in a family and each weight exponent mu the ratio

    rho(mu, h) = ||u||_{W^{2,1}_{p,q,(mu)}} / || |x|^mu f ||_{p,q}

is accumulated while the solution is stepped. Inside the admissible
window the ratios stay bounded as h -> 0; a source that shrinks towards
the vertex with the grid probes the window ends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..coeffs import CoefficientSchedule
from ..errors import ArgumentError
from ..simulator.grid import SectorGrid
from ..simulator.solver import OperatorAssembly, solve_sector
from ..spectral import piecewise_lambda
from .norms import MixedNormAccumulator, WeightedNormSpec, hessian_norm, space_weights


def _bump(s):
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True)
class BumpSource:
    """Smooth bump in space times a smooth bump in time.

    ``distance`` is the distance of the centre from the vertex along the
    bisector; with ``grid_units`` set it is measured in mesh widths so that
    the bump shrinks with the grid.
    """

    label: str
    distance: float
    width_factor: float = 0.6
    t_on: float = 0.0
    t_off: float = 0.1
    grid_units: bool = False

    def geometry(self, grid):
        d = self.distance * grid.h if self.grid_units else self.distance
        half = 0.5 * min(grid.sector.theta, np.pi) if grid.sector is not None else np.pi / 2
        w = self.width_factor * d * np.sin(half)
        w = min(w, 0.9 * (grid.R_outer - d))
        o = np.asarray(grid.sector.orientation if grid.sector is not None else (1.0, 0.0))
        return d * o, w

    def space_profile(self, grid, points):
        c, w = self.geometry(grid)
        return _bump(np.linalg.norm(points - c, axis=-1) / w)

    def time_profile(self, t):
        mid = 0.5 * (self.t_on + self.t_off)
        half = 0.5 * (self.t_off - self.t_on)
        return float(_bump(np.array([(t - mid) / half]))[0])


def default_family():
    return (BumpSource("near", 0.15), BumpSource("middle", 0.3), BumpSource("far", 0.5),
            BumpSource("vertex", 8.0, grid_units=True))


def window(p, lambda_plus, lambda_minus, m=2):
    """Admissible weights  2 - m/p - l+ < mu < m - m/p + l-."""
    return 2 - m / p - lambda_plus, m - m / p + lambda_minus


@dataclass
class ScanRow:
    mu: float
    h: float
    source: str
    ratio: float
    norm_u: float
    norm_f: float
    inside_window: bool


def run_source(schedule, grid, source, specs, horizon, dt, assembly=None):
    """Solve with one source and return {mu: (norm_u, norm_f)} for ``specs``."""
    w = space_weights(grid)
    r = grid.radius
    prof = source.space_profile(grid, grid.points)
    accs = {}
    for spec in specs:
        accs[spec.mu] = [MixedNormAccumulator(spec, w),
                         MixedNormAccumulator(spec, w),
                         MixedNormAccumulator(spec.with_mu(spec.mu - 2), w),
                         MixedNormAccumulator(spec, w)]
    weights = {spec.mu: (r ** spec.mu, r ** (spec.mu - 2)) for spec in specs}
    zero_b = np.zeros(len(grid.boundary_points))

    def f(points, t):
        return source.time_profile(t) * prof

    def step(n, t, u_old, u, bnd):
        ut = (u - u_old) / dt
        hs = hessian_norm(grid, u, zero_b)
        fv = f(None, t)
        for mu, (a_dt, a_h, a_v, a_f) in accs.items():
            wm, wm2 = weights[mu]
            a_dt.add(wm * ut, dt)
            a_h.add(wm * hs, dt)
            a_v.add(wm2 * u, dt)
            a_f.add(wm * fv, dt)

    solve_sector(schedule, grid, horizon=horizon, dt=dt, source=f, callback=step,
                 snapshots=[horizon], assembly=assembly)
    return {mu: (a[0].result() + a[1].result() + a[2].result(), a[3].result())
            for mu, a in accs.items()}


def coercivity_scan(schedule, sector, mus, hs, family=None, p=2.0, q=2.0, mode="plain",
                    R_outer=1.0, horizon=0.3, dt_factor=0.125):
    """Table of ratios rho(mu, h) for every source of the family.

    Time steps are ``dt = dt_factor * h``. Window endpoints are taken from
    the exponent of the schedule.
    """
    if not isinstance(schedule, CoefficientSchedule):
        raise ArgumentError("schedule must be a CoefficientSchedule")
    family = default_family() if family is None else family
    rep = piecewise_lambda(schedule, sector)
    lo, hi = window(p, rep.lambda_piecewise, rep.lambda_minus)
    specs = [WeightedNormSpec(p, q, float(mu), mode) for mu in mus]
    rows = []
    for h in hs:
        grid = SectorGrid(sector, h, R_outer)
        dt = dt_factor * h
        steps = round(horizon / dt)
        assembly = OperatorAssembly(grid)
        for src in family:
            res = run_source(schedule, grid, src, specs, steps * dt, dt, assembly)
            for mu, (nu_, nf) in res.items():
                rows.append(ScanRow(mu, float(h), src.label, nu_ / nf, nu_, nf, lo < mu < hi))
    return {"window": (lo, hi), "rows": rows}


def worst_ratios(table):
    """max over sources of the ratio, keyed by (mu, h)."""
    out = {}
    for row in table["rows"]:
        key = (row.mu, row.h)
        out[key] = max(out.get(key, 0.0), row.ratio)
    return out
