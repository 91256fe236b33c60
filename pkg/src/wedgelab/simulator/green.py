"""Discrete sector Green function and empirical Green-function bounds."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..coeffs import ellipticity_constant
from ..errors import ArgumentError
from ..kernel import sigma_ladder
from .solver import solve_sector


def _source_index(grid, y, min_gap=4):
    k = grid.node_of(y)
    if k < 0 or np.max(np.abs(grid.points[k] - np.asarray(y, dtype=float))) > 1e-9 * max(1, grid.h):
        raise ArgumentError(f"source point {y} is not an interior lattice node")
    if grid.distance_to_boundary()[k] < min_gap * grid.h * (1 - 1e-12):
        raise ArgumentError(f"source node {y} is closer than {min_gap}h to the boundary")
    return k


def discrete_green(schedule, grid, y, s, horizon, dt, snapshots=None, **kw):
    """Solve from the discrete delta 1/h^2 at node ``y`` at time ``s`` with
    zero boundary data; the result approximates Gamma_K(., y; t, s)."""
    k = _source_index(grid, y)
    u0 = np.zeros(grid.size)
    u0[k] = 1.0 / grid.h ** 2
    field = solve_sector(schedule, grid, initial=u0, horizon=horizon, dt=dt, t0=s,
                         snapshots=snapshots, **kw)
    field.meta.update({"source": [float(v) for v in grid.points[k]], "s": float(s)})
    return field


def discrete_mass(field):
    """h^2 times the nodal sum, per snapshot."""
    return field.grid.h ** 2 * field.values.sum(axis=1)


def edge_ratio(points, tau):
    """R_x = |x'| / (|x'| + sqrt(t - s))."""
    r = np.hypot(points[..., 0], points[..., 1])
    return r / (r + np.sqrt(tau))


@dataclass
class GreenBoundReport:
    C: float
    sigma: float
    lambda_plus: float
    lambda_minus: float
    worst: dict
    samples: int

    def to_dict(self):
        return asdict(self)


def _ratios(field, lambda_plus, lambda_minus, tau_min, rel_threshold):
    grid = field.grid
    y = np.asarray(field.meta["source"])
    s = field.meta["s"]
    peak = np.max(field.values[field.times - s >= tau_min]) if np.any(field.times - s >= tau_min) else 0
    rows = []
    for t, u in zip(field.times, field.values):
        tau = t - s
        if tau < tau_min:
            continue
        keep = u > rel_threshold * peak
        if not np.any(keep):
            continue
        x = grid.points[keep]
        base = (edge_ratio(x, tau) ** lambda_plus * edge_ratio(y, tau) ** lambda_minus) / tau
        xi2 = np.sum((x - y) ** 2, axis=1) / tau
        rows.append((u[keep] / base, xi2, np.full(len(x), t), x))
    if not rows:
        raise ArgumentError("no admissible samples for the Green-function bound")
    ratio = np.concatenate([r[0] for r in rows])
    xi2 = np.concatenate([r[1] for r in rows])
    ts = np.concatenate([r[2] for r in rows])
    xs = np.concatenate([r[3] for r in rows])
    return ratio, xi2, ts, xs


def green_bound_check(field, lambda_plus, lambda_minus, sigma=None, tau_min=None,
                      rel_threshold=1e-8, tail_fraction=0.9):
    """Empirical constant C in

        Gamma_K <= C R_x^{l+} R_y^{l-} (t-s)^{-1} exp(-sigma |x-y|^2/(t-s)).

    Without ``sigma``, the rate is the first ladder entry nu/8 * 2^-j for
    which the sampled ratio does not grow over the outer tail of the
    sampled |x-y|^2/(t-s) range. Pass the same ``sigma`` when comparing
    refinements.
    """
    tau_min = 4 * field.dt if tau_min is None else tau_min
    ratio, xi2, ts, xs = _ratios(field, lambda_plus, lambda_minus, tau_min, rel_threshold)
    if sigma is None:
        nu = ellipticity_constant(field.schedule)
        tail = xi2 >= tail_fraction * xi2.max()
        for sigma in sigma_ladder(nu):
            w = ratio * np.exp(sigma * xi2)
            if not np.any(tail) or np.all(tail) or w[tail].max() <= w[~tail].max():
                break
    w = ratio * np.exp(sigma * xi2)
    k = int(np.argmax(w))
    worst = {"x": [float(v) for v in xs[k]], "t": float(ts[k]),
             "t_minus_s": float(ts[k] - field.meta["s"]), "ratio": float(w[k])}
    return GreenBoundReport(float(w[k]), float(sigma), float(lambda_plus),
                            float(lambda_minus), worst, int(len(w)))


def reversal_pairs(schedule, make_grid, x, y, s, t, dt):
    """Gamma-hat_K(x, y; t, s) for the time-reversed schedule against
    Gamma_K(y, x; -s, -t) for the original one, from two simulations."""
    g = make_grid()
    hat = discrete_green(schedule.reversed(), g, y, s, t, dt, snapshots=[t])
    direct = discrete_green(schedule, g, x, -t, -s, dt, snapshots=[-s])
    kx, ky = g.node_of(x), g.node_of(y)
    return float(hat.values[-1][kx]), float(direct.values[-1][ky])
