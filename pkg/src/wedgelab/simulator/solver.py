"""Implicit Euler for  d_t u = A(t):D^2 u + f  on a cut-cell sector grid.

The operator is split into nonnegative directional second derivatives,

    A:D^2 = (A11 - |A12|) d_11 + (A22 - |A12|) d_22 + |A12| d_vv,
    v = (1, sign A12),

and every directional term uses the three-point Shortley-Weller difference
with exact arm fractions. Off-diagonal entries of the discrete operator are
then nonnegative, so  I - dt L  is an M-matrix whenever
|A12| <= min(A11, A22).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import ArgumentError, NumericalError, ScheduleError


def _directional_operator(grid, k):
    """Sparse interior matrix and boundary coupling for direction ``k``."""
    h2 = grid.h ** 2
    plus, minus = grid.arms[k]
    a, b = plus.fraction, minus.fraction
    scale = 2.0 / ((a + b) * h2)
    wp = scale / a
    wm = scale / b
    n = grid.size
    rows = np.arange(n)
    diag = -(wp + wm)
    r_i, c_i, v_i = [rows], [rows], [diag]
    r_b, c_b, v_b = [], [], []
    for arm, w in ((plus, wp), (minus, wm)):
        inner = arm.neighbor >= 0
        r_i.append(rows[inner])
        c_i.append(arm.neighbor[inner])
        v_i.append(w[inner])
        r_b.append(rows[~inner])
        c_b.append(arm.boundary[~inner])
        v_b.append(w[~inner])
    L = sp.csr_matrix((np.concatenate(v_i), (np.concatenate(r_i), np.concatenate(c_i))),
                      shape=(n, n))
    B = sp.csr_matrix((np.concatenate(v_b), (np.concatenate(r_b), np.concatenate(c_b))),
                      shape=(n, len(grid.boundary_points)))
    return L, B


class OperatorAssembly:
    """Caches the four directional operators of a grid."""

    def __init__(self, grid):
        self.grid = grid
        self.parts = [_directional_operator(grid, k) for k in range(4)]

    def weights(self, a):
        a = np.asarray(a, dtype=float)
        c = abs(a[0, 1])
        w = np.array([a[0, 0] - c, a[1, 1] - c, 0.0, 0.0])
        w[2 if a[0, 1] >= 0 else 3] = c
        return w

    def operator(self, a, layer=None):
        if a.shape != (2, 2):
            raise ScheduleError("simulator layers must be 2x2", layer=layer)
        w = self.weights(a)
        if np.any(w < -1e-14):
            raise ScheduleError(
                f"layer {layer}: |A12| = {abs(a[0, 1]):.6g} exceeds min(A11, A22) = "
                f"{min(a[0, 0], a[1, 1]):.6g}; the directional split is not monotone "
                f"at any node (e.g. {self.grid.points[0].tolist()})", layer=layer)
        w = np.maximum(w, 0.0)
        L = sum(wk * Lk for wk, (Lk, _) in zip(w, self.parts) if wk)
        B = sum(wk * Bk for wk, (_, Bk) in zip(w, self.parts) if wk)
        return L.tocsr(), B.tocsr()


def check_m_matrix(matrix, grid=None):
    """Raise unless ``matrix`` has positive diagonal, nonpositive
    off-diagonal entries and weak row diagonal dominance."""
    m = matrix.tocoo()
    off = m.row != m.col
    if np.any(m.data[off] > 0):
        k = int(m.row[off][np.argmax(m.data[off])])
        where = grid.points[k].tolist() if grid is not None else k
        raise NumericalError(f"positive off-diagonal entry at node {where}",
                             report={"node": where})
    d = matrix.diagonal()
    offsum = np.asarray(abs(matrix).sum(axis=1)).ravel() - np.abs(d)
    bad = (d <= 0) | (d < offsum * (1 - 1e-12))
    if np.any(bad):
        k = int(np.nonzero(bad)[0][0])
        where = grid.points[k].tolist() if grid is not None else k
        raise NumericalError(f"matrix is not diagonally dominant at node {where}",
                             report={"node": where})
    return True


@dataclass
class GridField:
    """Snapshots of a discrete solution on a :class:`SectorGrid`."""

    grid: object
    times: np.ndarray
    values: np.ndarray
    boundary: np.ndarray
    schedule: object = None
    dt: float = None
    meta: dict = field(default_factory=dict)

    def snapshot(self, t, tol=1e-9):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise ArgumentError(f"no snapshot at t = {t}")
        return self.values[k]

    def scaled(self, c):
        return GridField(self.grid, self.times, c * self.values, c * self.boundary,
                         self.schedule, self.dt, dict(self.meta))


def _steps(t0, horizon, dt):
    n = horizon - t0
    count = int(round(n / dt))
    if count < 1 or abs(count * dt - n) > 1e-9 * max(1.0, abs(n)):
        raise ArgumentError(f"horizon {horizon} - t0 {t0} is not a multiple of dt = {dt}")
    return count


def solve_sector(schedule, grid, initial=None, arc_data=None, horizon=1.0, dt=None,
                 t0=0.0, source=None, snapshots=None, callback=None, check_monotone=True,
                 assembly=None):
    """Implicit Euler on ``(t0, horizon]``; returns a :class:`GridField`.

    Parameters
    ----------
    initial : array or callable, optional
        Nodal values at ``t0`` or a function of an (N, 2) point array.
    arc_data : callable, optional
        ``g(points, t)`` on the outer arc; rays always carry zero data.
    source : callable, optional
        ``f(points, t)``, evaluated at the new time level.
    snapshots : sequence of float, optional
        Output times (step boundaries). Defaults to ``[horizon]``.
    callback : callable, optional
        Called as ``callback(n, t, u_old, u, boundary)`` after each step.
    """
    dt = grid.h ** 2 if dt is None else float(dt)
    nsteps = _steps(t0, horizon, dt)
    for T in schedule.breakpoints:
        if t0 < T < horizon:
            k = (T - t0) / dt
            if abs(k - round(k)) > 1e-7:
                raise ArgumentError(f"breakpoint {T} is not aligned with dt = {dt}")
    if schedule.dimension != 2:
        raise ArgumentError("the simulator needs a 2x2 schedule")
    assembly = assembly or OperatorAssembly(grid)
    pts = grid.points
    if initial is None:
        u = np.zeros(grid.size)
    elif callable(initial):
        u = np.asarray(initial(pts), dtype=float).copy()
    else:
        u = np.asarray(initial, dtype=float).copy()
    if u.shape != (grid.size,):
        raise ArgumentError("initial data has the wrong shape")
    snapshots = [horizon] if snapshots is None else list(snapshots)
    snap_steps = set()
    for s in snapshots:
        k = int(round((s - t0) / dt))
        if abs(t0 + k * dt - s) > 1e-9 * max(1.0, abs(s)) or not (0 <= k <= nsteps):
            raise ArgumentError(f"snapshot time {s} is not a step boundary")
        snap_steps.add(k)
    times, values, bvals = [], [], []

    def record(k, t, vec, bnd):
        if k in snap_steps:
            times.append(t)
            values.append(vec.copy())
            bvals.append(bnd.copy())

    record(0, t0, u, grid.boundary_values(arc_data, t0))
    eye = sp.identity(grid.size, format="csc")
    cache = {}
    for n in range(1, nsteps + 1):
        t = t0 + n * dt
        layer = schedule.layer_index(t - 0.5 * dt)
        if layer not in cache:
            L, B = assembly.operator(schedule.layers[layer], layer)
            system = (eye - dt * L).tocsc()
            if check_monotone:
                check_m_matrix(system, grid)
            try:
                lu = splu(system)
            except RuntimeError as exc:
                raise NumericalError(f"factorization failed for layer {layer}: {exc}",
                                     report={"layer": layer}) from exc
            cache = {layer: (lu, B)}
        lu, B = cache[layer]
        bnd = grid.boundary_values(arc_data, t)
        rhs = u + dt * (B @ bnd)
        if source is not None:
            rhs += dt * np.asarray(source(pts, t), dtype=float)
        u_new = lu.solve(rhs)
        if not np.all(np.isfinite(u_new)):
            raise NumericalError("non-finite values after linear solve", report={"step": n})
        if callback is not None:
            callback(n, t, u, u_new, bnd)
        u = u_new
        record(n, t, u, bnd)
    return GridField(grid, np.array(times), np.array(values), np.array(bvals),
                     schedule, dt, {"t0": t0, "horizon": horizon})
