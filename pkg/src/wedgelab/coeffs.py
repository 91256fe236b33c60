"""Piecewise-constant-in-time coefficient matrices A(t).

A :class:`CoefficientSchedule` holds breakpoints ``T_1 < ... < T_{N-1}`` and
``N`` symmetric positive definite layers; layer ``k`` is active on
``(T_{k-1}, T_k]`` with ``T_0 = -inf`` and ``T_N = +inf``. Measurable
coefficients are represented by sampling them finely into layers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, NumericalError, ScheduleError
from .geometry import TWO_PI, ConeGeometry

SYMMETRY_TOL = 1e-14


def _check_spd(a, index=None):
    a = np.asarray(a, dtype=float)
    where = "" if index is None else f" (layer {index})"
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ScheduleError(f"matrix must be square{where}, got shape {a.shape}", layer=index)
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(a))):
        raise ScheduleError(f"matrix is not symmetric{where}", layer=index)
    a = 0.5 * (a + a.T)
    w = np.linalg.eigvalsh(a)
    if not np.all(np.isfinite(w)) or w[0] <= 0.0:
        raise ScheduleError(
            f"matrix is not positive definite{where}: smallest eigenvalue {w[0]:.3e}",
            layer=index)
    return a


@dataclass(frozen=True, eq=False)
class CoefficientSchedule:
    """Piecewise constant SPD matrix function of time."""

    breakpoints: np.ndarray
    layers: np.ndarray

    def __init__(self, layers, breakpoints=()):
        layers = [np.asarray(a, dtype=float) for a in layers]
        if not layers:
            raise ScheduleError("a schedule needs at least one layer")
        checked = np.array([_check_spd(a, k) for k, a in enumerate(layers)])
        n = checked.shape[1]
        if n < 1:
            raise ScheduleError("empty matrices")
        bp = np.asarray(breakpoints, dtype=float).reshape(-1)
        if bp.size != len(layers) - 1:
            raise ScheduleError(
                f"{len(layers)} layers need {len(layers) - 1} breakpoints, got {bp.size}")
        if bp.size and (np.any(np.diff(bp) <= 0) or not np.all(np.isfinite(bp))):
            raise ScheduleError("breakpoints must be finite and strictly increasing")
        checked.setflags(write=False)
        bp.setflags(write=False)
        object.__setattr__(self, "layers", checked)
        object.__setattr__(self, "breakpoints", bp)

    @classmethod
    def constant(cls, a):
        return cls([a])

    @classmethod
    def heat(cls, n=2):
        return cls([np.eye(n)])

    @property
    def dimension(self):
        return self.layers.shape[1]

    @property
    def num_layers(self):
        return self.layers.shape[0]

    def layer_index(self, t):
        """Index of the layer active at time ``t`` (left-open intervals)."""
        return int(np.searchsorted(self.breakpoints, t, side="left"))

    def at(self, t):
        return self.layers[self.layer_index(t)]

    def is_breakpoint(self, t, tol=0.0):
        return bool(np.any(np.abs(self.breakpoints - t) <= tol))

    def interval(self, k):
        lo = -np.inf if k == 0 else self.breakpoints[k - 1]
        hi = np.inf if k == self.num_layers - 1 else self.breakpoints[k]
        return lo, hi

    def reversed(self):
        """Schedule of the time-reversed operator, t -> A(-t)."""
        return CoefficientSchedule(self.layers[::-1], -self.breakpoints[::-1])

    def shifted(self, dt):
        return CoefficientSchedule(self.layers, self.breakpoints + dt)

    def conjugated(self, q):
        """Layers Q A Q^T for an orthogonal Q."""
        q = np.asarray(q, dtype=float)
        return CoefficientSchedule([q @ a @ q.T for a in self.layers], self.breakpoints)

    # -- serialization -------------------------------------------------
    def to_dict(self):
        return {"dimension": self.dimension,
                "breakpoints": [float(b) for b in self.breakpoints],
                "layers": [[float(v) for v in a.reshape(-1)] for a in self.layers]}

    @classmethod
    def from_dict(cls, d):
        n = int(d["dimension"])
        layers = []
        for k, flat in enumerate(d["layers"]):
            arr = np.asarray(flat, dtype=float)
            if arr.size != n * n:
                raise ScheduleError(f"layer {k} has {arr.size} entries, expected {n * n}", layer=k)
            layers.append(arr.reshape(n, n))
        return cls(layers, d.get("breakpoints", []))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return (f"CoefficientSchedule(n={self.dimension}, layers={self.num_layers}, "
                f"breakpoints={list(self.breakpoints)})")


def ellipticity_constant(schedule):
    """Largest nu <= 1 with nu|xi|^2 <= xi.A xi <= |xi|^2/nu for every layer."""
    nu = 1.0
    for a in schedule.layers:
        w = np.linalg.eigvalsh(a)
        nu = min(nu, w[0], 1.0 / w[-1])
    return float(nu)


def integrate(schedule, s, t):
    """Exact integral of A over [s, t]."""
    if t < s:
        raise ArgumentError(f"integrate needs s <= t, got s={s}, t={t}")
    n = schedule.dimension
    out = np.zeros((n, n))
    if t == s:
        return out
    edges = np.concatenate(([-np.inf], schedule.breakpoints, [np.inf]))
    lo = np.maximum(edges[:-1], s)
    hi = np.minimum(edges[1:], t)
    lengths = np.clip(hi - lo, 0.0, None)
    for k in np.nonzero(lengths)[0]:
        out += lengths[k] * schedule.layers[k]
    return 0.5 * (out + out.T)


def canonical_transform(a):
    """Symmetric S = A^{-1/2}, so that S A S^T = I."""
    a = _check_spd(a)
    w, v = np.linalg.eigh(a)
    s = (v / np.sqrt(w)) @ v.T
    s = 0.5 * (s + s.T)
    resid = np.max(np.abs(s @ a @ s.T - np.eye(a.shape[0])))
    if resid > 1e-12 * max(1.0, np.linalg.cond(a)):
        raise NumericalError(f"canonical transform residual {resid:.3e}",
                             report={"residual": float(resid)})
    return s


def _ccw_angle(u, v):
    """Counter-clockwise angle from u to v in [0, 2pi)."""
    ang = np.arctan2(u[0] * v[1] - u[1] * v[0], u @ v)
    return ang % TWO_PI


def transformed_sector(a, sector):
    """Opening angle of the image of a planar sector under A^{-1/2}.

    The angle is measured on the side containing the image of the bisector.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (2, 2) or sector.m != 2:
        raise ArgumentError("transformed_sector needs a 2x2 matrix and a planar sector")
    s = canonical_transform(a)
    r1, r2 = sector.ray_directions()
    b = np.asarray(sector.orientation)
    i1, i2, ib = s @ r1, s @ r2, s @ b
    if min(np.linalg.norm(i1), np.linalg.norm(i2)) < 1e-300:
        raise NumericalError("degenerate image ray")
    if sector.theta >= TWO_PI:
        return TWO_PI
    angle = _ccw_angle(i1, ib) + _ccw_angle(ib, i2)
    return float(angle)
