"""Masked Cartesian grids over planar sectors with exact boundary cut points.

Interior nodes are the lattice points ``h * (i, j)`` strictly inside the
sector and the disk of radius ``R_outer``. For every interior node and each
of the four lattice directions (two axes, two diagonals) we record, on both
sides, either the neighbouring interior node or the point where the segment
first leaves the domain together with the arm fraction ``a`` in (0, 1]
(the distance to that point in units of the lattice step along the
direction). This is the information needed by Shortley-Weller differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError
from ..geometry import TWO_PI, ConeGeometry

DIRECTIONS = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
RAY, ARC = 0, 1
_TOL = 1e-12


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


@dataclass
class Arm:
    """One side of one direction for all interior nodes."""

    neighbor: np.ndarray   # interior index or -1
    fraction: np.ndarray   # arm length in lattice steps, 1 for interior neighbours
    boundary: np.ndarray   # boundary point index or -1


class SectorGrid:
    """Cut-cell Cartesian discretization of (sector or plane) ∩ disk.

    Parameters
    ----------
    sector : ConeGeometry or None
        Planar sector; ``None`` gives the whole disk (no rays).
    h : float
        Lattice spacing.
    R_outer : float
        Radius of the truncating disk.
    """

    def __init__(self, sector, h, R_outer=1.0):
        if sector is not None and (sector.m != 2 or sector.n != 2):
            raise ArgumentError("the simulator supports planar sectors with m = n = 2 only")
        if h <= 0 or R_outer <= 0:
            raise ArgumentError("h and R_outer must be positive")
        if h > R_outer / 32 * (1 + 1e-12):
            raise ArgumentError(f"h = {h} exceeds R_outer/32 = {R_outer / 32}")
        self.sector = sector
        self.h = float(h)
        self.R_outer = float(R_outer)
        self.M = int(np.ceil(R_outer / h)) + 1
        self._build()

    # -- construction ------------------------------------------------------
    def _inside(self, pts):
        r = np.hypot(pts[..., 0], pts[..., 1])
        ok = r < self.R_outer * (1 - _TOL)
        if self.sector is not None:
            ang = np.abs(self.sector.relative_angle(pts))
            ok &= (r > 0) & (ang < 0.5 * self.sector.theta - _TOL)
        return ok

    def _rays(self):
        if self.sector is None:
            return np.zeros((0, 2))
        if self.sector.theta >= TWO_PI:
            a = self.sector.bisector_angle + np.pi
            return np.array([[np.cos(a), np.sin(a)]])
        return self.sector.ray_directions()

    def _build(self):
        h, M = self.h, self.M
        ii, jj = np.meshgrid(np.arange(-M, M + 1), np.arange(-M, M + 1), indexing="ij")
        pts = np.stack([ii * h, jj * h], axis=-1)
        mask = self._inside(pts)
        self.mask = mask
        self.ij = np.stack([ii[mask], jj[mask]], axis=-1)
        self.points = pts[mask]
        self.size = len(self.points)
        if self.size == 0:
            raise ArgumentError("grid has no interior nodes")
        self.index = np.full(mask.shape, -1, dtype=np.int64)
        self.index[mask] = np.arange(self.size)
        self.radius = np.hypot(self.points[:, 0], self.points[:, 1])

        rays = self._rays()
        bpts, bkind = [], []
        self.arms = []
        for e in DIRECTIONS:
            pair = []
            for sign in (1.0, -1.0):
                step = sign * e * h
                frac = np.full(self.size, np.inf)
                kind = np.full(self.size, -1)
                p = self.points
                for d in rays:
                    den = _cross(step, d)
                    if abs(den) < 1e-300:
                        continue
                    a = -_cross(p, d) / den
                    rho = _cross(p, step) / _cross(d, step)
                    hit = (a > _TOL) & (a <= 1 + _TOL) & (rho >= -_TOL) & (a < frac)
                    frac = np.where(hit, a, frac)
                    kind = np.where(hit, RAY, kind)
                # circle |p + a*step| = R
                ss = step @ step
                pe = p @ step
                disc = pe ** 2 - ss * (self.radius ** 2 - self.R_outer ** 2)
                a = (-pe + np.sqrt(np.maximum(disc, 0.0))) / ss
                hit = (a > _TOL) & (a <= 1 + _TOL) & (a < frac)
                frac = np.where(hit, a, frac)
                kind = np.where(hit, ARC, kind)
                cut = np.isfinite(frac)
                nb = np.full(self.size, -1, dtype=np.int64)
                q = self.ij + (sign * e).astype(np.int64)
                nb[~cut] = self.index[q[~cut, 0] + M, q[~cut, 1] + M]
                if np.any(nb[~cut] < 0):
                    bad = np.nonzero(~cut & (nb < 0))[0][0]
                    raise ArgumentError(f"unclassified neighbour at node {self.points[bad]}")
                bidx = np.full(self.size, -1, dtype=np.int64)
                if np.any(cut):
                    start = sum(len(b) for b in bpts)
                    loc = np.nonzero(cut)[0]
                    cp = p[loc] + frac[loc, None] * step
                    # snap fractions at lattice resolution back to exact values
                    if self.sector is not None:
                        cp[kind[loc] == RAY] = self._project_to_rays(cp[kind[loc] == RAY], rays)
                    bpts.append(cp)
                    bkind.append(kind[loc])
                    bidx[loc] = start + np.arange(len(loc))
                frac = np.where(cut, frac, 1.0)
                pair.append(Arm(nb, frac, bidx))
            self.arms.append(tuple(pair))
        self.boundary_points = np.concatenate(bpts) if bpts else np.zeros((0, 2))
        self.boundary_kind = np.concatenate(bkind) if bkind else np.zeros(0, dtype=int)

    @staticmethod
    def _project_to_rays(pts, rays):
        best = None
        out = pts.copy()
        for d in rays:
            proj = np.maximum(pts @ d, 0.0)[:, None] * d[None, :]
            dist = np.linalg.norm(pts - proj, axis=1)
            if best is None:
                best, out = dist, proj
            else:
                take = dist < best
                best = np.where(take, dist, best)
                out = np.where(take[:, None], proj, out)
        return out

    # -- queries -------------------------------------------------------------
    def boundary_values(self, arc_data, t):
        """Dirichlet data at the cut points: zero on rays, ``arc_data`` on the arc."""
        vals = np.zeros(len(self.boundary_points))
        arc = self.boundary_kind == ARC
        if arc_data is not None and np.any(arc):
            vals[arc] = np.asarray(arc_data(self.boundary_points[arc], t), dtype=float)
        return vals

    def node_of(self, point):
        """Interior index of the lattice node nearest to ``point``."""
        ij = np.rint(np.asarray(point, dtype=float) / self.h).astype(int)
        if np.any(np.abs(ij) > self.M):
            return -1
        return int(self.index[ij[0] + self.M, ij[1] + self.M])

    def distance_to_boundary(self):
        """Distance of each interior node to the rays and the arc."""
        d = self.R_outer - self.radius
        for ray in self._rays():
            proj = np.maximum(self.points @ ray, 0.0)
            d = np.minimum(d, np.linalg.norm(self.points - proj[:, None] * ray, axis=1))
        return d

    def cell_fractions(self, sub=8):
        """Fraction of each node's cell [x - h/2, x + h/2]^2 inside the domain,
        estimated on a ``sub`` x ``sub`` midpoint lattice."""
        off = (np.arange(sub) + 0.5) / sub - 0.5
        ox, oy = np.meshgrid(off, off, indexing="ij")
        o = np.stack([ox.ravel(), oy.ravel()], axis=-1) * self.h
        frac = np.zeros(self.size)
        for dv in o:
            frac += self._inside(self.points + dv)
        return frac / len(o)

    def describe(self):
        return {"h": self.h, "R_outer": self.R_outer,
                "sector": None if self.sector is None else self.sector.to_dict(),
                "interior_nodes": int(self.size),
                "boundary_points": int(len(self.boundary_points))}
