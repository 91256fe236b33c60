"""Cone and wedge geometry.

A cone ``K`` in R^m is described by its opening angle and the direction of
its axis (bisector). For ``m = 2`` the cone is a planar sector and ``theta``
is the full opening angle in ``(0, 2*pi]``; ``theta = 2*pi`` is the crack
(plane slit along one ray). For ``m = 3`` the cone is circular and
``theta`` is the half-angle between the axis and the lateral surface, in
``(0, pi)``. The ambient dimension ``n >= m`` describes the wedge
``K x R^(n-m)``; it never changes any exponent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ConeGeometry:
    m: int
    theta: float
    orientation: tuple = field(default=None)
    n: int = None

    def __post_init__(self):
        if self.m not in (2, 3):
            raise ArgumentError(f"cone dimension m must be 2 or 3, got {self.m}")
        theta = float(self.theta)
        if self.m == 2 and not (0.0 < theta <= TWO_PI * (1 + 1e-15)):
            raise ArgumentError(f"sector opening must lie in (0, 2pi], got {theta}")
        if self.m == 3 and not (0.0 < theta < np.pi):
            raise ArgumentError(f"cap half-angle must lie in (0, pi), got {theta}")
        object.__setattr__(self, "theta", min(theta, TWO_PI))
        if self.orientation is None:
            e1 = np.zeros(self.m)
            e1[0] = 1.0
            object.__setattr__(self, "orientation", tuple(e1))
        o = np.asarray(self.orientation, dtype=float)
        if o.shape != (self.m,):
            raise ArgumentError("orientation must be a vector of length m")
        norm = np.linalg.norm(o)
        if abs(norm - 1.0) > 1e-12:
            raise ArgumentError(f"orientation must be a unit vector, |o| = {norm}")
        object.__setattr__(self, "orientation", tuple(float(v) for v in o))
        n = self.m if self.n is None else int(self.n)
        if n < self.m:
            raise ArgumentError(f"ambient dimension n={n} is smaller than m={self.m}")
        object.__setattr__(self, "n", n)

    @classmethod
    def sector(cls, theta, bisector_angle=0.0, n=2):
        """Planar sector of opening ``theta`` whose bisector makes angle
        ``bisector_angle`` with the x1-axis."""
        o = (float(np.cos(bisector_angle)), float(np.sin(bisector_angle)))
        return cls(m=2, theta=theta, orientation=o, n=n)

    @property
    def bisector_angle(self):
        if self.m != 2:
            raise ArgumentError("bisector_angle is defined for planar sectors only")
        return float(np.arctan2(self.orientation[1], self.orientation[0]))

    def ray_angles(self):
        """Polar angles of the two boundary rays (m = 2)."""
        phi0 = self.bisector_angle
        return phi0 - 0.5 * self.theta, phi0 + 0.5 * self.theta

    def ray_directions(self):
        a, b = self.ray_angles()
        return np.array([[np.cos(a), np.sin(a)], [np.cos(b), np.sin(b)]])

    def relative_angle(self, points):
        """Angle of ``points`` measured from the bisector, in (-pi, pi]."""
        p = np.asarray(points, dtype=float)
        if self.m == 2:
            ang = np.arctan2(p[..., 1], p[..., 0]) - self.bisector_angle
            return np.angle(np.exp(1j * ang))
        o = np.asarray(self.orientation)
        r = np.linalg.norm(p[..., :3], axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.clip(p[..., :3] @ o / r, -1.0, 1.0)
        return np.arccos(c)

    def contains(self, points, tol=0.0):
        """True for points strictly inside the cone (×R^(n-m)) by more than
        ``tol`` in angle."""
        p = np.asarray(points, dtype=float)
        r = np.linalg.norm(p[..., : self.m], axis=-1)
        ang = np.abs(self.relative_angle(p))
        half = 0.5 * self.theta if self.m == 2 else self.theta
        return (r > 0) & (ang < half - tol)

    def is_acute(self):
        """Closure minus the vertex lies in an open half-space."""
        return self.theta < np.pi if self.m == 2 else self.theta < 0.5 * np.pi

    def acute_half_angle(self):
        """Half-angle of the smallest circular cone about the axis containing K."""
        return 0.5 * self.theta if self.m == 2 else self.theta

    def to_dict(self):
        return {"m": self.m, "theta": self.theta,
                "orientation": list(self.orientation), "n": self.n}

    @classmethod
    def from_dict(cls, d):
        return cls(m=int(d["m"]), theta=float(d["theta"]),
                   orientation=tuple(d["orientation"]) if d.get("orientation") else None,
                   n=d.get("n"))
