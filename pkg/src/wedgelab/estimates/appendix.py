"""Hardy, Caccioppoli, gradient-interpolation and auxiliary-integral checks."""

from __future__ import annotations

import numpy as np
from scipy import integrate as spi
from scipy.interpolate import BSpline

from ..errors import ArgumentError
from ..geometry import ConeGeometry
from .norms import (WeightedNormSpec, gradient_norm, space_weights, sobolev_norm,
                    trapezoid_weights, weighted_norm)

HARDY_SLACK = 0.02


# -- Hardy inequality ---------------------------------------------------------

def _lattice(grid):
    M = grid.M
    c = np.arange(-M, M + 1) * grid.h
    X, Y = np.meshgrid(c, c, indexing="ij")
    return np.stack([X, Y], axis=-1)


def _assert_vanishes(f, grid, tol=1e-10):
    sec = grid.sector
    s = np.linspace(0.0, grid.R_outer, 257)[1:]
    probes = []
    for d in grid._rays():
        probes.append(s[:, None] * d[None, :])
    ang = np.linspace(-0.5, 0.5, 257) * sec.theta + sec.bisector_angle
    probes.append(grid.R_outer * np.stack([np.cos(ang), np.sin(ang)], axis=-1))
    lat = _lattice(grid)
    scale = max(np.max(np.abs(f(lat.reshape(-1, 2)))), 1e-300)
    for k, pts in enumerate(probes):
        if np.max(np.abs(f(pts))) > tol * scale:
            where = "arc" if k == len(probes) - 1 else f"ray {k}"
            raise ArgumentError(f"function does not vanish on the {where}")


def hardy_check(f, grid, check_boundary=True):
    """Both sides of  int |Df|^2 >= Lambda_D int |x|^-2 f^2  on the grid.

    ``f`` maps (N, 2) points to values and must vanish on the rays and on
    the arc; it is extended by zero outside the sector. The left side sums
    squared edge differences, the right side is a nodal sum.
    """
    if grid.sector is None:
        raise ArgumentError("hardy_check needs a sector grid")
    if check_boundary:
        _assert_vanishes(f, grid)
    lat = _lattice(grid)
    vals = np.zeros(grid.mask.shape)
    vals[grid.mask] = f(grid.points)
    lhs = float(np.sum(np.diff(vals, axis=0) ** 2) + np.sum(np.diff(vals, axis=1) ** 2))
    r2 = np.sum(lat ** 2, axis=-1)
    Lambda_D = (np.pi / grid.sector.theta) ** 2
    inner = grid.mask
    rhs = float(Lambda_D * grid.h ** 2 * np.sum(vals[inner] ** 2 / r2[inner]))
    return lhs, rhs


def hardy_passes(lhs, rhs, slack=HARDY_SLACK):
    return lhs >= rhs * (1.0 - slack)


def sine_profile(sector, radial=lambda r: r * np.clip(1 - r, 0, None)):
    """f(r, phi) = radial(r) sin(pi phi / theta), phi measured from a ray."""
    def f(pts):
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        phi = sector.relative_angle(pts) + 0.5 * sector.theta
        inside = (phi > 0) & (phi < sector.theta)
        return np.where(inside, radial(r) * np.sin(np.pi * np.clip(phi, 0, sector.theta) / sector.theta), 0.0)
    return f


def random_bump(sector, rng, R_outer=1.0, terms=3):
    """Random sum of tensor cubic B-spline bumps in (r, phi), supported in
    0 < r < 0.9 R and 0 <= phi <= theta (so zero on rays and near the arc)."""
    parts = []
    for _ in range(terms):
        rk = np.sort(rng.uniform(0.02, 0.9, 5)) * R_outer
        pk = np.sort(rng.uniform(0.0, 1.0, 5)) * sector.theta
        if rng.random() < 0.5:
            pk[0] = 0.0
        if rng.random() < 0.5:
            pk[-1] = sector.theta
        c = rng.normal()
        parts.append((BSpline.basis_element(rk, extrapolate=False),
                      BSpline.basis_element(pk, extrapolate=False), c))

    def f(pts):
        pts = np.asarray(pts, dtype=float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        phi = sector.relative_angle(pts) + 0.5 * sector.theta
        out = np.zeros(r.shape)
        for br, bp, c in parts:
            out += c * np.nan_to_num(br(r)) * np.nan_to_num(bp(phi))
        return out
    return f


# -- Caccioppoli ------------------------------------------------------------------

def caccioppoli_check(field, mu, R, t0=None, nu=1.0, kappa=(0.5, 0.75)):
    """Both sides of

        int_{Q_{k1 R}} |x|^{2mu} |Du|^2 + |x|^{2mu-2} u^2
            <= C R^{2mu-2} int_{Q_{k2 R}} u^2,

    Q_r = {|x| < r} x (t0 - r^2, t0]; time integrals over the snapshots.
    """
    grid = field.grid
    Lambda_D = (np.pi / grid.sector.theta) ** 2
    m = 2
    if mu ** 2 >= nu ** 2 * (Lambda_D + (m - 2) ** 2 / 4):
        raise ArgumentError(
            f"mu^2 = {mu ** 2:.6g} violates mu^2 < nu^2 (Lambda_D + (m-2)^2/4) = "
            f"{nu ** 2 * Lambda_D:.6g}")
    t0 = field.times[-1] if t0 is None else t0
    k1, k2 = kappa
    if k2 * R > grid.R_outer * (1 + 1e-12):
        raise ArgumentError("outer cylinder exceeds the grid")
    w = space_weights(grid)
    r = grid.radius

    def integral(rad, density):
        sel = (field.times > t0 - rad ** 2 - 1e-12) & (field.times <= t0 + 1e-12)
        idx = np.nonzero(sel)[0]
        if len(idx) < 2:
            raise ArgumentError("cylinder holds fewer than two snapshots")
        tw = trapezoid_weights(field.times[idx])
        inside = r < rad
        return float(sum(wt * np.sum(w[inside] * density(k)[inside]) for k, wt in zip(idx, tw)))

    def lhs_density(k):
        g = gradient_norm(grid, field.values[k], field.boundary[k])
        u = field.values[k]
        return r ** (2 * mu) * g ** 2 + r ** (2 * mu - 2) * u ** 2

    lhs = integral(k1 * R, lhs_density)
    rhs = R ** (2 * mu - 2) * integral(k2 * R, lambda k: field.values[k] ** 2)
    return lhs, rhs


def gradient_interpolation_check(field, spec):
    """(|| |x|^(mu-1) Du ||, ||u||_W) for the snapshots of ``field``."""
    lhs = weighted_norm(field, spec.with_mu(spec.mu - 1), "grad")
    rhs = sobolev_norm(field, spec)
    return lhs, rhs


# -- auxiliary integral ----------------------------------------------------------

def _check_aux(alpha, beta, m):
    if not alpha > -1:
        raise ArgumentError(f"alpha = {alpha} violates alpha > -1")
    if not alpha + beta > -m:
        raise ArgumentError(f"alpha + beta = {alpha + beta} violates alpha + beta > -m")


def aux_integral(alpha, beta, gamma, sigma, w, cone, epsabs=1e-13, epsrel=1e-11):
    """I = int_K exp(-sigma |z-w|^2) d(z)^alpha |z|^beta (|z|+1)^gamma dz  in
    a planar sector, with d the distance to the boundary; returns
    (I, I / (|w|+1)^(alpha+beta+gamma))."""
    if not isinstance(cone, ConeGeometry) or cone.m != 2:
        raise ArgumentError("aux_integral supports planar sectors")
    _check_aux(alpha, beta, 2)
    w = np.asarray(w, dtype=float)
    theta = cone.theta
    phi1 = cone.bisector_angle - 0.5 * theta
    half = 0.5 * theta

    def angular(r):
        """int over the sector of exp(-sigma|z-w|^2) (d(z)/r)^alpha dphi."""
        def g(psi, side):
            phi = phi1 + psi if side == 0 else phi1 + theta - psi
            z = r * np.array([np.cos(phi), np.sin(phi)])
            e = np.exp(-sigma * np.sum((z - w) ** 2))
            if psi >= 0.5 * np.pi:
                return e
            s = np.sinc(psi / np.pi)  # sin(psi)/psi, smooth at 0
            return e * s ** alpha
        total = 0.0
        top = min(half, 0.5 * np.pi)
        for side in (0, 1):
            v, _ = spi.quad(g, 0.0, top, args=(side,), weight="alg", wvar=(alpha, 0.0),
                            epsabs=epsabs, epsrel=epsrel, limit=200)
            total += v
            if half > 0.5 * np.pi:
                # beyond a right angle the nearest boundary point is the vertex
                v, _ = spi.quad(g, 0.5 * np.pi, half, args=(side,),
                                epsabs=epsabs, epsrel=epsrel, limit=200)
                total += v
        return total

    def radial_factor(r):
        return (r + 1.0) ** gamma * angular(r)

    rw = float(np.linalg.norm(w))
    spread = np.sqrt(45.0 / sigma)
    r_top = rw + spread
    cuts = sorted({0.0, min(1.0, r_top), max(rw - spread, 0.0), rw, r_top})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        if a == 0.0:
            # r^(alpha+beta+1) from d^alpha |z|^beta and the Jacobian
            v, _ = spi.quad(radial_factor, a, b, weight="alg", wvar=(alpha + beta + 1, 0.0),
                            epsabs=epsabs, epsrel=epsrel, limit=200)
        else:
            v, _ = spi.quad(lambda r: r ** (alpha + beta + 1) * radial_factor(r), a, b,
                            epsabs=epsabs, epsrel=epsrel, limit=200)
        total += v
    return total, total / (rw + 1.0) ** (alpha + beta + gamma)
