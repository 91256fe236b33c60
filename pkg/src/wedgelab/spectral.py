"""Critical exponents of the Dirichlet problem in sectors and circular cones.

For the heat operator the exponent is

    lambda_D = -(m-2)/2 + sqrt(Lambda_D + (m-2)^2/4),

with Lambda_D the first Dirichlet eigenvalue of the Laplace-Beltrami
operator on the spherical section of the cone. In the plane this is pi/theta.
For a circular cone in R^3 of half-angle theta, Lambda_D = d(d+1) where d is
the smallest positive degree with P_d(cos theta) = 0; that degree is found
by shooting on the axisymmetric Beltrami equation.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal

from .coeffs import ellipticity_constant, transformed_sector
from .errors import ArgumentError, NumericalError
from .geometry import TWO_PI, ConeGeometry

SHOOT_EPS = 1e-6
SHOOT_RTOL = 1e-12
BISECT_TOL = 1e-13


def _check_sector_angle(theta):
    if not (0.0 < theta <= TWO_PI * (1 + 1e-15)):
        raise ArgumentError(f"sector opening must lie in (0, 2pi], got {theta}")


def sector_lambda(theta):
    """Exponent pi/theta of a planar sector of opening theta."""
    _check_sector_angle(theta)
    return float(np.pi / min(theta, TWO_PI))


def sector_eigenvalue_fd(theta, n=4000):
    """First Dirichlet eigenvalue of -d^2/dphi^2 on (0, theta), by second
    order differences with Richardson extrapolation in the mesh width."""
    _check_sector_angle(theta)

    def first(nn):
        h = theta / (nn + 1)
        d = np.full(nn, 2.0 / h ** 2)
        e = np.full(nn - 1, -1.0 / h ** 2)
        return eigh_tridiagonal(d, e, select="i", select_range=(0, 0), eigvals_only=True)[0]

    return float((4 * first(2 * n + 1) - first(n)) / 3)


# -- circular cones in R^3 ---------------------------------------------------

def _shoot(lam, theta):
    """u(theta) and the number of sign changes of u on (0, theta) for the
    regular solution of u'' + cot(phi) u' + lam u = 0."""
    eps = SHOOT_EPS
    u0 = 1.0 - lam * eps ** 2 / 4.0
    du0 = -lam * eps / 2.0

    def rhs(phi, y):
        return [y[1], -np.cos(phi) / np.sin(phi) * y[1] - lam * y[0]]

    sol = solve_ivp(rhs, (eps, theta), [u0, du0], method="DOP853",
                    rtol=SHOOT_RTOL, atol=1e-14, dense_output=True)
    if not sol.success:
        raise NumericalError(f"shooting failed at Lambda={lam}: {sol.message}",
                             report={"Lambda": lam})
    grid = np.linspace(eps, theta, 400)
    u = sol.sol(grid)[0]
    zeros = int(np.sum(np.signbit(u[1:-1]) != np.signbit(u[:-2])))
    return float(sol.y[0, -1]), zeros


def cap_eigenvalue(theta):
    """First Dirichlet eigenvalue Lambda_D of the spherical cap of
    half-angle theta."""
    if not (0.0 < theta < np.pi):
        raise ArgumentError(f"cap half-angle must lie in (0, pi), got {theta}")
    # bracket: the first eigenfunction has no interior zero
    lo = 0.0
    hi = max(2.0, (2.405 / theta) ** 2)
    for _ in range(200):
        val, zeros = _shoot(hi, theta)
        if zeros >= 1 or val < 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericalError("no bracket for the first cap eigenvalue",
                             report={"lo": lo, "hi": hi})
    f_lo = _shoot(lo, theta)[0] if lo > 0 else 1.0
    if f_lo <= 0:
        raise NumericalError("invalid shooting bracket", report={"lo": lo, "hi": hi})
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val, zeros = _shoot(mid, theta)
        if val > 0 and zeros == 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_TOL * max(1.0, hi):
            break
    else:
        raise NumericalError("bisection did not converge", report={"lo": lo, "hi": hi})
    return 0.5 * (lo + hi)


def cap_eigenvalue_fd(theta, n=20000):
    """Independent estimate of the cap eigenvalue: cell-centred symmetric
    differences of -(1/sin phi)(sin phi u')' on (0, theta), Richardson
    extrapolated."""
    if not (0.0 < theta < np.pi):
        raise ArgumentError(f"cap half-angle must lie in (0, pi), got {theta}")

    def first(nn):
        h = theta / nn
        c = (np.arange(nn) + 0.5) * h
        face = np.sin(np.arange(nn + 1) * h)
        w = np.sin(c)
        diag = (face[:-1] + face[1:]) / h ** 2
        diag[-1] = (face[-2] + 2.0 * face[-1]) / h ** 2  # ghost value -u_N at phi = theta
        off = -face[1:-1] / h ** 2
        # similarity by sqrt(w) symmetrises the generalized problem
        sw = np.sqrt(w)
        d = diag / w
        e = off / (sw[:-1] * sw[1:])
        return eigh_tridiagonal(d, e, select="i", select_range=(0, 0), eigvals_only=True)[0]

    return float((4 * first(2 * n) - first(n)) / 3)


def heat_exponent(m, Lambda_D):
    return float(-(m - 2) / 2 + np.sqrt(Lambda_D + (m - 2) ** 2 / 4))


def cap_lambda(theta):
    """Exponent of the circular cone in R^3 with half-angle theta."""
    return heat_exponent(3, cap_eigenvalue(theta))


# -- bounds ------------------------------------------------------------

def bound_stmt7(nu, Lambda_D, m):
    """Lower bound -m/2 + nu sqrt(Lambda_D + (m-2)^2/4)."""
    if not (0.0 < nu <= 1.0) or Lambda_D <= 0:
        raise ArgumentError("need 0 < nu <= 1 and Lambda_D > 0")
    return float(-m / 2 + nu * np.sqrt(Lambda_D + (m - 2) ** 2 / 4))


def gamma_tilde(nu, theta):
    """Positive root of g^2 + g - nu^2 cot^2(theta) = 0."""
    c2 = (nu / np.tan(theta)) ** 2
    return float((-1.0 + np.sqrt(1.0 + 4.0 * c2)) / 2.0)


def bound_stmt4(nu, theta):
    """Lower bound 1 + min(1, gamma_tilde) for a cone inside the circular
    cone of half-angle theta < pi/2."""
    if not (0.0 < theta < 0.5 * np.pi):
        raise ArgumentError(f"bound needs an acute half-angle in (0, pi/2), got {theta}")
    if not (0.0 < nu <= 1.0):
        raise ArgumentError("need 0 < nu <= 1")
    return 1.0 + min(1.0, gamma_tilde(nu, theta))


# -- reports ---------------------------------------------------------------

@dataclass
class ExponentReport:
    m: int
    theta: float
    nu: float
    lambda_heat: float
    Lambda_D: float
    per_layer: list
    lambda_piecewise: float
    lambda_minus: float
    bound_stmt4: float | None
    bound_stmt7: float
    fit: dict | None = None

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _layer_exponents_planar(schedule, sector):
    return [sector_lambda(transformed_sector(a, sector)) for a in schedule.layers]


def _layer_exponents_cap(schedule, cone):
    out = []
    lam = cap_lambda(cone.theta)
    for k, a in enumerate(schedule.layers):
        c = a[0, 0]
        if not np.allclose(a, c * np.eye(a.shape[0]), atol=1e-14, rtol=0):
            raise ArgumentError(
                f"layer {k}: circular cones support only scalar multiples of the identity")
        out.append(lam)
    return out


def piecewise_lambda(schedule, cone):
    """Exponent report for a piecewise constant schedule in a cone.

    In the plane each layer is reduced to the heat case by A^{-1/2}, which
    turns the sector into a sector of opening theta_k; the exponent is the
    least pi/theta_k. The backward exponent is recomputed on the reversed
    schedule. Only the first m coordinates of the schedule matter.
    """
    if not isinstance(cone, ConeGeometry):
        raise ArgumentError("cone must be a ConeGeometry")
    m = cone.m
    if schedule.dimension < m:
        raise ArgumentError("schedule dimension is smaller than the cone dimension")
    from .coeffs import CoefficientSchedule
    sub = CoefficientSchedule([a[:m, :m] for a in schedule.layers], schedule.breakpoints)
    if m == 2:
        Lambda_D = (np.pi / cone.theta) ** 2
        per_layer = _layer_exponents_planar(sub, cone)
        per_layer_minus = _layer_exponents_planar(sub.reversed(), cone)
    else:
        Lambda_D = cap_eigenvalue(cone.theta)
        per_layer = _layer_exponents_cap(sub, cone)
        per_layer_minus = _layer_exponents_cap(sub.reversed(), cone)
    nu = ellipticity_constant(sub)
    half = cone.acute_half_angle()
    b4 = bound_stmt4(nu, half) if half < 0.5 * np.pi else None
    return ExponentReport(
        m=m, theta=float(cone.theta), nu=nu,
        lambda_heat=heat_exponent(m, Lambda_D), Lambda_D=float(Lambda_D),
        per_layer=[float(v) for v in per_layer],
        lambda_piecewise=float(min(per_layer)),
        lambda_minus=float(min(per_layer_minus)),
        bound_stmt4=b4, bound_stmt7=bound_stmt7(nu, Lambda_D, m))
