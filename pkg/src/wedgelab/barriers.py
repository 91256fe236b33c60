"""Explicit barrier functions for the lower and upper exponent bounds.

Coordinates are split as x = (x1, x~, x'') with x' = (x1, x~) in R^m and
x'' in R^(n-m). All barriers live on cylinders

    Q = {x' in B_rho ∩ K^theta, |x''| < s rho} x (-(s rho)^2, 0]

around a circular cone K^theta of half-angle theta about the x1 axis.

``stmt4``
    w(x, t) = (x1^(g+1) - k x1^(g-1) |x~|^2) / rho^(g+1)
              + k nu^2 x1^2 / (4 rho^2) + (|x''|^2 - t) / (s0 rho)^2,
    k = cot^2(theta), 0 < g <= min(1, g~) with g~^2 + g~ = k nu^2.
``stmt5_plus`` / ``stmt5_minus``
    w^±(x') = (|x'| cos(psi / (1 ± delta)))^(1 ∓ g) on the cone of half-angle
    (pi/2)(1 ± delta), psi the angle to the x1 axis; lifted to
    w^+(x'/rho) + (|x|^2 - t)/(s1 rho)^2 and w^-(x'/rho) - (|x''|^2 - t)/(s1 rho)^2.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .coeffs import ellipticity_constant
from .errors import ArgumentError
from .spectral import gamma_tilde

KINDS = ("stmt4", "stmt5_plus", "stmt5_minus")


def s0_value(nu, theta, n, m):
    """Time aspect of the stmt4 cylinder; makes the heat-case barrier a
    supersolution with equality at the far end of the axis."""
    return float(np.sqrt(2.0 * (2.0 * (n - m) + nu)) / (nu / np.tan(theta)))


def gamma_star(nu, theta):
    return min(1.0, gamma_tilde(nu, theta))


@dataclass(frozen=True)
class BarrierSpec:
    kind: str
    nu: float
    theta: float
    gamma: float
    rho: float = 1.0
    s: float = None
    n: int = 2
    m: int = 2
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"kind must be one of {KINDS}")
        if not (0 < self.nu <= 1) or self.gamma <= 0 or self.rho <= 0:
            raise ArgumentError("need 0 < nu <= 1, gamma > 0 and rho > 0")
        if self.m not in (2, 3) or self.n < self.m:
            raise ArgumentError("need m in {2, 3} and n >= m")
        if self.kind == "stmt4":
            if not (0 < self.theta < 0.5 * np.pi):
                raise ArgumentError("stmt4 barriers need an acute half-angle theta < pi/2")
            if self.s is None:
                object.__setattr__(self, "s", s0_value(self.nu, self.theta, self.n, self.m))
        else:
            if not (0 <= self.delta < 1) or self.gamma >= 1:
                raise ArgumentError("stmt5 barriers need 0 <= delta < 1 and 0 < gamma < 1")
            object.__setattr__(self, "theta", self.cone_angle)
            if self.s is None:
                raise ArgumentError("stmt5 barriers need the aspect constant s1")

    @property
    def sign(self):
        return -1.0 if self.kind == "stmt5_minus" else 1.0

    @property
    def cone_angle(self):
        if self.kind == "stmt4":
            return self.theta
        return 0.5 * np.pi * (1 + self.sign * self.delta)

    @property
    def hypothesis_holds(self):
        if self.kind == "stmt4":
            return self.gamma <= gamma_star(self.nu, self.theta) * (1 + 1e-12)
        return True

    @property
    def depth(self):
        return (self.s * self.rho) ** 2

    def to_dict(self):
        return asdict(self)


# -- geometry helpers ------------------------------------------------------

def _split(spec, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise ArgumentError(f"points must have {spec.n} coordinates")
    return x[..., : spec.m], x[..., spec.m:]


def _axis_angle(xp):
    r = np.linalg.norm(xp, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(r > 0, xp[..., 0] / np.where(r > 0, r, 1.0), 1.0)
    return r, np.arccos(np.clip(c, -1.0, 1.0))


def in_cylinder(spec, x, t, tol=1e-12):
    xp, xpp = _split(spec, x)
    r, psi = _axis_angle(xp)
    t = np.asarray(t, dtype=float)
    ok = (r <= spec.rho * (1 + tol)) & (psi <= spec.cone_angle + tol)
    ok &= np.linalg.norm(xpp, axis=-1) <= spec.s * spec.rho * (1 + tol)
    ok &= (t <= tol * spec.depth) & (t >= -spec.depth * (1 + tol))
    return ok


# -- stmt4 ----------------------------------------------------------------

def _stmt4_value(spec, x, t):
    xp, xpp = _split(spec, x)
    g, rho = spec.gamma, spec.rho
    k = 1.0 / np.tan(spec.theta) ** 2
    x1 = xp[..., 0]
    tr2 = np.sum(xp[..., 1:] ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.where(x1 > 0, (x1 ** (g + 1) - k * x1 ** (g - 1) * tr2) / rho ** (g + 1), 0.0)
    return first + k * spec.nu ** 2 * x1 ** 2 / (4 * rho ** 2) \
        + (np.sum(xpp ** 2, axis=-1) - t) / (spec.s * rho) ** 2


def _stmt4_hessian(spec, x):
    xp, _ = _split(spec, x)
    g, rho, n, m = spec.gamma, spec.rho, spec.n, spec.m
    k = 1.0 / np.tan(spec.theta) ** 2
    x1 = xp[..., 0]
    xt = xp[..., 1:]
    tr2 = np.sum(xt ** 2, axis=-1)
    c = 1.0 / rho ** (g + 1)
    H = np.zeros(x1.shape + (n, n))
    H[..., 0, 0] = c * (g * (g + 1) * x1 ** (g - 1) - k * (g - 1) * (g - 2) * x1 ** (g - 3) * tr2) \
        + k * spec.nu ** 2 / (2 * rho ** 2)
    off = -2 * k * (g - 1) * c * x1[..., None] ** (g - 2) * xt
    H[..., 0, 1:m] = off
    H[..., 1:m, 0] = off
    for j in range(1, m):
        H[..., j, j] = -2 * k * c * x1 ** (g - 1)
    for j in range(m, n):
        H[..., j, j] = 2.0 / (spec.s * rho) ** 2
    return H, np.full(x1.shape, -1.0 / (spec.s * rho) ** 2)


# -- stmt5 ----------------------------------------------------------------

def _frame(xp):
    """Unit radial and polar vectors (and azimuthal for m = 3) of x'."""
    r, psi = _axis_angle(xp)
    m = xp.shape[-1]
    safe = np.where(r > 0, r, 1.0)[..., None]
    er = np.where((r > 0)[..., None], xp / safe, np.eye(m)[0])
    trans = xp[..., 1:]
    tn = np.linalg.norm(trans, axis=-1)
    u = np.where((tn > 0)[..., None], trans / np.where(tn > 0, tn, 1.0)[..., None],
                 np.eye(m - 1)[0])
    epsi = np.concatenate([-np.sin(psi)[..., None], np.cos(psi)[..., None] * u], axis=-1)
    if m == 2:
        return r, psi, er, epsi, None
    ephi = np.concatenate([np.zeros(psi.shape + (1,)),
                           np.stack([-u[..., 1], u[..., 0]], axis=-1)], axis=-1)
    return r, psi, er, epsi, ephi


def _stmt5_profile(spec, y):
    """w(y), Dw(y), D^2 w(y) for y = x'/rho in R^m."""
    r, psi, er, epsi, ephi = _frame(y)
    k = 1.0 / (1.0 + spec.sign * spec.delta)
    p = 1.0 - spec.sign * spec.gamma
    cos_k, sin_k = np.cos(k * psi), np.sin(k * psi)
    G = r * cos_k
    DG = cos_k[..., None] * er - (k * sin_k)[..., None] * epsi
    safe_r = np.where(r > 0, r, np.inf)
    outer = lambda a, b: a[..., :, None] * b[..., None, :]
    D2G = ((1 - k * k) * cos_k / safe_r)[..., None, None] * outer(epsi, epsi)
    if ephi is not None:
        # (cos(k psi) - k cot(psi) sin(k psi)) / r, with the axis limit 1 - k^2
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(psi > 1e-8, k * sin_k / np.tan(np.where(psi > 1e-8, psi, 1.0)),
                             k * k)
        D2G = D2G + ((cos_k - ratio) / safe_r)[..., None, None] * outer(ephi, ephi)
    Gs = np.where(G > 0, G, np.nan)
    w = np.where(G > 0, Gs ** p, 0.0)
    Dw = (p * Gs ** (p - 1))[..., None] * DG
    D2w = (p * Gs ** (p - 1))[..., None, None] * D2G \
        + (p * (p - 1) * Gs ** (p - 2))[..., None, None] * outer(DG, DG)
    return w, Dw, D2w


def _stmt5_value(spec, x, t):
    xp, xpp = _split(spec, x)
    w, _, _ = _stmt5_profile(spec, xp / spec.rho)
    sr2 = (spec.s * spec.rho) ** 2
    if spec.kind == "stmt5_plus":
        return w + (np.sum(np.asarray(x) ** 2, axis=-1) - t) / sr2
    return w - (np.sum(xpp ** 2, axis=-1) - t) / sr2


def _stmt5_hessian(spec, x):
    xp, _ = _split(spec, x)
    n, m = spec.n, spec.m
    _, _, D2w = _stmt5_profile(spec, xp / spec.rho)
    sr2 = (spec.s * spec.rho) ** 2
    H = np.zeros(xp.shape[:-1] + (n, n))
    H[..., :m, :m] = D2w / spec.rho ** 2
    if spec.kind == "stmt5_plus":
        H = H + 2.0 / sr2 * np.eye(n)
        dt = np.full(xp.shape[:-1], -1.0 / sr2)
    else:
        for j in range(m, n):
            H[..., j, j] -= 2.0 / sr2
        dt = np.full(xp.shape[:-1], 1.0 / sr2)
    return H, dt


# -- public operations ------------------------------------------------------

def eval_barrier(spec, x, t, check_domain=True):
    """Closed-form barrier value at points ``x`` (..., n) and times ``t``."""
    x = np.asarray(x, dtype=float)
    if check_domain and not np.all(in_cylinder(spec, x, t)):
        raise ArgumentError("point outside the barrier cylinder")
    if spec.kind == "stmt4":
        return _stmt4_value(spec, x, t)
    return _stmt5_value(spec, x, t)


def barrier_derivatives(spec, x):
    """(D^2 w, d_t w) at points ``x``; the time derivative is constant."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "stmt4":
        return _stmt4_hessian(spec, x)
    return _stmt5_hessian(spec, x)


def apply_operator(spec, schedule, x, t):
    """d_t w - A(t):D^2 w  at the samples (x, t)."""
    H, dt = barrier_derivatives(spec, x)
    t = np.broadcast_to(np.asarray(t, dtype=float), dt.shape)
    out = np.empty(dt.shape)
    layers = np.array([schedule.layer_index(tt) for tt in t.ravel()]).reshape(t.shape)
    for k in np.unique(layers):
        sel = layers == k
        a = schedule.layers[k]
        out[sel] = dt[sel] - np.einsum("ij,...ij->...", a, H[sel])
    return out


def sample_cylinder(spec, count, rng, interior=0.0):
    """Uniform samples of the cylinder (rejection in the ball of radius rho)."""
    m, n = spec.m, spec.n
    pts = []
    need = count
    while need > 0:
        cand = rng.uniform(-1, 1, size=(4 * need + 16, m)) * spec.rho
        r, psi = _axis_angle(cand)
        keep = (r < spec.rho * (1 - interior)) & (psi < spec.cone_angle * (1 - interior)) & (r > 0)
        pts.append(cand[keep][:need])
        need -= len(pts[-1])
    xp = np.concatenate(pts)
    if n > m:
        z = rng.normal(size=(count, n - m))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        z *= (rng.uniform(size=(count, 1)) ** (1.0 / (n - m))) * spec.s * spec.rho
        xp = np.concatenate([xp, z], axis=1)
    t = -rng.uniform(0, 1, size=count) * spec.depth
    return xp, t


def verify_supersolution(spec, schedule, x, t, nu_tol=1e-9):
    """Minimum over samples of  sign * L w  (sign = -1 for stmt5_minus).

    Samples at schedule breakpoints are skipped and counted.
    """
    if schedule.dimension != spec.n:
        raise ArgumentError("schedule dimension must equal the barrier dimension n")
    nu = ellipticity_constant(schedule)
    if nu < spec.nu - nu_tol:
        raise ArgumentError(f"schedule ellipticity {nu} is below the barrier's nu {spec.nu}")
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    at_bp = np.array([schedule.is_breakpoint(tt) for tt in t])
    keep = ~at_bp
    vals = spec.sign * apply_operator(spec, schedule, x[keep], t[keep])
    k = int(np.nanargmin(vals))
    return {"min": float(vals[k]), "witness": {"x": x[keep][k].tolist(), "t": float(t[keep][k])},
            "samples": int(keep.sum()), "skipped": int(at_bp.sum()),
            "hypothesis_holds": bool(spec.hypothesis_holds)}


def _boundary_samples(spec, count, rng):
    """Samples of each part of the parabolic boundary."""
    m, n, rho, s = spec.m, spec.n, spec.rho, spec.s
    parts = {}

    def directions(psi):
        if m == 2:
            side = rng.choice([-1.0, 1.0], size=len(psi))
            return np.stack([np.cos(psi), side * np.sin(psi)], axis=-1)
        az = rng.uniform(0, 2 * np.pi, size=len(psi))
        return np.stack([np.cos(psi), np.sin(psi) * np.cos(az), np.sin(psi) * np.sin(az)], axis=-1)

    def tail(xp, t):
        # each point twice: on the edge x'' = 0 and with a random x''
        if n > m:
            z = rng.normal(size=(len(xp), n - m))
            z /= np.linalg.norm(z, axis=1, keepdims=True)
            z *= rng.uniform(size=(len(xp), 1)) * s * rho
            xp = np.concatenate([np.concatenate([xp, np.zeros_like(z)], axis=1),
                                 np.concatenate([xp, z], axis=1)])
            t = np.concatenate([t, t])
        return xp, t

    # tensor lattices in (radius or polar angle) x time, corners included
    k = max(int(np.sqrt(count)), 2)
    grid_a, grid_t = np.meshgrid(np.linspace(0.0, 1.0, k), -np.linspace(0.0, 1.0, k) * spec.depth,
                                 indexing="ij")
    a, ts = grid_a.ravel(), grid_t.ravel()
    parts["lateral"] = tail((rho * a)[:, None] * directions(np.full(len(a), spec.cone_angle)), ts)
    parts["sphere"] = tail(rho * directions(spec.cone_angle * a), ts)
    xp, _ = sample_cylinder(spec, count, rng)
    parts["initial"] = (xp, np.full(count, -spec.depth))
    if n > m:
        xq, tq = sample_cylinder(spec, count, rng)
        z = xq[:, m:]
        z = z / np.linalg.norm(z, axis=1, keepdims=True) * s * rho
        parts["top"] = (np.concatenate([xq[:, :m], z], axis=1), tq)
    return parts


EXPECTED_SIGNS = {
    "stmt4": {"lateral": ">=0", "sphere": ">0", "initial": ">0", "top": ">0"},
    "stmt5_plus": {"lateral": ">=0", "sphere": ">0", "initial": ">0", "top": ">0"},
    "stmt5_minus": {"lateral": "<=0", "sphere": "any", "initial": "<=0", "top": "<=0"},
}


def boundary_sign_check(spec, count=2000, seed=0):
    """Minimal and maximal barrier value on each part of the parabolic
    boundary, with the expected sign and whether it is met."""
    rng = np.random.default_rng(seed)
    report = {}
    for name, (x, t) in _boundary_samples(spec, count, rng).items():
        v = eval_barrier(spec, x, t, check_domain=False)
        expected = EXPECTED_SIGNS[spec.kind][name]
        lo, hi = float(np.min(v)), float(np.max(v))
        ok = {">=0": lo >= -1e-12, ">0": lo > 0, "<=0": hi <= 1e-12, "any": True}[expected]
        report[name] = {"min": lo, "max": hi, "expected": expected, "ok": bool(ok)}
    return report


def comparison_constant(report):
    """C with w >= C on the non-lateral part of the parabolic boundary."""
    return min(v["min"] for k, v in report.items() if k != "lateral")


def profile_lattice(spec, nr=160, npsi=160):
    """Deterministic polar lattice of B_1 ∩ cone (closed at r = 1) in R^m;
    the profiles are axisymmetric, so one meridian plane suffices."""
    r = np.linspace(1.0 / nr, 1.0, nr)
    psi = np.linspace(0.0, spec.cone_angle, npsi + 1)[:-1]
    R, P = np.meshgrid(r, psi, indexing="ij")
    y = np.zeros(R.shape + (spec.m,))
    y[..., 0] = R * np.cos(P)
    y[..., 1] = R * np.sin(P)
    return y.reshape(-1, spec.m)


def _profile_min(spec, schedule, y):
    _, _, D2w = _stmt5_profile(spec, y)
    vals = [-spec.sign * np.einsum("ij,...ij->...", a[: spec.m, : spec.m], D2w)
            for a in schedule.layers]
    return float(np.nanmin(vals))


def half_space_epsilon(kind, gamma, schedule, m=2):
    """Min of ±L (x1)^(1∓gamma) over B_1 ∩ {x1 > 0}, over all layers."""
    spec = BarrierSpec(kind, 1.0, 0.5 * np.pi, gamma, rho=1.0, s=1.0, n=m, m=m, delta=0.0)
    return _profile_min(spec, schedule, profile_lattice(spec))


def choose_delta(kind, gamma, schedule, m=2, delta_max=0.5, iters=40, margin=0.1):
    """Largest delta (by bisection) with ±L w^± >= (1 + margin) eps/2 on a
    polar lattice of the unit ball part of the cone of half-angle
    (pi/2)(1 ± delta); returns (delta, eps, s1)."""
    eps = half_space_epsilon(kind, gamma, schedule, m)
    if eps <= 0:
        raise ArgumentError(f"no positive epsilon for gamma = {gamma}")

    def ok(delta):
        spec = BarrierSpec(kind, 1.0, 0.0, gamma, rho=1.0, s=1.0, n=m, m=m, delta=delta)
        return _profile_min(spec, schedule, profile_lattice(spec)) >= 0.5 * eps * (1 + margin)

    lo, hi = 0.0, delta_max
    if ok(hi):
        lo = hi
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    nu = ellipticity_constant(schedule)
    n = schedule.dimension
    s1 = float(np.sqrt(2.0 * (1.0 + 2.0 * n / nu) / eps))
    return lo, eps, s1


def comparison_check(spec, field, t0, sup=None):
    """Maximum-principle comparison |u| <= (S / C) w(x, t - t0) on the
    cylinder, for a discrete solution ``field`` on a planar sector grid.

    S is the sup of |u| over the cylinder nodes and C the minimal barrier
    value on the non-lateral parabolic boundary. Returns the smallest
    margin (S/C) w - |u| and its location.
    """
    if spec.n != 2 or spec.m != 2:
        raise ArgumentError("the comparison runs on planar grids")
    grid = field.grid
    C = comparison_constant(boundary_sign_check(spec))
    inside = grid.radius < spec.rho
    ang = np.abs(grid.sector.relative_angle(grid.points)) if grid.sector is not None else 0
    inside &= ang <= spec.cone_angle + 1e-12
    rel = field.times - t0
    snaps = np.nonzero((rel >= -spec.depth - 1e-12) & (rel <= 1e-12))[0]
    if len(snaps) == 0 or not np.any(inside):
        raise ArgumentError("no nodes or snapshots inside the barrier cylinder")
    S = float(np.max(np.abs(field.values[np.ix_(snaps, np.nonzero(inside)[0])]))) if sup is None else sup
    worst = None
    for k in snaps:
        w = eval_barrier(spec, grid.points[inside], rel[k], check_domain=False)
        margin = S / C * w - np.abs(field.values[k][inside])
        j = int(np.argmin(margin))
        if worst is None or margin[j] < worst["margin"]:
            worst = {"margin": float(margin[j]), "x": grid.points[inside][j].tolist(),
                     "t": float(field.times[k])}
    worst.update({"C": float(C), "sup": S, "nodes": int(inside.sum()), "snapshots": int(len(snaps))})
    return worst
