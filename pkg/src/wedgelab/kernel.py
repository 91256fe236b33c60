"""Whole-space Green function of  d_t - A(t):D^2  with time-dependent A.

For t > s the kernel is a Gaussian whose covariance is twice the integrated
matrix  M = int_s^t A(tau) dtau :

    Gamma(x, y; t, s) = det(M)^{-1/2} (4 pi)^{-n/2} exp(-(M^{-1}(x-y), x-y) / 4),

and zero for t <= s. Everything here is a closed-form evaluation or a
quadrature built on that formula.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .coeffs import ellipticity_constant, integrate
from .errors import ArgumentError, CertificationError, NumericalError

MAX_SPACE_ORDER = 4


def _dims(schedule, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = schedule.dimension
    if x.shape[-1] != n or y.shape[-1] != n:
        raise ArgumentError(
            f"point dimension {x.shape[-1]}/{y.shape[-1]} does not match schedule dimension {n}")
    return x, y


def _gaussian(m, d):
    """Gamma as a function of the displacement d for integrated matrix m."""
    n = m.shape[0]
    c = np.linalg.cholesky(m)
    z = np.linalg.solve(c, np.moveaxis(d, -1, 0).reshape(n, -1))
    quad = np.sum(z * z, axis=0).reshape(d.shape[:-1])
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    return np.exp(-0.25 * quad - 0.5 * logdet - 0.5 * n * np.log(4 * np.pi))


def gamma(schedule, x, y, t, s):
    """Green function Gamma(x, y; t, s); broadcasts over leading axes of x, y."""
    x, y = _dims(schedule, x, y)
    d = x - y
    if t <= s:
        return np.zeros(d.shape[:-1]) if d.ndim > 1 else 0.0
    val = _gaussian(integrate(schedule, s, t), d)
    return val if d.ndim > 1 else float(val)


# -- derivatives ---------------------------------------------------------

def _hermite_factors(p, d, gamma_idx):
    """Polynomial factor H with D_d^gamma exp(q) = H exp(q), q = -(P d, d)/4.

    Uses D_i exp(q) = g_i exp(q) with g = -P d / 2 linear in d, so
    H(gamma + e_i) = g_i H(gamma) - 1/2 sum_j gamma_j P_ij H(gamma - e_j).
    """
    n = p.shape[0]
    g = -0.5 * np.einsum("ij,...j->...i", p, d)
    cache = {}

    def h(idx):
        if idx in cache:
            return cache[idx]
        if sum(idx) == 0:
            val = np.ones(d.shape[:-1])
        else:
            i = next(k for k in range(n) if idx[k] > 0)
            prev = list(idx)
            prev[i] -= 1
            prev = tuple(prev)
            val = g[..., i] * h(prev)
            for j in range(n):
                if prev[j] > 0:
                    lower = list(prev)
                    lower[j] -= 1
                    val = val - 0.5 * prev[j] * p[i, j] * h(tuple(lower))
        cache[idx] = val
        return val

    return h(tuple(gamma_idx))


def _as_multi_index(alpha, n):
    alpha = tuple(int(a) for a in (alpha or (0,) * n))
    if len(alpha) != n or min(alpha) < 0:
        raise ArgumentError(f"multi-index {alpha} is not valid in dimension {n}")
    return alpha


def gamma_derivative(schedule, x, y, t, s, k=0, alpha=None, beta=None):
    """Analytic  d_t^k D_x^alpha D_y^beta Gamma(x, y; t, s)  for k <= 1.

    D_y acts as -D_x because Gamma depends on x - y only. The time
    derivative uses the equation itself: d_t Gamma = A(t):D_x^2 Gamma.
    """
    x, y = _dims(schedule, x, y)
    n = schedule.dimension
    alpha = _as_multi_index(alpha, n)
    beta = _as_multi_index(beta, n)
    if k not in (0, 1):
        raise ArgumentError(f"time-derivative order must be 0 or 1, got {k}")
    if sum(alpha) + sum(beta) > MAX_SPACE_ORDER:
        raise ArgumentError(f"|alpha|+|beta| must not exceed {MAX_SPACE_ORDER}")
    d = x - y
    scalar = d.ndim == 1
    if t <= s:
        return 0.0 if scalar else np.zeros(d.shape[:-1])
    if k == 1 and schedule.is_breakpoint(t):
        raise ArgumentError("derivative undefined at breakpoint")
    m = integrate(schedule, s, t)
    p = np.linalg.inv(m)
    p = 0.5 * (p + p.T)
    base = _gaussian(m, d)
    total = np.array(alpha) + np.array(beta)
    sign = (-1.0) ** sum(beta)
    if k == 0:
        val = sign * _hermite_factors(p, d, total) * base
    else:
        a = schedule.at(t)
        val = np.zeros_like(base)
        for i in range(n):
            for j in range(n):
                if a[i, j] == 0.0:
                    continue
                idx = total.copy()
                idx[i] += 1
                idx[j] += 1
                val = val + a[i, j] * _hermite_factors(p, d, idx)
        val = sign * val * base
    return float(val) if scalar else val


def gamma_derivative_fd(schedule, x, y, t, s, k=0, alpha=None, beta=None, step=None):
    """Central finite-difference counterpart of :func:`gamma_derivative`.

    Applies one central difference per unit of each multi-index component
    (and in t when k = 1) to the closed-form Gamma. Default step is
    1e-4 times the parabolic scale sqrt(t - s).
    """
    x, y = _dims(schedule, x, y)
    n = schedule.dimension
    alpha = _as_multi_index(alpha, n)
    beta = _as_multi_index(beta, n)
    h = 1e-4 * np.sqrt(t - s) if step is None else step
    ops = [("x", i) for i in range(n) for _ in range(alpha[i])]
    ops += [("y", i) for i in range(n) for _ in range(beta[i])]
    if k == 1:
        ops.append(("t", None))
    total = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=len(ops)):
        xx, yy, tt = np.array(x, dtype=float), np.array(y, dtype=float), float(t)
        for (kind, i), sg in zip(ops, signs):
            if kind == "x":
                xx[..., i] += sg * h
            elif kind == "y":
                yy[..., i] += sg * h
            else:
                tt += sg * h * np.sqrt(t - s)
        weight = np.prod(signs)
        total = total + weight * gamma(schedule, xx, yy, tt, s)
    scale = (2 * h) ** (len(ops) - k) * (2 * h * np.sqrt(t - s)) ** k
    return total / scale


# -- Gaussian bound certificates ------------------------------------------

@dataclass
class SampleGrid:
    """Sample design for certificates: parabolic ratios |x-y|/sqrt(t-s),
    elapsed times t-s, start times s and a fixed set of directions."""

    xis: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 8.0, 81))
    taus: np.ndarray = field(default_factory=lambda: np.geomspace(1e-3, 10.0, 9))
    starts: tuple = (0.0,)
    n_directions: int = 16
    seed: int = 0

    def directions(self, n):
        if n == 2:
            ang = np.linspace(0.0, 2 * np.pi, self.n_directions, endpoint=False)
            return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        rng = np.random.default_rng(self.seed)
        v = rng.standard_normal((self.n_directions, n))
        v = np.concatenate([np.eye(n), v])
        return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class GaussianBoundCertificate:
    order: tuple
    sigma: float
    C: float
    worst_sample: dict
    ladder_index: int

    def to_dict(self):
        k, alpha, beta = self.order
        return {"order": {"k": k, "alpha": list(alpha), "beta": list(beta)},
                "sigma": self.sigma, "C": self.C, "worst_sample": self.worst_sample,
                "ladder_index": self.ladder_index}


def sigma_ladder(nu, steps=20):
    return [nu / 8.0 * 2.0 ** (-j) for j in range(steps + 1)]


def certify_gaussian_bound(schedule, order=(0, None, None), grid=None, tail_fraction=0.9):
    """Find (sigma, C) for the sampled Gaussian bound of a derivative of Gamma.

    A candidate sigma is accepted when the normalized ratio
    |d_t^k D^alpha D^beta Gamma| (t-s)^{(n+2k+|alpha|+|beta|)/2} exp(sigma xi^2)
    does not grow in the outer tail of the sampled xi-range (samples with
    xi >= tail_fraction * max xi); C is the maximal ratio. The sharp rate
    1/(4 max eig A) is tried first, then nu/8 * 2^-j.
    """
    grid = grid or SampleGrid()
    n = schedule.dimension
    k, alpha, beta = order
    alpha = _as_multi_index(alpha, n)
    beta = _as_multi_index(beta, n)
    order = (int(k), alpha, beta)
    dirs = grid.directions(n)
    xis = np.asarray(grid.xis, dtype=float)
    power = 0.5 * (n + 2 * k + sum(alpha) + sum(beta))
    ratios, xi_all, s_all, tau_all, d_all = [], [], [], [], []
    for s0 in grid.starts:
        for tau in grid.taus:
            t = s0 + tau
            if k == 1 and schedule.is_breakpoint(t):
                continue
            d = (xis[:, None, None] * np.sqrt(tau)) * dirs[None, :, :]
            d = d.reshape(-1, n)
            val = gamma_derivative(schedule, d, np.zeros(n), t, s0, k, alpha, beta)
            ratios.append(np.abs(val) * tau ** power)
            xi_all.append(np.repeat(xis, len(dirs)))
            s_all.append(np.full(len(d), s0))
            tau_all.append(np.full(len(d), tau))
            d_all.append(d)
    if not ratios:
        raise ArgumentError("sample grid is empty")
    ratios = np.concatenate(ratios)
    xi_all = np.concatenate(xi_all)
    s_all = np.concatenate(s_all)
    tau_all = np.concatenate(tau_all)
    d_all = np.concatenate(d_all)
    nu = ellipticity_constant(schedule)
    lam_max = max(np.linalg.eigvalsh(a)[-1] for a in schedule.layers)
    candidates = [1.0 / (4.0 * lam_max)] + sigma_ladder(nu)
    tail = xi_all >= tail_fraction * xi_all.max()
    worst = None
    for idx, sigma in enumerate(candidates):
        weighted = ratios * np.exp(sigma * xi_all ** 2)
        inner = weighted[~tail].max() if np.any(~tail) else 0.0
        outer = weighted[tail].max()
        w = int(np.argmax(weighted))
        worst = {"s": float(s_all[w]), "t_minus_s": float(tau_all[w]),
                 "x_minus_y": [float(v) for v in d_all[w]],
                 "xi": float(xi_all[w]), "ratio": float(weighted[w]), "sigma": float(sigma)}
        if inner > 0 and outer <= inner * (1.0 + 1e-12):
            return GaussianBoundCertificate(order, float(sigma), float(weighted[w]), worst, idx)
    raise CertificationError("no sigma in the ladder bounds the sampled derivative",
                             report={"worst": worst, "order": str(order)})


# -- quadrature --------------------------------------------------------------

@lru_cache(maxsize=None)
def _hermite_rule(order):
    z, w = np.polynomial.hermite_e.hermegauss(order)
    return z, w / np.sqrt(2 * np.pi)


def _tensor_rule(n, order):
    z, w = _hermite_rule(order)
    zz = np.stack(np.meshgrid(*([z] * n), indexing="ij"), axis=-1).reshape(-1, n)
    ww = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij"), axis=-1).reshape(-1, n), axis=1)
    return zz, ww


def _whitened_nodes(m, center, order):
    """Nodes/weights for  int g(y) N(center, 2M)(y) dy  with N the Gaussian
    density of covariance 2M (which is Gamma's profile)."""
    n = m.shape[0]
    zz, ww = _tensor_rule(n, order)
    c = np.linalg.cholesky(m)
    nodes = center[None, :] - np.sqrt(2.0) * zz @ c.T
    return nodes, ww


def mass(schedule, x, t, s, order=32):
    """Quadrature of  int Gamma(x, y; t, s) dy  (should be 1)."""
    x = np.asarray(x, dtype=float)
    if t <= s:
        raise ArgumentError("mass needs t > s")
    m = integrate(schedule, s, t)
    nodes, ww = _whitened_nodes(m, x, order)
    vals = gamma(schedule, x[None, :], nodes, t, s)
    # Jacobian of y = x - sqrt(2) L z times the inverse standard normal density
    n = x.size
    logdet = np.sum(np.log(np.diag(np.linalg.cholesky(m))))
    zz, _ = _tensor_rule(n, order)
    jac = np.exp(0.5 * n * np.log(2.0) + logdet + 0.5 * np.sum(zz ** 2, axis=1)
                 + 0.5 * n * np.log(2 * np.pi))
    total = float(np.sum(ww * vals * jac))
    if not np.isfinite(total):
        raise NumericalError("mass quadrature produced a non-finite value")
    return total


def chapman_kolmogorov_residual(schedule, x, y, t, r, s, order=48):
    """|int Gamma(x,z;t,r) Gamma(z,y;r,s) dz - Gamma(x,y;t,s)|, relative to
    Gamma(x,y;t,s)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not s < r < t:
        raise ArgumentError("need s < r < t")
    m1 = integrate(schedule, r, t)
    m2 = integrate(schedule, s, r)
    # whiten against the narrower factor; the other one is smooth on its scale
    if np.linalg.eigvalsh(m1)[-1] <= np.linalg.eigvalsh(m2)[-1]:
        nodes, ww = _whitened_nodes(m1, x, order)
        other = gamma(schedule, nodes, y[None, :], r, s)
    else:
        nodes, ww = _whitened_nodes(m2, y, order)
        other = gamma(schedule, x[None, :], nodes, t, r)
    composed = float(np.sum(ww * other))
    exact = gamma(schedule, x, y, t, s)
    return abs(composed - exact) / exact


def _panels(schedule, a, b, pieces):
    cuts = [a] + [float(T) for T in schedule.breakpoints if a < T < b] + [b]
    out = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        e = np.linspace(lo, hi, pieces + 1)
        out.extend(zip(e[:-1], e[1:]))
    return out


def duhamel_solve(source, schedule, points, t, time_window, space_box=None,
                  space_order=24, time_order=12, time_pieces=4):
    """u(x, t) = int_{s0}^{t} int Gamma(x, y; t, s) f(y, s) dy ds.

    ``source(y, s)`` takes an (..., n) array of points and a scalar time and
    vanishes outside ``time_window = (s0, s1)``. When ``space_box = (lo, hi)``
    is given the source must vanish outside the box; a nonzero value at a
    quadrature node outside it raises :class:`ArgumentError`. Space is
    integrated with a whitened Gauss-Hermite rule, time with composite
    Gauss-Legendre on panels aligned to the schedule breakpoints.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = schedule.dimension
    if pts.shape[-1] != n:
        raise ArgumentError("evaluation points do not match schedule dimension")
    s0, s1 = time_window
    hi_t = min(t, s1)
    out = np.zeros(len(pts))
    if hi_t <= s0:
        return out
    gl_x, gl_w = np.polynomial.legendre.leggauss(time_order)
    zz, ww = _tensor_rule(n, space_order)
    if space_box is not None:
        lo_box = np.asarray(space_box[0], dtype=float)
        hi_box = np.asarray(space_box[1], dtype=float)
    for a, b in _panels(schedule, s0, hi_t, time_pieces):
        half = 0.5 * (b - a)
        for xg, wg in zip(gl_x, gl_w):
            s = a + half * (xg + 1.0)
            m = integrate(schedule, s, t)
            c = np.linalg.cholesky(m)
            shift = np.sqrt(2.0) * zz @ c.T
            for i, x in enumerate(pts):
                nodes = x[None, :] - shift
                vals = np.asarray(source(nodes, s), dtype=float)
                if space_box is not None:
                    outside = np.any((nodes < lo_box) | (nodes > hi_box), axis=1)
                    if np.any(outside & (vals != 0.0)):
                        raise ArgumentError("source support exceeds the declared space box")
                out[i] += half * wg * np.sum(ww * vals)
    return out
