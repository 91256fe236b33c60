import numpy as np
import pytest
from hypothesis import given, strategies as st

from wedgelab import CoefficientSchedule
from wedgelab.errors import ArgumentError, CertificationError
from wedgelab.kernel import (SampleGrid, certify_gaussian_bound, chapman_kolmogorov_residual,
                             duhamel_solve, gamma, gamma_derivative, gamma_derivative_fd, mass)

from conftest import random_spd

seeds = st.integers(0, 2 ** 32 - 1)


def two_layer(rng, n=2):
    return CoefficientSchedule([random_spd(rng, n), random_spd(rng, n)], [float(rng.uniform(0.2, 0.6))])


def fourier_oracle(schedule, d, t, s, steps=2000, L=None, N=241):
    """(2 pi)^-2 int exp(i xi.d) u_hat(xi) dxi with u_hat' = -xi^T A xi u_hat
    stepped on a dense time grid aligned with the breakpoints."""
    cuts = [s] + [b for b in schedule.breakpoints if s < b < t] + [t]
    logu = np.zeros((N, N))
    lam_min = np.inf
    if L is None:
        mtot = sum((b - a) * schedule.at(0.5 * (a + b)) for a, b in zip(cuts[:-1], cuts[1:]))
        lam_min = np.linalg.eigvalsh(mtot)[0]
        L = np.sqrt(50.0 / lam_min)
    xi = np.linspace(-L, L, N)
    X, Y = np.meshgrid(xi, xi, indexing="ij")
    for a, b in zip(cuts[:-1], cuts[1:]):
        k = max(int(steps * (b - a) / (t - s)), 1)
        dt = (b - a) / k
        for j in range(k):
            A = schedule.at(a + (j + 0.5) * dt)
            logu -= dt * (A[0, 0] * X * X + 2 * A[0, 1] * X * Y + A[1, 1] * Y * Y)
    integrand = np.cos(X * d[0] + Y * d[1]) * np.exp(logu)
    w = (xi[1] - xi[0]) ** 2
    return float(np.sum(integrand) * w / (2 * np.pi) ** 2)


class TestGamma:
    def test_origin_value(self):
        assert gamma(CoefficientSchedule.heat(2), [0, 0], [0, 0], 1.0, 0.0) == pytest.approx(1 / (4 * np.pi), rel=1e-15)

    def test_distance_two(self):
        v = gamma(CoefficientSchedule.heat(2), [2.0, 0.0], [0, 0], 1.0, 0.0)
        assert v == pytest.approx(np.exp(-1) / (4 * np.pi), rel=1e-14)

    def test_fourier_oracle_two_layers(self, rng):
        s = two_layer(rng)
        for _ in range(3):
            x, y = rng.normal(size=2) * 0.7, rng.normal(size=2) * 0.7
            t0, t1 = -0.2, float(rng.uniform(0.7, 1.2))
            ref = fourier_oracle(s, x - y, t1, t0)
            assert gamma(s, x, y, t1, t0) == pytest.approx(ref, abs=1e-8)

    def test_nonpositive_elapsed_time(self):
        s = CoefficientSchedule.heat(3)
        assert gamma(s, [1, 0, 0], [0, 0, 0], 0.5, 0.5) == 0.0
        assert np.all(gamma(s, np.zeros((4, 3)), np.ones(3), 0.0, 1.0) == 0.0)

    @given(seeds)
    def test_translation_and_positivity(self, seed):
        rng = np.random.default_rng(seed)
        s = two_layer(rng, 3)
        x, y, z = rng.normal(size=(3, 3))
        v = gamma(s, x, y, 1.0, 0.1)
        assert v > 0
        assert gamma(s, x + z, y + z, 1.0, 0.1) == pytest.approx(v, rel=1e-12)

    @given(seeds)
    def test_reversal(self, seed):
        rng = np.random.default_rng(seed)
        s = two_layer(rng)
        x, y = rng.normal(size=(2, 2))
        a = gamma(s, x, y, 0.9, -0.3)
        b = gamma(s.reversed(), y, x, 0.3, -0.9)
        assert b == pytest.approx(a, rel=1e-14)


class TestDerivatives:
    def test_odd_derivatives_vanish_on_diagonal(self, rng):
        s = two_layer(rng)
        for alpha in ([1, 0], [0, 1], [2, 1], [0, 3]):
            assert gamma_derivative(s, [0.2, 0.1], [0.2, 0.1], 1.0, 0.0, 0, alpha) == pytest.approx(0.0, abs=1e-15)

    def test_heat_first_derivative(self):
        s = CoefficientSchedule.heat(2)
        a, tau = 0.7, 0.4
        v = gamma_derivative(s, [a, 0], [0, 0], tau, 0.0, 0, [1, 0])
        assert v == pytest.approx(-a / (2 * tau) * gamma(s, [a, 0], [0, 0], tau, 0.0), rel=1e-14)

    @pytest.mark.parametrize("k, alpha, beta", [(0, [1, 0], None), (0, [1, 1], None),
                                                (0, None, [0, 2]), (1, None, None), (1, [1, 0], None)])
    def test_against_finite_differences(self, rng, k, alpha, beta):
        s = two_layer(rng)
        for _ in range(5):
            x, y = rng.normal(size=(2, 2)) * 0.5
            a = gamma_derivative(s, x, y, 0.95, 0.0, k, alpha, beta)
            b = gamma_derivative_fd(s, x, y, 0.95, 0.0, k, alpha, beta)
            # floor at a tenth of the natural size Gamma tau^(-order/2) (zero crossings)
            order = 2 * k + sum(alpha or []) + sum(beta or [])
            scale = gamma(s, x, y, 0.95, 0.0) * 0.95 ** (-order / 2)
            assert abs(a - b) <= 1e-6 * max(abs(a), 0.1 * scale)

    @pytest.mark.parametrize("alpha, beta, e", [([0, 2], [0, 0], [1, 0]), ([2, 0], [0, 1], [0, 1]),
                                                ([1, 1], [1, 0], [0, 1])])
    def test_high_orders_by_one_difference(self, rng, alpha, beta, e):
        # D_x^(alpha+e) D_y^beta from one central difference of the analytic lower order
        s = two_layer(rng)
        x, y = rng.normal(size=(2, 2)) * 0.5
        h = 1e-4 * np.sqrt(0.95)
        e = np.asarray(e, dtype=float)
        lo = lambda z: gamma_derivative(s, z, y, 0.95, 0.0, 0, alpha, beta)
        fd = (lo(x + h * e) - lo(x - h * e)) / (2 * h)
        a = gamma_derivative(s, x, y, 0.95, 0.0, 0, list(np.add(alpha, e.astype(int))), beta)
        assert fd == pytest.approx(a, rel=1e-6, abs=1e-10)

    def test_time_derivative_undefined_at_breakpoint(self):
        s = CoefficientSchedule([np.eye(2), 2 * np.eye(2)], [0.5])
        with pytest.raises(ArgumentError):
            gamma_derivative(s, [0, 0], [1, 0], 0.5, 0.0, 1)

    def test_order_limits(self):
        s = CoefficientSchedule.heat(2)
        with pytest.raises(ArgumentError):
            gamma_derivative(s, [0, 0], [1, 0], 1.0, 0.0, 2)
        with pytest.raises(ArgumentError):
            gamma_derivative(s, [0, 0], [1, 0], 1.0, 0.0, 0, [3, 0], [2, 0])


class TestCertificates:
    @pytest.mark.parametrize("n", [2, 3])
    def test_heat_is_its_own_bound(self, n):
        c = certify_gaussian_bound(CoefficientSchedule.heat(n))
        assert c.sigma == 0.25
        assert c.C == pytest.approx((4 * np.pi) ** (-n / 2), rel=1e-14)

    def test_anisotropic_layer(self):
        c = certify_gaussian_bound(CoefficientSchedule.constant(np.diag([2.0, 0.5])))
        assert c.sigma >= 0.5 / 8

    def test_second_derivative_certificate(self):
        # |d11 Gamma| tau^2 = e^(-xi^2/4) |xi1^2/4 - 1/2| / (4 pi): the polynomial factor
        # rules out the sharp rate 1/4; at sigma = 1/8 the maximum of
        # e^(-u/8) |u/4 - 1/2| is 2 e^(-5/4) at u = 10
        s = CoefficientSchedule.heat(2)
        c2 = certify_gaussian_bound(s, (0, [2, 0], None))
        assert c2.sigma == 0.125
        assert c2.C == pytest.approx(2 * np.exp(-1.25) / (4 * np.pi), rel=2e-3)
        d = c2.to_dict()
        assert set(d) == {"order", "sigma", "C", "worst_sample", "ladder_index"}

    def test_failure_is_reported(self):
        # along x1 the ratio |xi^2/4 - 1/2| e^(-xi^2/4) increases on [1.5, 2.4], so no
        # decay rate makes the tail smaller than the inner samples
        grid = SampleGrid(xis=np.array([1.5, 2.0, 2.4]), taus=np.array([1.0]), n_directions=1)
        with pytest.raises(CertificationError) as exc:
            certify_gaussian_bound(CoefficientSchedule.heat(2), (0, [2, 0], None), grid)
        assert "worst" in exc.value.report


class TestQuadrature:
    def test_mass_examples(self, rng):
        for s in (CoefficientSchedule.constant(np.diag([4.0, 1.0])), two_layer(rng)):
            assert mass(s, [0.3, -0.2], 1.0, 0.0) == pytest.approx(1.0, abs=1e-6)
            assert mass(s, [0.3, -0.2], 1e-6, 0.0) == pytest.approx(1.0, abs=1e-6)

    def test_chapman_kolmogorov(self, rng):
        s = two_layer(rng)
        assert chapman_kolmogorov_residual(s, [0.1, 0.4], [-0.2, 0.3], 1.0, 0.45, 0.0) < 1e-6

    def test_duhamel_trivial(self):
        s = CoefficientSchedule.heat(2)
        pts = np.array([[0.0, 0.0], [0.5, -1.0]])
        assert np.all(duhamel_solve(lambda y, t: np.zeros(len(y)), s, pts, 1.0, (0.0, 1.0)) == 0)
        u = duhamel_solve(lambda y, t: np.ones(len(y)), s, pts, 0.7, (0.0, 1.0))
        assert np.allclose(u, 0.7, rtol=1e-12)

    def test_duhamel_box_gate(self):
        s = CoefficientSchedule.heat(2)
        with pytest.raises(ArgumentError):
            duhamel_solve(lambda y, t: np.ones(len(y)), s, [[0.0, 0.0]], 1.0, (0.0, 1.0),
                          space_box=([-1, -1], [1, 1]))

    def test_duhamel_matches_fd(self):
        from wedgelab.simulator import SectorGrid, solve_sector
        s = CoefficientSchedule.constant(np.array([[1.0, 0.2], [0.2, 0.6]]))
        w2 = 0.02

        def f(y, t):
            tt = np.clip(t / 0.1, 0, 1)
            return np.sin(np.pi * tt) ** 2 * np.exp(-np.sum(np.asarray(y) ** 2, axis=-1) / (2 * w2))
        pts = np.array([[0.0, 0.0], [0.1, 0.05], [-0.2, 0.1]])
        ref = duhamel_solve(f, s, pts, 0.1, (0.0, 0.1), space_order=32, time_order=16)
        grid = SectorGrid(None, 1 / 128, 2.0)
        fld = solve_sector(s, grid, horizon=0.1, dt=1 / 4000, source=f)
        idx = [grid.node_of(p) for p in pts]
        fd = fld.values[-1][idx]
        assert np.max(np.abs(fd - ref)) <= 0.01 * np.max(np.abs(ref))
