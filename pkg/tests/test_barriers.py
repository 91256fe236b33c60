import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wedgelab import CoefficientSchedule
from wedgelab.barriers import (BarrierSpec, apply_operator, barrier_derivatives, boundary_sign_check,
                               choose_delta, comparison_constant, eval_barrier, gamma_star,
                               s0_value, sample_cylinder, verify_supersolution)
from wedgelab.errors import ArgumentError

Q4 = np.pi / 4


def fd_hessian(f, x, h):
    """Central second differences with one Richardson step (error O(h^4))."""
    n = len(x)
    E = np.eye(n)

    def level(h):
        H = np.empty((n, n))
        f0 = f(x)
        for i in range(n):
            H[i, i] = (f(x + h * E[i]) - 2 * f0 + f(x - h * E[i])) / h ** 2
            for j in range(i + 1, n):
                H[i, j] = H[j, i] = (f(x + h * (E[i] + E[j])) - f(x + h * (E[i] - E[j]))
                                     - f(x - h * (E[i] - E[j])) + f(x - h * (E[i] + E[j]))) / (4 * h * h)
        return H
    a, b = level(h), level(h / 2)
    return (4 * b - a) / 3


def stmt5(kind, gamma=0.5, n=2, m=2, delta=0.05, s=3.0):
    return BarrierSpec(kind, 1.0, 0.0, gamma, rho=1.0, s=s, n=n, m=m, delta=delta)


class TestValues:
    def test_stmt4_lateral_first_term_vanishes(self):
        spec = BarrierSpec("stmt4", 1.0, Q4, gamma_star(1.0, Q4), rho=0.5)
        r = np.linspace(0.01, 0.5, 20)
        x = np.stack([r * np.cos(Q4), r * np.sin(Q4)], axis=-1)
        k = 1.0
        w = eval_barrier(spec, x, 0.0)
        assert w == pytest.approx(k * x[:, 0] ** 2 / (4 * 0.25), rel=1e-12)
        assert np.all(w >= 0)

    def test_stmt4_time_term(self):
        spec = BarrierSpec("stmt4", 1.0, Q4, 0.5, rho=0.5)
        x = np.array([[0.2, 0.05]])
        d = eval_barrier(spec, x, -0.1) - eval_barrier(spec, x, 0.0)
        assert d[0] == pytest.approx(0.1 / (spec.s * 0.5) ** 2, rel=1e-13)

    def test_stmt5_plus_vanishes_on_cone(self):
        spec = stmt5("stmt5_plus", delta=0.1, s=4.0)
        ang = spec.cone_angle
        r = np.linspace(0.05, 1.0, 10)
        t = -0.2
        x = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)
        w = eval_barrier(spec, x, t, check_domain=False)
        assert w == pytest.approx((r ** 2 - t) / 16.0, abs=1e-14)

    def test_s0_heat_value(self):
        assert s0_value(1.0, Q4, 2, 2) == pytest.approx(np.sqrt(2.0))

    @settings(max_examples=25)
    @given(st.floats(0.1, 3.0), st.integers(0, 2 ** 31))
    def test_scaling_covariance(self, rho, seed):
        rng = np.random.default_rng(seed)
        a = BarrierSpec("stmt4", 0.8, 0.6, 0.4, rho=rho, n=3)
        b = BarrierSpec("stmt4", 0.8, 0.6, 0.4, rho=1.0, n=3)
        x, t = sample_cylinder(a, 20, rng)
        assert eval_barrier(a, x, t) == pytest.approx(eval_barrier(b, x / rho, t / rho ** 2), rel=1e-12, abs=1e-14)

    def test_validation(self):
        with pytest.raises(ArgumentError):
            BarrierSpec("stmt4", 1.0, np.pi / 2, 0.5)
        with pytest.raises(ArgumentError):
            BarrierSpec("nope", 1.0, 0.5, 0.5)
        with pytest.raises(ArgumentError):
            BarrierSpec("stmt5_minus", 1.0, 0.0, 0.5, delta=0.1)
        with pytest.raises(ArgumentError):
            eval_barrier(BarrierSpec("stmt4", 1.0, Q4, 0.5), [[0.1, 0.5]], 0.0)


class TestDerivatives:
    @pytest.mark.parametrize("spec", [
        BarrierSpec("stmt4", 1.0, Q4, 0.618, rho=0.5),
        BarrierSpec("stmt4", 0.7, 0.5, 0.3, rho=1.3, n=4, m=3),
        stmt5("stmt5_plus", 0.3, n=3),
        stmt5("stmt5_minus", 0.3, n=3),
        stmt5("stmt5_plus", 0.4, n=3, m=3),
        stmt5("stmt5_minus", 0.2, n=4, m=3, delta=0.08),
    ], ids=["stmt4", "stmt4-m3", "plus", "minus", "plus-m3", "minus-m3"])
    def test_hessian_against_fd(self, spec, rng):
        x, t = sample_cylinder(spec, 20, rng, interior=0.2)
        H, dt = barrier_derivatives(spec, x)
        for k in range(len(x)):
            # step relative to the distance from the singular set
            sc = min(x[k, 0], np.linalg.norm(x[k, :spec.m])) * 0.02
            f = lambda z: float(eval_barrier(spec, z[None], t[k], check_domain=False)[0])
            ref = fd_hessian(f, x[k], sc)
            assert np.max(np.abs(ref - H[k])) <= 1e-7 * max(np.max(np.abs(H[k])), 1.0)
            ht = 1e-3 * spec.depth
            ft = (eval_barrier(spec, x[k][None], t[k] + ht, False)
                  - eval_barrier(spec, x[k][None], t[k] - ht, False))[0] / (2 * ht)
            assert ft == pytest.approx(dt[k], rel=1e-9)


class TestSupersolution:
    def test_stmt4_heat_at_gamma_star(self):
        spec = BarrierSpec("stmt4", 1.0, Q4, gamma_star(1.0, Q4), rho=0.5)
        x, t = sample_cylinder(spec, 10000, np.random.default_rng(1))
        rep = verify_supersolution(spec, CoefficientSchedule.heat(2), x, t)
        assert rep["min"] >= -1e-10 and rep["hypothesis_holds"]

    def test_stmt4_violated_gamma_has_witness(self):
        g = 1.5 * gamma_star(1.0, Q4)
        spec = BarrierSpec("stmt4", 1.0, Q4, g, rho=0.5)
        x, t = sample_cylinder(spec, 10000, np.random.default_rng(1))
        rep = verify_supersolution(spec, CoefficientSchedule.heat(2), x, t)
        assert not spec.hypothesis_holds
        assert rep["min"] < 0
        w = np.array(rep["witness"]["x"])[None]
        assert apply_operator(spec, CoefficientSchedule.heat(2), w, rep["witness"]["t"])[0] == pytest.approx(rep["min"])

    def test_stmt4_anisotropic_layers(self):
        nu = 0.5
        sch = CoefficientSchedule([np.diag([1 / nu, nu]), np.array([[1.2, 0.3], [0.3, 0.9]])], [-0.05])
        spec = BarrierSpec("stmt4", nu, 0.6, gamma_star(nu, 0.6), rho=0.4)
        x, t = sample_cylinder(spec, 5000, np.random.default_rng(2))
        assert verify_supersolution(spec, sch, x, t)["min"] >= -1e-10

    def test_ellipticity_gate(self):
        spec = BarrierSpec("stmt4", 1.0, Q4, 0.5)
        with pytest.raises(ArgumentError):
            verify_supersolution(spec, CoefficientSchedule.constant(np.diag([2.0, 0.5])),
                                 np.array([[0.3, 0.1]]), np.array([-0.1]))

    @pytest.mark.parametrize("kind, gamma", [("stmt5_minus", 0.2), ("stmt5_plus", 0.5)])
    def test_stmt5_with_bisected_delta(self, kind, gamma):
        heat = CoefficientSchedule.heat(2)
        delta, eps, s1 = choose_delta(kind, gamma, heat)
        assert 0 < delta < 0.5 and eps > 0
        spec = BarrierSpec(kind, 1.0, 0.0, gamma, rho=1.0, s=s1, delta=delta)
        x, t = sample_cylinder(spec, 10000, np.random.default_rng(3))
        assert verify_supersolution(spec, heat, x, t)["min"] >= -1e-10


class TestBoundarySigns:
    def test_stmt4(self):
        spec = BarrierSpec("stmt4", 1.0, Q4, gamma_star(1.0, Q4), rho=0.5, n=3)
        rep = boundary_sign_check(spec)
        assert all(v["ok"] for v in rep.values())
        assert rep["lateral"]["min"] >= 0 and rep["initial"]["min"] > 0
        # the sphere minimum sits at the lateral corner at t = 0: k nu^2 cos^2(theta) / 4
        assert comparison_constant(rep) == pytest.approx(0.125, rel=1e-12)

    def test_stmt5_minus_pattern(self):
        delta, _, s1 = choose_delta("stmt5_minus", 0.2, CoefficientSchedule.heat(3), m=2)
        spec = BarrierSpec("stmt5_minus", 1.0, 0.0, 0.2, s=s1, n=3, delta=delta)
        rep = boundary_sign_check(spec)
        assert rep["lateral"]["max"] <= 1e-12 and rep["initial"]["max"] <= 0 and rep["top"]["max"] <= 0
        assert rep["sphere"]["max"] > 0
