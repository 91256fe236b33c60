import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wedgelab import CoefficientSchedule, ConeGeometry
from wedgelab.errors import ArgumentError
from wedgelab.estimates import (BumpSource, MixedNormAccumulator, WeightedNormSpec, aux_integral,
                                caccioppoli_check, coercivity_scan, gradient_interpolation_check,
                                hardy_check, hardy_passes, random_bump, sine_profile,
                                weighted_norm, window)
from wedgelab.estimates.norms import space_weights
from wedgelab.simulator import GridField, SectorGrid, solve_sector

HEAT = CoefficientSchedule.heat(2)
QUADRANT = ConeGeometry.sector(np.pi / 2, np.pi / 4)


def random_field(rng, grid, k=4):
    vals = rng.normal(size=(k, grid.size))
    return GridField(grid, np.linspace(0, 1, k), vals, np.zeros((k, len(grid.boundary_points))),
                     HEAT, 1 / (k - 1), {})


def x1x2_field(h, T=0.25):
    g = SectorGrid(QUADRANT, h)
    xy = lambda p, t=None: p[:, 0] * p[:, 1]
    return solve_sector(HEAT, g, initial=xy, arc_data=xy, horizon=T, dt=T / 4,
                        snapshots=list(np.linspace(0, T, 5)))


class TestNorms:
    def test_half_annulus(self):
        g = SectorGrid(ConeGeometry.sector(np.pi, np.pi / 2), 1 / 64)
        f = lambda p, t: ((np.hypot(p[:, 0], p[:, 1]) > 0.5)).astype(float)
        v = weighted_norm(f, WeightedNormSpec(2, 2), grid=g, times=[0.0, 1.0])
        assert v == pytest.approx(np.sqrt(3 * np.pi / 8), rel=1e-3)

    @settings(max_examples=15)
    @given(st.integers(0, 2 ** 31), st.floats(1.1, 5.0), st.floats(-1.5, 2.0),
           st.sampled_from(["value", "grad", "hess", "dt"]))
    def test_modes_agree_at_p_equals_q(self, seed, p, mu, sel):
        rng = np.random.default_rng(seed)
        fld = random_field(rng, SectorGrid(ConeGeometry.sector(2.5, 0.2), 1 / 32))
        a = weighted_norm(fld, WeightedNormSpec(p, p, mu, "plain"), sel, warn=False)
        b = weighted_norm(fld, WeightedNormSpec(p, p, mu, "tilde"), sel, warn=False)
        assert a == pytest.approx(b, rel=1e-12)

    @settings(max_examples=15)
    @given(st.integers(0, 2 ** 31), st.floats(-5, 5), st.sampled_from(["plain", "tilde"]))
    def test_homogeneity(self, seed, c, mode):
        rng = np.random.default_rng(seed)
        fld = random_field(rng, SectorGrid(QUADRANT, 1 / 32))
        spec = WeightedNormSpec(2.5, 1.5, 0.5, mode)
        for sel in ("value", "hess"):
            assert weighted_norm(fld.scaled(c), spec, sel) == pytest.approx(abs(c) * weighted_norm(fld, spec, sel), rel=1e-12)

    @settings(max_examples=15)
    @given(st.integers(0, 2 ** 31), st.floats(1.1, 4.0), st.floats(1.1, 4.0), st.floats(0.0, 2.0))
    def test_holder_monotone_for_probability_weights(self, seed, p, q, dp):
        rng = np.random.default_rng(seed)
        w = rng.uniform(size=50)
        w /= w.sum()
        tw = rng.uniform(size=6)
        tw /= tw.sum()
        g = rng.normal(size=(6, 50))

        def norm(pp, qq):
            acc = MixedNormAccumulator(WeightedNormSpec(pp, qq), w)
            for gk, wk in zip(g, tw):
                acc.add(gk, wk)
            return acc.result()
        assert norm(p + dp, q) >= norm(p, q) * (1 - 1e-12)
        assert norm(p, q + dp) >= norm(p, q) * (1 - 1e-12)

    def test_nonintegrable_weight_warns(self):
        fld = random_field(np.random.default_rng(0), SectorGrid(QUADRANT, 1 / 32))
        with pytest.warns(RuntimeWarning):
            weighted_norm(fld, WeightedNormSpec(2, 2, -1.0), "value")
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            weighted_norm(fld, WeightedNormSpec(2, 2, -0.9), "value")

    def test_spec_validation(self):
        for kw in (dict(p=1.0, q=2), dict(p=2, q=np.inf), dict(p=2, q=2, mode="x")):
            with pytest.raises(ArgumentError):
                WeightedNormSpec(**kw)

    def test_cut_cell_weights_converge_to_the_area(self):
        # cells of boundary points are not node cells: an O(h) strip is missing
        err = [0.6 - space_weights(SectorGrid(ConeGeometry.sector(1.2, 0.7), h)).sum()
               for h in (1 / 64, 1 / 128, 1 / 256)]
        assert all(0 < e < 3.2 * h for e, h in zip(err, (1 / 64, 1 / 128, 1 / 256)))
        assert err[2] < 0.6 * err[1] < 0.36 * err[0]


class TestCoercivity:
    def test_window(self):
        assert window(2, 2, 2) == (-1, 3)

    def test_midwindow_ratio_positive(self):
        fam = (BumpSource("middle", 0.3),)
        tab = coercivity_scan(HEAT, ConeGeometry.sector(np.pi / 2), [1.0], [1 / 32], fam, horizon=0.1)
        r = tab["rows"][0]
        assert np.isfinite(r.ratio) and r.ratio > 0 and r.inside_window
        assert tab["window"] == pytest.approx((-1, 3))


class TestGradientInterpolation:
    def test_x1x2(self):
        lhs, rhs = gradient_interpolation_check(x1x2_field(1 / 64), WeightedNormSpec(2, 2, 1.0))
        assert 0 < lhs < 3 * rhs and np.isfinite(rhs)
        # closed forms for the stationary field on the unit quarter disk, unit time
        assert lhs == pytest.approx(np.sqrt(np.pi / 8) / 2, rel=0.03)

    def test_zero(self):
        fld = x1x2_field(1 / 32).scaled(0.0)
        assert gradient_interpolation_check(fld, WeightedNormSpec(2, 2, 1.0)) == (0.0, 0.0)


class TestHardy:
    def test_zero(self):
        g = SectorGrid(QUADRANT, 1 / 32)
        assert hardy_check(lambda p: np.zeros(len(p)), g) == (0.0, 0.0)

    def test_sine_profile(self):
        g = SectorGrid(QUADRANT, 1 / 64)
        lhs, rhs = hardy_check(sine_profile(g.sector), g)
        assert lhs >= rhs > 0

    def test_random_bumps(self, rng):
        g = SectorGrid(ConeGeometry.sector(1.9, -0.4), 1 / 64)
        for _ in range(10):
            assert hardy_passes(*hardy_check(random_bump(g.sector, rng), g))

    def test_requires_vanishing(self):
        g = SectorGrid(QUADRANT, 1 / 32)
        with pytest.raises(ArgumentError):
            hardy_check(lambda p: np.ones(len(p)), g)


@pytest.fixture(scope="module")
def field():
    h = 1 / 32
    g = SectorGrid(ConeGeometry.sector(np.pi / 2), h)
    return solve_sector(HEAT, g, arc_data=lambda p, t: np.ones(len(p)), horizon=1.0, dt=h,
                        snapshots=list(np.arange(1, 33) * h))


class TestCaccioppoli:
    def test_ratio_bounded(self, field):
        for mu in (0.0, 1.5):
            lhs, rhs = caccioppoli_check(field, mu, 1.0)
            assert 0 < lhs and lhs / rhs < 100

    def test_zero(self, field):
        assert caccioppoli_check(field.scaled(0.0), 0.0, 1.0) == (0.0, 0.0)

    def test_hypothesis_gate(self, field):
        with pytest.raises(ArgumentError):
            caccioppoli_check(field, 2.0, 1.0)


class TestAux:
    def test_quadrant_gaussian(self):
        v, ratio = aux_integral(0, 0, 0, 1.0, np.zeros(2), ConeGeometry.sector(np.pi / 2))
        assert v == pytest.approx(np.pi / 4, abs=1e-8) and ratio == v

    def test_reflex_sector(self):
        v, _ = aux_integral(0, 0, 0, 1.0, np.zeros(2), ConeGeometry.sector(1.5 * np.pi))
        assert v == pytest.approx(3 * np.pi / 4, abs=1e-8)

    def test_distance_weight_converges(self):
        v, _ = aux_integral(-0.5, 0, 0, 1.0, np.array([0.5, 0.0]), ConeGeometry.sector(np.pi / 2))
        assert np.isfinite(v) and v > 0

    def test_closed_form_distance_weight(self):
        # alpha = 1, w = 0: int_quadrant d(z) e^{-|z|^2} = 2 int_0^{pi/4} sin(psi) dpsi * int r^2 e^{-r^2}
        v, _ = aux_integral(1.0, 0, 0, 1.0, np.zeros(2), ConeGeometry.sector(np.pi / 2))
        ref = 2 * (1 - np.cos(np.pi / 4)) * np.sqrt(np.pi) / 4
        assert v == pytest.approx(ref, rel=1e-9)

    def test_gates(self):
        with pytest.raises(ArgumentError):
            aux_integral(-1.1, 0, 0, 1.0, np.zeros(2), ConeGeometry.sector(np.pi / 2))
        with pytest.raises(ArgumentError):
            aux_integral(-0.5, -1.6, 0, 1.0, np.zeros(2), ConeGeometry.sector(np.pi / 2))
