"""Mixed strategies: classification, stop sampling, intensity inversion."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from eqstop.diffusion import DiffusionModel, PathConfig, SmoothFn
from eqstop.errors import DomainError, TargetNotReachedError
from eqstop.strategy import (
    ContinuationSet,
    MixedStrategy,
    PointClass,
    StopKind,
    classify_point,
    integrated_intensity_invert,
    sample_stop,
    sample_stop_batch,
)


class TestContinuationSet:
    def test_validation(self):
        with pytest.raises(DomainError):
            ContinuationSet([(1.0, 1.0)])
        with pytest.raises(DomainError):
            ContinuationSet([(0.0, 2.0), (1.0, 3.0)])
        with pytest.raises(DomainError):
            ContinuationSet([(2.0, 3.0), (0.0, 1.0)])

    def test_boundary_excludes_state_interval_edges(self):
        c = ContinuationSet([(0.0, 0.41)])
        assert c.boundary((0.0, math.inf)) == [0.41]
        assert c.boundary() == [0.0, 0.41]
        assert ContinuationSet([(-1.0, 1.0)]).boundary((-math.inf, math.inf)) == [-1.0, 1.0]
        assert ContinuationSet.empty().boundary() == []

    def test_contains_is_strict(self):
        c = ContinuationSet([(0.0, 0.41)])
        assert c.contains(0.2)
        assert not c.contains(0.41)
        assert not c.contains(0.0)


class TestClassifyPoint:
    @pytest.mark.parametrize(
        "x,expected",
        [
            (0.2, PointClass.IN_C),
            (0.41, PointClass.BOUNDARY),
            (0.5, PointClass.INT_COMPLEMENT),
            (0.41 + 5e-13, PointClass.BOUNDARY),
            (0.41 + 1e-11, PointClass.INT_COMPLEMENT),
        ],
    )
    def test_threshold_set(self, x, expected):
        c = ContinuationSet([(0.0, 0.41)])
        assert classify_point(c, x, (0.0, math.inf)) is expected

    def test_every_point_gets_exactly_one_class(self):
        c = ContinuationSet([(-1.0, 0.5), (1.0, 2.0)])
        for x in np.linspace(-2.0, 3.0, 333):
            assert classify_point(c, x) in PointClass


class TestSampleStop:
    def test_immediate_outside_c(self, fig1_model):
        strat = MixedStrategy.pure(ContinuationSet([(0.0, 0.41)]))
        pc = PathConfig(seed=2, dt=1e-3, horizon=10.0)
        for x in (0.41, 0.6):
            out = sample_stop(fig1_model, strat, x, pc)
            assert out.kind is StopKind.IMMEDIATE
            assert out.time == 0.0 and out.state == x

    def test_never_stops_censors(self, fig1_model):
        strat = MixedStrategy.pure(ContinuationSet.whole((0.0, math.inf)))
        pc = PathConfig(seed=2, dt=1e-3, horizon=7.5)
        out = sample_stop(fig1_model, strat, 1.0, pc)
        assert out.kind is StopKind.CENSORED
        assert out.time == 7.5

    def test_constant_intensity_exponential_mean(self, fig1_model):
        lam = 0.4
        strat = MixedStrategy.constant(lam, ContinuationSet.whole((0.0, math.inf)))
        pc = PathConfig(seed=12, dt=1e-3, horizon=200.0)
        _, times, kind = sample_stop_batch(fig1_model, strat, 1.0, pc, 100_000)
        assert (kind == 0).all()
        se = times.std(ddof=1) / math.sqrt(len(times))
        assert abs(times.mean() - 1.0 / lam) <= 3.0 * se

    def test_competing_risks_partition(self, fig1_model):
        strat = MixedStrategy.constant(0.3, ContinuationSet([(0.5, 2.0)]))
        pc = PathConfig(seed=9, dt=1e-3, horizon=5.0)
        _, _, kind = sample_stop_batch(fig1_model, strat, 1.0, pc, 5000)
        counts = {k: int((kind == k).sum()) for k in (0, 1, 2, 3)}
        assert sum(counts.values()) == 5000
        assert counts[0] > 0 and counts[1] > 0  # both risks realized

    def test_cox_jump_times_ks_against_exponential(self):
        # distant barriers force the stepped trapezoid accumulation; for a
        # constant intensity the jump law must still be exactly exponential
        lam = 0.5
        model = DiffusionModel.wiener()
        strat = MixedStrategy.constant(lam, ContinuationSet([(-25.0, 25.0)]))
        pc = PathConfig(seed=14, dt=0.01, horizon=100.0)
        _, times, kind = sample_stop_batch(model, strat, 0.0, pc, 100_000)
        jumped = kind == 0
        assert np.mean(~jumped) < 1e-3
        pvalue = stats.kstest(times[jumped], "expon", args=(0, 1.0 / lam)).pvalue
        assert pvalue > 0.01

    def test_state_dependent_intensity_trapezoid(self, fig1_model):
        # lambda(x) = c as a callable exercises the state-dependent path;
        # the law must match the constant-intensity closed form
        lam = SmoothFn(lambda x: 0.4 * np.ones_like(np.asarray(x, dtype=float)))
        strat = MixedStrategy.cox(lam, ContinuationSet.whole((0.0, math.inf)))
        pc = PathConfig(seed=15, dt=5e-3, horizon=150.0)
        _, times, kind = sample_stop_batch(fig1_model, strat, 1.0, pc, 20_000)
        se = times[kind == 0].std(ddof=1) / math.sqrt((kind == 0).sum())
        assert abs(times[kind == 0].mean() - 2.5) <= 3.0 * se

    def test_determinism_bitwise(self, fig1_model):
        strat = MixedStrategy.constant(0.2, ContinuationSet([(0.5, 2.0)]))
        pc = PathConfig(seed=123, dt=1e-3, horizon=20.0)
        a = sample_stop(fig1_model, strat, 1.0, pc, path_index=11)
        b = sample_stop(fig1_model, strat, 1.0, pc, path_index=11)
        assert (a.state, a.time, a.kind) == (b.state, b.time, b.kind)


class TestIntegratedIntensityInvert:
    def test_linear(self):
        assert integrated_intensity_invert([0, 1, 2], [0, 1, 2], 0.5) == pytest.approx(0.5)

    def test_flat_then_rise(self):
        assert integrated_intensity_invert([0, 1, 2], [0, 0, 2], 1.0) == pytest.approx(1.5)

    def test_zero_target(self):
        assert integrated_intensity_invert([0, 1, 2], [0, 1, 2], 0.0) == 0.0

    def test_target_not_reached(self):
        with pytest.raises(TargetNotReachedError):
            integrated_intensity_invert([0, 1], [0, 1], 1.5)

    def test_non_monotone_rejected(self):
        with pytest.raises(DomainError):
            integrated_intensity_invert([0, 1, 2], [0, 2, 1], 0.5)

    @given(
        increments=st.lists(st.floats(0.0, 5.0), min_size=1, max_size=20),
        frac=st.floats(0.0, 1.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_inverse_property(self, increments, frac):
        values = np.concatenate([[0.0], np.cumsum(increments)])
        times = np.arange(len(values), dtype=float)
        target = frac * values[-1]
        t = integrated_intensity_invert(times, values, target)
        assert 0.0 <= t <= times[-1]
        # the interpolated curve at t reaches the target
        assert np.interp(t, times, values) == pytest.approx(target, abs=1e-9)


class TestAntithetic:
    def test_pairs_share_stream_and_flip(self, fig1_model):
        strat = MixedStrategy.constant(0.3, ContinuationSet.whole((0.0, math.inf)))
        pc = PathConfig(seed=33, dt=1e-3, horizon=100.0, antithetic=True)
        _, times, _ = sample_stop_batch(fig1_model, strat, 1.0, pc, 2000)
        # antithetic exponential pairs: u and 1-u, so small time pairs with large
        corr = np.corrcoef(times[0::2], times[1::2])[0, 1]
        assert corr < -0.5
