"""Diffusion models: generator, stepping, exits, hitting probabilities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqstop.diffusion import (
    DiffusionModel,
    PathConfig,
    SmoothFn,
    check_smooth_fn,
    gbm_hitting_prob,
    gbm_two_sided_exit,
    generator_apply,
    sample_symmetric_exit,
    sample_symmetric_exit_batch,
    simulate_step,
)
from eqstop.errors import (
    BoundaryEscapeError,
    DomainError,
    HorizonExceededError,
    MissingDerivativeError,
)
from eqstop.payoff import make_variance_problem


def poly2():
    return SmoothFn(lambda x: x**2, lambda x: 2.0 * x, lambda x: 2.0, lambda x: 0.0)


def ident():
    return SmoothFn(lambda x: x, lambda x: 1.0, lambda x: 0.0)


class TestGeneratorApply:
    def test_wiener_square(self):
        assert generator_apply(DiffusionModel.wiener(), poly2(), 3.0) == pytest.approx(1.0)

    def test_gbm_square(self):
        m = DiffusionModel.gbm(-0.1, 0.15)
        assert generator_apply(m, poly2(), 1.0) == pytest.approx(-0.05, abs=1e-14)

    def test_gbm_identity(self):
        m = DiffusionModel.gbm(0.07, 0.45)
        assert generator_apply(m, ident(), 2.0) == pytest.approx(0.14)

    @pytest.mark.parametrize("p", [1, 2, 3, 5])
    def test_gbm_monomials_machine_precision(self, p):
        mu, s2 = 0.07, 0.45
        m = DiffusionModel.gbm(mu, s2)
        k = SmoothFn(
            lambda x: x**p,
            lambda x: p * x ** (p - 1),
            lambda x: p * (p - 1) * x ** (p - 2),
        )
        x = 1.7
        expected = (p * mu + 0.5 * p * (p - 1) * s2) * x**p
        assert generator_apply(m, k, x) == pytest.approx(expected, rel=1e-14)

    def test_domain_and_missing_derivative_errors(self):
        m = DiffusionModel.gbm(0.0, 0.1)
        with pytest.raises(DomainError):
            generator_apply(m, poly2(), -1.0)
        with pytest.raises(MissingDerivativeError):
            generator_apply(m, SmoothFn(lambda x: x**2), 1.0)


class TestSimulateStep:
    def test_gbm_zero_noise(self):
        m = DiffusionModel.gbm(0.0, 0.04)
        assert simulate_step(m, 1.0, 1.0, 0.0) == pytest.approx(math.exp(-0.02))

    def test_wiener(self):
        assert simulate_step(DiffusionModel.wiener(), 0.0, 0.25, 2.0) == pytest.approx(1.0)

    def test_zero_dt(self):
        m = DiffusionModel.gbm(0.3, 0.2)
        assert simulate_step(m, 1.0, 0.0, 1.7) == 1.0

    def test_euler_redraw_keeps_interior(self):
        m = DiffusionModel.euler(lambda x: 0.0 * x, lambda x: 1.0 + 0.0 * x, (0.0, 1.0))
        rng = np.random.default_rng(5)
        # huge noise would leave (0,1); redraws with halved dt must recover
        x = simulate_step(m, 0.5, 0.01, 8.0, rng=rng)
        assert 0.0 < x < 1.0

    def test_euler_without_rng_raises(self):
        m = DiffusionModel.euler(lambda x: 0.0 * x, lambda x: 1.0 + 0.0 * x, (0.0, 1.0))
        with pytest.raises(BoundaryEscapeError):
            simulate_step(m, 0.5, 0.01, 50.0)


class TestSmoothFnChecks:
    def test_named_problem_derivatives_consistent(self):
        prob = make_variance_problem()
        for fn in (prob.f, prob.g, prob.h):
            check_smooth_fn(fn, [-1.7, 0.3, 2.9])

    def test_inconsistent_derivative_detected(self):
        bad = SmoothFn(lambda x: x**2, lambda x: 2.0 * x + 0.1)
        with pytest.raises(DomainError):
            check_smooth_fn(bad, [1.0])


class TestSymmetricExit:
    def test_wiener_mean_exit_time(self):
        pc = PathConfig(seed=101, dt=1e-3, horizon=60.0)
        st, tau = sample_symmetric_exit_batch(DiffusionModel.wiener(), 0.0, 1.0, pc, 30_000)
        se = tau.std(ddof=1) / math.sqrt(len(tau))
        assert abs(tau.mean() - 1.0) <= 3.0 * se
        p_up = np.mean(st == 1.0)
        assert abs(p_up - 0.5) <= 3.0 * math.sqrt(0.25 / len(st))
        assert set(np.unique(st)) == {-1.0, 1.0}

    def test_single_path_matches_batch(self):
        pc = PathConfig(seed=3, dt=1e-4, horizon=60.0)
        m = DiffusionModel.wiener()
        s, t = sample_symmetric_exit(m, 0.0, 0.5, pc, path_index=4)
        sb, tb = sample_symmetric_exit_batch(m, 0.0, 0.5, pc, 5)
        assert (s, t) == (sb[4], tb[4])

    def test_gbm_small_h_recovers_local_variance(self):
        m = DiffusionModel.gbm(-0.1, 0.15)
        h = 0.01
        pc = PathConfig(seed=8, dt=1e-3 * h * h / 0.15, horizon=10.0)
        _, tau = sample_symmetric_exit_batch(m, 1.0, h, pc, 30_000)
        est = h * h / tau.mean()
        assert abs(est - 0.15) / 0.15 < 0.05

    def test_domain_and_horizon_errors(self):
        m = DiffusionModel.gbm(0.0, 0.1)
        pc = PathConfig(seed=1, dt=1e-3, horizon=1.0)
        with pytest.raises(DomainError):
            sample_symmetric_exit(m, 0.5, 0.6, pc)  # window leaves (0, inf)
        with pytest.raises(HorizonExceededError):
            sample_symmetric_exit_batch(
                DiffusionModel.wiener(), 0.0, 20.0, PathConfig(seed=1, dt=0.05, horizon=2.0), 50
            )


class TestGbmExactness:
    def test_terminal_mean_any_dt(self):
        # the exact scheme is dt-exact in distribution: censor at t and
        # compare E[X_t] to x e^(mu t) at a coarse step
        from eqstop.strategy import ContinuationSet, MixedStrategy, sample_stop_batch

        mu, s2, t_end = 0.12, 0.3, 2.0
        m = DiffusionModel.gbm(mu, s2)
        strat = MixedStrategy.pure(ContinuationSet.whole((0.0, math.inf)))
        pc = PathConfig(seed=6, dt=0.5, horizon=t_end)
        st, _, kind = sample_stop_batch(m, strat, 1.0, pc, 50_000)
        assert (kind == 2).all()
        se = st.std(ddof=1) / math.sqrt(len(st))
        assert abs(st.mean() - math.exp(mu * t_end)) <= 3.0 * se


class TestHittingProbability:
    def test_at_threshold(self):
        assert gbm_hitting_prob(0.3, 0.7, 0.7) == 1.0

    def test_hand_value(self):
        assert gbm_hitting_prob(0.5, 0.25, 1.0) == pytest.approx(0.5)

    def test_figure2_point(self):
        # b^(xi-1) x^(1-xi) at the figure-2 parameters
        assert gbm_hitting_prob(0.14 / 0.45, 0.2, 0.4105571847507331) == pytest.approx(
            0.6092982382750922, rel=1e-12
        )

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            gbm_hitting_prob(1.2, 0.5, 1.0)
        with pytest.raises(DomainError):
            gbm_hitting_prob(0.5, 2.0, 1.0)

    def test_two_sided_endpoints(self):
        xi = 0.14 / 0.45
        assert gbm_two_sided_exit(xi, 1.0, 1.0, 2.0) == 0.0
        assert gbm_two_sided_exit(xi, 2.0, 1.0, 2.0) == 1.0
        assert gbm_two_sided_exit(xi, 1.5, 1.0, 2.0) == pytest.approx(
            0.5264854207973872, rel=1e-12
        )

    @given(
        xi=st.floats(0.05, 0.95),
        c=st.floats(0.1, 1.0),
        span=st.floats(0.1, 3.0),
        frac=st.floats(0.0, 1.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_two_sided_range_and_monotonicity(self, xi, c, span, frac):
        d = c + span
        x = c + frac * span
        p = gbm_two_sided_exit(xi, x, c, d)
        assert 0.0 <= p <= 1.0
        x2 = min(x + 0.01 * span, d)
        assert gbm_two_sided_exit(xi, x2, c, d) >= p - 1e-12


class TestPathConfig:
    def test_validation(self):
        with pytest.raises(DomainError):
            PathConfig(seed=1, dt=0.0)
        with pytest.raises(DomainError):
            PathConfig(seed=1, dt=2.0, horizon=1.0)
