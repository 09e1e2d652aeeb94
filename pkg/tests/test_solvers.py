"""Closed-form solvers, the intensity ODE, and the two-equilibria example."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from eqstop import solvers
from eqstop.errors import ParameterConditionError, SingularityError
from eqstop.payoff import make_mean_variance_problem, make_variance_problem

from conftest import FIG2_GAMMA, FIG2_MU, FIG2_SIGMA2


class TestVarianceSolver:
    def test_figure1_values(self, variance_solution):
        assert abs(variance_solution.lambda_ - 0.057735026919) < 1e-10
        assert abs(variance_solution.j_coefficient - 0.401923788647) < 1e-9
        assert variance_solution.psi_slope == pytest.approx(0.3660254037844387, rel=1e-12)

    def test_second_parameter_set(self):
        sol = solvers.solve_variance_gbm(-0.2, 0.1)
        assert sol.lambda_ == pytest.approx(math.sqrt(0.12), rel=1e-14)
        assert sol.j_coefficient == pytest.approx(1.0 / (math.sqrt(3.0) + 1.0) ** 2, rel=1e-14)

    def test_invariants(self, variance_solution):
        mu, s2 = variance_solution.mu, variance_solution.sigma2
        lhs = variance_solution.lambda_**2
        rhs = -(mu**2) * (2 * mu + s2) / s2
        assert abs(lhs - rhs) <= 1e-12 * abs(rhs)
        # the defining root: 2 mu^3 + mu^2 s2 + s2 lam^2 = 0
        assert 2 * mu**3 + mu**2 * s2 + s2 * lhs == pytest.approx(0.0, abs=1e-16)

    def test_boundary_of_condition_rejected(self):
        with pytest.raises(ParameterConditionError):
            solvers.solve_variance_gbm(-0.5, 1.0)
        with pytest.raises(ParameterConditionError):
            solvers.solve_variance_gbm(0.1, 0.3)
        with pytest.raises(ParameterConditionError):
            solvers.solve_variance_gbm(-0.1, 0.0)

    def test_value_function_consistency(self, variance_solution):
        # J = phi - psi^2 pointwise
        for x in (0.2, 1.0, 4.5):
            j = variance_solution.phi(x) - variance_solution.psi(x) ** 2
            assert j == pytest.approx(variance_solution.value(x), rel=1e-12)


class TestMeanVarianceSolver:
    def test_figure2_threshold(self, meanvar_solution):
        assert meanvar_solution.regime is solvers.MeanVarianceRegime.THRESHOLD
        assert abs(meanvar_solution.b - 0.4105572) < 1e-6
        assert meanvar_solution.xi == pytest.approx(14.0 / 45.0, rel=1e-15)

    def test_piecewise_value_matches_display(self, meanvar_solution):
        xi, b, g = meanvar_solution.xi, meanvar_solution.b, FIG2_GAMMA
        for x in np.linspace(0.01, 0.6, 100):
            expected = (
                x
                if x >= b
                else x ** (1 - xi) * (b**xi - g * b ** (1 + xi)) + g * b ** (2 * xi) * x ** (2 - 2 * xi)
            )
            assert meanvar_solution.value(x) == pytest.approx(expected, abs=1e-12)

    def test_value_continuous_at_threshold(self, meanvar_solution):
        b = meanvar_solution.b
        assert meanvar_solution.value(b * (1 - 1e-12)) == pytest.approx(b, abs=1e-9)
        assert meanvar_solution.value(b) == b

    def test_condition_I_holds_inside(self, meanvar_solution):
        for x in np.linspace(0.01, meanvar_solution.b, 200, endpoint=False):
            assert meanvar_solution.value(x) >= x - 1e-12

    def test_smooth_fit_identity(self, meanvar_solution):
        xi, b = meanvar_solution.xi, meanvar_solution.b
        assert (1 - xi) * (1 + FIG2_GAMMA * b) - 1.0 == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize(
        "mu,regime",
        [
            (-0.1, solvers.MeanVarianceRegime.STOP_IMMEDIATELY),
            (0.0, solvers.MeanVarianceRegime.STOP_IMMEDIATELY),
            (0.07, solvers.MeanVarianceRegime.THRESHOLD),
            (0.1125, solvers.MeanVarianceRegime.THRESHOLD),  # exactly sigma2/4
            (0.2, solvers.MeanVarianceRegime.NO_EQUILIBRIUM),
            (0.225, solvers.MeanVarianceRegime.VALUE_UNBOUNDED),  # exactly sigma2/2
            (0.5, solvers.MeanVarianceRegime.VALUE_UNBOUNDED),
        ],
    )
    def test_regimes(self, mu, regime):
        assert solvers.solve_mean_variance_gbm(mu, 0.45, 1.1).regime is regime

    def test_parameter_validation(self):
        with pytest.raises(ParameterConditionError):
            solvers.solve_mean_variance_gbm(0.1, -0.2, 1.0)
        with pytest.raises(ParameterConditionError):
            solvers.solve_mean_variance_gbm(0.1, 0.2, 0.0)

    @given(
        mu=st.floats(-0.3, 0.5),
        sigma2=st.floats(0.05, 1.0),
        gamma=st.floats(0.05, 5.0),
    )
    @settings(max_examples=300, deadline=None)
    def test_classification_stable_away_from_boundaries(self, mu, sigma2, gamma):
        rel = abs(mu - sigma2 / 4) / sigma2
        rel2 = abs(mu - sigma2 / 2) / sigma2
        assume(rel > 1e-9 and rel2 > 1e-9 and abs(mu) / sigma2 > 1e-9)
        base = solvers.solve_mean_variance_gbm(mu, sigma2, gamma).regime
        for bump in (1 - 1e-12, 1 + 1e-12):
            assert solvers.solve_mean_variance_gbm(mu * bump, sigma2, gamma).regime is base

    def test_no_equilibrium_has_no_strategy(self):
        sol = solvers.solve_mean_variance_gbm(0.2, 0.45, 1.1)
        with pytest.raises(ParameterConditionError):
            sol.strategy()
        with pytest.raises(ParameterConditionError):
            sol.value(0.3)


class TestWindowValueFunctions:
    def test_threshold_vf_matches_general_scale_window(self, meanvar_problem, meanvar_solution):
        b = meanvar_solution.b
        explicit = solvers.threshold_value_functions(FIG2_MU, FIG2_SIGMA2, FIG2_GAMMA, b)
        general = solvers.gbm_window_value_functions(meanvar_problem, FIG2_MU, FIG2_SIGMA2, 0.0, b)
        for x in (0.05, 0.2, b, 0.6):
            assert general.phi(x) == pytest.approx(explicit.phi(x), rel=1e-12)
            assert general.psi(x) == pytest.approx(explicit.psi(x), rel=1e-12)
            for side in (-1, 1):
                assert general.d1("phi", x, side) == pytest.approx(
                    explicit.d1("phi", x, side), rel=1e-12
                )
                assert general.d2("psi", x, side) == pytest.approx(
                    explicit.d2("psi", x, side), rel=1e-12
                )

    def test_constant_intensity_vf(self, variance_solution):
        vf = solvers.gbm_constant_intensity_value_functions(
            "variance", -0.1, 0.15, variance_solution.lambda_
        )
        assert vf.phi(2.0) == pytest.approx(variance_solution.phi(2.0), rel=1e-14)
        assert vf.psi(2.0) == pytest.approx(variance_solution.psi(2.0), rel=1e-14)


class TestIntensityODE:
    def test_recovers_constant_intensity(self, variance_problem, variance_solution):
        model = variance_solution.model()
        c = variance_solution.psi_slope
        for x in (0.3, 1.0, 2.7):
            lam = solvers.intensity_from_psi(variance_problem, model, x, c * x, c, 0.0)
            assert lam == pytest.approx(variance_solution.lambda_, abs=1e-9)

    def test_singularity_guard(self, variance_problem, variance_solution):
        with pytest.raises(SingularityError):
            solvers.intensity_from_psi(
                variance_problem, variance_solution.model(), 1.0, 1.0, 1.0, 0.0
            )

    def test_meanvar_numerator_nonpositive_inside_c(self, meanvar_problem, meanvar_solution):
        # lambda must vanish on C: the implied intensity is nonpositive there
        model = meanvar_solution.model()
        xi, b = meanvar_solution.xi, meanvar_solution.b
        for x in (0.05, 0.2, 0.35):
            psi = b**xi * x ** (1 - xi)
            dpsi = (1 - xi) * b**xi * x ** (-xi)
            lam = solvers.intensity_from_psi(meanvar_problem, model, x, psi, dpsi, 0.0)
            assert lam <= 1e-12

    def test_integration_reproduces_linear_solution(self, variance_problem, variance_solution):
        model = variance_solution.model()
        c = variance_solution.psi_slope
        res = solvers.integrate_psi_ode(variance_problem, model, 1.0, c, c, 0.5, 2.0)
        assert not res.halted
        rel = np.max(np.abs(res.psi - c * res.xs) / np.abs(c * res.xs))
        assert rel < 1e-6
        assert np.nanmax(np.abs(res.residual)) < 1e-8

    def test_identity_initial_data_is_singular(self, variance_problem, variance_solution):
        with pytest.raises(SingularityError):
            solvers.integrate_psi_ode(
                variance_problem, variance_solution.model(), 1.0, 1.0, 1.0, 0.5, 2.0
            )

    def test_halts_when_psi_crosses_h(self, variance_problem, variance_solution):
        # steer psi toward the singular manifold psi = x: integration stops
        # partway and reports where
        res = solvers.integrate_psi_ode(
            variance_problem, variance_solution.model(), 1.0, 0.9, 1.5, 0.5, 4.0
        )
        assert res.halted
        assert res.halt_x is not None


class TestTwoEquilibria:
    def test_constants(self):
        ex = solvers.two_equilibria_example()
        vf = ex.window_value_functions()
        for x in (-0.5, 0.0, 0.9):
            assert vf.phi(x) == pytest.approx(-2.0 / 9.0, rel=1e-14)
            assert vf.psi(x) == pytest.approx(1.0, rel=1e-14)
            assert vf.j(x, ex.problem) == pytest.approx(2.0 / 9.0, rel=1e-13)

    def test_values_differ_at_origin(self):
        ex = solvers.two_equilibria_example()
        assert ex.stop_everywhere_value(0.0) == 0.0
        assert ex.window_value_functions().j(0.0, ex.problem) == pytest.approx(2.0 / 9.0)

    def test_strategies(self):
        ex = solvers.two_equilibria_example()
        assert ex.stop_everywhere.continuation.intervals == ()
        assert ex.window.continuation.intervals == ((-1.0, 1.0),)
        assert ex.window.lam(0.0) == 0.0
