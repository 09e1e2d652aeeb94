import math

import pytest

from eqstop import solvers
from eqstop.diffusion import DiffusionModel
from eqstop.payoff import make_mean_variance_problem, make_variance_problem

# Figure-1 parameter set: variance problem under GBM.
FIG1_MU = -0.1
FIG1_SIGMA2 = 0.15
FIG1_LAMBDA = math.sqrt(1.0 / 300.0)

# Figure-2 parameter set: mean-variance problem under GBM.
FIG2_MU = 0.07
FIG2_SIGMA2 = 0.45
FIG2_GAMMA = 1.1
FIG2_XI = 2.0 * FIG2_MU / FIG2_SIGMA2


@pytest.fixture(scope="session")
def variance_solution():
    return solvers.solve_variance_gbm(FIG1_MU, FIG1_SIGMA2)


@pytest.fixture(scope="session")
def meanvar_solution():
    return solvers.solve_mean_variance_gbm(FIG2_MU, FIG2_SIGMA2, FIG2_GAMMA)


@pytest.fixture(scope="session")
def variance_problem():
    return make_variance_problem()


@pytest.fixture(scope="session")
def meanvar_problem():
    return make_mean_variance_problem(FIG2_GAMMA)


@pytest.fixture(scope="session")
def fig1_model():
    return DiffusionModel.gbm(FIG1_MU, FIG1_SIGMA2)


@pytest.fixture(scope="session")
def fig2_model():
    return DiffusionModel.gbm(FIG2_MU, FIG2_SIGMA2)
