"""Mixed-strategy stopping for time-inconsistent problems.

Toolkit for objectives of the form J_tau(x) = E_x f(X_tau) + g(E_x h(X_tau))
over one-dimensional diffusions: strategy simulation (Cox-jump plus set
exit), closed-form solvers for the variance and mean-variance families,
and numerical verification of the pointwise equilibrium system.
"""

from ._backend import active_backend, compiled_available
from .diffusion import DiffusionModel, PathConfig, SmoothFn
from .payoff import (
    Problem,
    make_mean_variance_problem,
    make_two_equilibria_problem,
    make_variance_problem,
)
from .strategy import ContinuationSet, MixedStrategy

__version__ = "0.1.0"

__all__ = [
    "DiffusionModel",
    "PathConfig",
    "SmoothFn",
    "Problem",
    "ContinuationSet",
    "MixedStrategy",
    "make_variance_problem",
    "make_mean_variance_problem",
    "make_two_equilibria_problem",
    "active_backend",
    "compiled_available",
    "__version__",
]
