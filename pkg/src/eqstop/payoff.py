"""Problem triples (f, g, h) and evaluation of the objective.

The objective of a stopping time tau is

    J_tau(x) = E_x f(X_tau) + g(E_x h(X_tau)),

estimated here by Monte Carlo over strategy outcomes, or in closed form for
geometric Brownian motion with constant intensity or a threshold rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _sampling
from .diffusion import DiffusionModel, PathConfig, SmoothFn
from .errors import DivergentMomentError, DomainError, MissingDerivativeError
from .strategy import MixedStrategy, sample_stop_batch

__all__ = [
    "Problem",
    "MCSummary",
    "ValueTriple",
    "make_variance_problem",
    "make_mean_variance_problem",
    "make_two_equilibria_problem",
    "estimate_values",
    "closed_form_values_constant_lambda_gbm",
    "closed_form_values_threshold_gbm",
]


@dataclass(frozen=True)
class Problem:
    """Payoff triple; g needs derivatives up to third order, f and h up to second."""

    f: SmoothFn
    g: SmoothFn
    h: SmoothFn
    name: str = ""

    def stop_value(self, x):
        """Value of stopping immediately: f(x) + g(h(x))."""
        return self.f.value(x) + self.g.value(self.h.value(x))


def make_variance_problem() -> Problem:
    """f = x^2, g = -x^2, h = x, so J_tau(x) = Var_x(X_tau)."""
    return Problem(
        f=SmoothFn(lambda x: x**2, lambda x: 2.0 * x, _const(2.0), _const(0.0)),
        g=SmoothFn(lambda x: -(x**2), lambda x: -2.0 * x, _const(-2.0), _const(0.0)),
        h=SmoothFn(lambda x: x, _const(1.0), _const(0.0), _const(0.0)),
        name="variance",
    )


def make_mean_variance_problem(gamma: float) -> Problem:
    """f = -gamma x^2, g = x + gamma x^2, h = x: J = E_x X_tau - gamma Var_x(X_tau)."""
    if gamma <= 0.0:
        raise DomainError("gamma must be positive")
    return Problem(
        f=SmoothFn(lambda x: -gamma * x**2, lambda x: -2.0 * gamma * x, _const(-2.0 * gamma), _const(0.0)),
        g=SmoothFn(lambda x: x + gamma * x**2, lambda x: 1.0 + 2.0 * gamma * x, _const(2.0 * gamma), _const(0.0)),
        h=SmoothFn(lambda x: x, _const(1.0), _const(0.0), _const(0.0)),
        name="mean-variance",
    )


def make_two_equilibria_problem() -> Problem:
    """f = x^6/9 - x^4/3, g = x^2 - 5x^3/9, h = x^2 (Wiener-state example)."""
    return Problem(
        f=SmoothFn(
            lambda x: x**6 / 9.0 - x**4 / 3.0,
            lambda x: 2.0 * x**5 / 3.0 - 4.0 * x**3 / 3.0,
            lambda x: 10.0 * x**4 / 3.0 - 4.0 * x**2,
            lambda x: 40.0 * x**3 / 3.0 - 8.0 * x,
        ),
        g=SmoothFn(
            lambda x: x**2 - 5.0 * x**3 / 9.0,
            lambda x: 2.0 * x - 5.0 * x**2 / 3.0,
            lambda x: 2.0 - 10.0 * x / 3.0,
            _const(-10.0 / 3.0),
        ),
        h=SmoothFn(lambda x: x**2, lambda x: 2.0 * x, _const(2.0), _const(0.0)),
        name="two-equilibria",
    )


def _const(c):
    def fn(x):
        return c * np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else c

    return fn


@dataclass(frozen=True)
class MCSummary:
    estimate: float
    std_error: float
    n_paths: int
    censored_fraction: float = 0.0
    high_censoring: bool = False


@dataclass(frozen=True)
class ValueTriple:
    phi: MCSummary
    psi: MCSummary
    j: float
    j_std_error: float


def _summarize(values: np.ndarray, antithetic: bool):
    """Mean, standard error and per-sample values (pair means when antithetic)."""
    if antithetic and values.size % 2 == 0:
        values = 0.5 * (values[0::2] + values[1::2])
    n = values.size
    mean = math.fsum(values) / n
    var = float(np.sum((values - mean) ** 2)) / (n - 1) if n > 1 else 0.0
    return mean, math.sqrt(var / n), values


def estimate_values(
    problem: Problem,
    model: DiffusionModel,
    strategy: MixedStrategy,
    x: float,
    config: PathConfig,
    n_paths: int = 100_000,
    threads: int = 1,
    path_offset: int = 0,
) -> ValueTriple:
    """Monte Carlo estimate of (phi, psi, J) at x under a mixed strategy.

    Censored paths contribute the model's limit state when one is declared
    (GBM converging to 0), otherwise the terminal state; censoring above 1%
    without a limit tag sets the high_censoring flag.  Starting outside C
    returns the exact immediate-stop values with zero standard error.
    """
    if problem.g.d1 is None:
        raise MissingDerivativeError("estimate_values needs g.d1 for the delta method")
    if not strategy.continuation.contains(x):
        f0 = float(problem.f.value(x))
        h0 = float(problem.h.value(x))
        phi = MCSummary(f0, 0.0, n_paths)
        psi = MCSummary(h0, 0.0, n_paths)
        return ValueTriple(phi, psi, f0 + float(problem.g.value(h0)), 0.0)

    state, _, kind = sample_stop_batch(
        model, strategy, x, config, n_paths, path_offset=path_offset, threads=threads
    )
    censored = kind == _sampling.KIND_CENSORED
    cfraction = float(np.mean(censored))
    eval_state = state.copy()
    high = False
    if censored.any():
        if model.limit_state is not None:
            eval_state[censored] = model.limit_state
        else:
            high = cfraction > 0.01

    f_vals = np.asarray(problem.f.value(eval_state), dtype=float)
    h_vals = np.asarray(problem.h.value(eval_state), dtype=float)
    phi_mean, phi_se, f_red = _summarize(f_vals, config.antithetic)
    psi_mean, psi_se, h_red = _summarize(h_vals, config.antithetic)

    n = f_red.size
    cov = float(np.sum((f_red - phi_mean) * (h_red - psi_mean))) / (n - 1) / n if n > 1 else 0.0
    gp = float(problem.g.d1(psi_mean))
    j = phi_mean + float(problem.g.value(psi_mean))
    j_var = phi_se**2 + (gp * psi_se) ** 2 + 2.0 * gp * cov
    j_se = math.sqrt(max(j_var, 0.0))

    phi = MCSummary(phi_mean, phi_se, n_paths, cfraction, high)
    psi = MCSummary(psi_mean, psi_se, n_paths, cfraction, high)
    return ValueTriple(phi, psi, j, j_se)


def closed_form_values_constant_lambda_gbm(
    mu: float, sigma2: float, lam: float, p: int, x: float
) -> float:
    """E_x[X^p at the first Cox jump] for GBM and constant intensity.

    Conditioning on the exponential jump time gives
    lam / (lam - p mu - p(p-1) sigma^2 / 2) * x^p when the denominator is
    positive (lam = 0 is allowed and yields the tau = infinity limit 0).
    """
    if p == 0:
        return 1.0
    denom = lam - p * mu - 0.5 * p * (p - 1) * sigma2
    if denom <= 0.0:
        raise DivergentMomentError(
            f"moment diverges: lam={lam} <= p*mu + p(p-1)*sigma2/2 = {lam - denom}"
        )
    return lam / denom * x**p


def closed_form_values_threshold_gbm(
    mu: float, sigma2: float, b: float, p: float, x: float
) -> float:
    """E_x[X^p at the hit of threshold b] for GBM drifting to 0, x <= b.

    Non-hitting paths contribute 0, so the value is b^p times the hitting
    probability: b^(p-1+xi) x^(1-xi) with xi = 2 mu / sigma^2 in (0,1).
    """
    xi = 2.0 * mu / sigma2
    if not 0.0 < xi < 1.0:
        raise DomainError("need xi = 2*mu/sigma2 in (0, 1)")
    if not 0.0 < x <= b:
        raise DomainError("need 0 < x <= b")
    if p <= 0.0:
        raise DomainError("need p > 0")
    return b ** (p - 1.0 + xi) * x ** (1.0 - xi)
