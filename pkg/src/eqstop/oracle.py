"""Independent reference estimators used to validate the main machinery.

These deliberately avoid the package's counter-based streams and path
kernels: sampling runs on NumPy's PCG64 generator and chain values come
from absorbing-state linear solves, so agreement with the main estimators
is evidence against correlated bugs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import DivergentMomentError, DomainError
from .payoff import Problem

__all__ = [
    "OracleResult",
    "killed_gbm_moment",
    "BinomialChain",
    "ChainValues",
    "discrete_chain_value",
]


@dataclass(frozen=True)
class OracleResult:
    value: float
    method: str
    n: int
    error: float


def killed_gbm_moment(
    mu: float,
    sigma2: float,
    lam: float,
    p: float,
    x: float,
    n_samples: int = 1_000_000,
    seed: int = 0,
) -> OracleResult:
    """E_x[X^p] at an Exp(lam) time, by direct two-draw sampling.

    Constant intensity makes the jump time independent of the path, and
    X at a fixed time is lognormal, so no path discretization is needed.
    Emits a DivergentMomentError when the mean does not exist.
    """
    if lam <= 0.0:
        raise DomainError("lam must be positive")
    if p == 0:
        return OracleResult(1.0, "killed-gbm-exact", n_samples, 0.0)
    if lam <= p * mu + 0.5 * p * (p - 1) * sigma2:
        raise DivergentMomentError("requested moment diverges for these parameters")
    rng = np.random.default_rng(seed)
    tau = rng.exponential(1.0 / lam, size=n_samples)
    z = rng.standard_normal(n_samples)
    vals = x**p * np.exp(p * ((mu - 0.5 * sigma2) * tau + np.sqrt(sigma2 * tau) * z))
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1)) / math.sqrt(n_samples)
    return OracleResult(mean, "killed-gbm-exact", n_samples, se)


@dataclass(frozen=True)
class BinomialChain:
    """Birth-death chain on a sorted state grid; first/last states absorb.

    p_up is the interior probability of moving one state up; dt the time
    per move (used to convert intensities into per-visit stop
    probabilities).  bottom_limit_state, when set, values absorption at the
    lower edge as if the path had converged there instead (e.g. 0+ for a
    GBM grid truncated above its unattainable boundary).
    """

    states: np.ndarray
    p_up: np.ndarray
    dt: float
    bottom_limit_state: Optional[float] = None

    @classmethod
    def wiener(cls, lo: float, hi: float, dx: float) -> "BinomialChain":
        n = int(round((hi - lo) / dx))
        states = lo + dx * np.arange(n + 1)
        states[-1] = hi
        return cls(states, np.full(n + 1, 0.5), dt=dx * dx)

    @classmethod
    def gbm(cls, mu: float, sigma2: float, x_min: float, x_max: float, n_states: int) -> "BinomialChain":
        """Log-space random walk matching GBM drift and volatility.

        The lower edge is a truncation of the unattainable boundary 0; pass
        bottom_state_value to value paths absorbed there at the 0+ limit.
        """
        w = np.linspace(math.log(x_min), math.log(x_max), n_states)
        delta = w[1] - w[0]
        dt = delta * delta / sigma2
        pu = 0.5 * (1.0 + (mu - 0.5 * sigma2) * delta / sigma2)
        if not 0.0 < pu < 1.0:
            raise DomainError("grid too coarse for this drift; increase n_states")
        return cls(np.exp(w), np.full(n_states, pu), dt=dt, bottom_limit_state=0.0)


@dataclass(frozen=True)
class ChainValues:
    phi: OracleResult
    psi: OracleResult
    j: float


def _solve_chain(chain: BinomialChain, payoff_vals: np.ndarray, p_stop: np.ndarray) -> np.ndarray:
    m = len(chain.states)
    keep = 1.0 - p_stop
    diag = np.ones(m)
    up = np.zeros(m - 1)
    dn = np.zeros(m - 1)
    up[1:] = -keep[1:-1] * chain.p_up[1:-1]
    dn[:-1] = -keep[1:-1] * (1.0 - chain.p_up[1:-1])
    a = sp.diags([dn, diag, up], offsets=[-1, 0, 1], format="csc")
    rhs = p_stop * payoff_vals
    rhs[0] = payoff_vals[0]
    rhs[-1] = payoff_vals[-1]
    return spsolve(a, rhs)


def discrete_chain_value(
    problem: Problem,
    chain: BinomialChain,
    intensity: Optional[Callable],
    x: float,
) -> ChainValues:
    """phi, psi, J at x by exact dynamic programming on the chain.

    Per-visit stop probability is 1 - exp(-lambda(x) dt); the two edge
    states absorb.  The start point is interpolated linearly between its
    neighboring grid states.
    """
    states = chain.states
    if len(states) > 10_000:
        raise DomainError("chain too large; keep at most 1e4 states")
    if not states[0] <= x <= states[-1]:
        raise DomainError("x outside the chain grid")
    if intensity is None:
        p_stop = np.zeros(len(states))
    else:
        lam = np.asarray(intensity(states), dtype=float) * np.ones(len(states))
        if (lam < 0).any():
            raise DomainError("intensity must be nonnegative")
        p_stop = 1.0 - np.exp(-lam * chain.dt)
    p_stop = p_stop.copy()
    p_stop[0] = 1.0
    p_stop[-1] = 1.0

    f_vals = np.asarray(problem.f.value(states), dtype=float).copy()
    h_vals = np.asarray(problem.h.value(states), dtype=float).copy()
    if chain.bottom_limit_state is not None:
        f_vals[0] = problem.f.value(chain.bottom_limit_state)
        h_vals[0] = problem.h.value(chain.bottom_limit_state)

    phi_grid = _solve_chain(chain, f_vals, p_stop)
    psi_grid = _solve_chain(chain, h_vals, p_stop)
    phi = float(np.interp(x, states, phi_grid))
    psi = float(np.interp(x, states, psi_grid))
    j = phi + float(problem.g.value(psi))
    n = len(states)
    return ChainValues(
        OracleResult(phi, "binomial-chain", n, 0.0),
        OracleResult(psi, "binomial-chain", n, 0.0),
        j,
    )
