"""One-dimensional Ito diffusions: models, generator, first-exit sampling.

The state process solves dX_t = mu(X_t) dt + sigma(X_t) dW_t on an open
interval (alpha, beta) with sigma > 0.  GBM and Wiener models carry exact
transition sampling; everything else steps by Euler-Maruyama with
interior-preserving redraws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _sampling
from ._kernels import LAM_ZERO, SCHEME_EULER, SCHEME_GBM, SCHEME_WIENER
from .errors import (
    BoundaryEscapeError,
    DomainError,
    HorizonExceededError,
    MissingDerivativeError,
)

__all__ = [
    "DiffusionModel",
    "PathConfig",
    "SmoothFn",
    "check_smooth_fn",
    "generator_apply",
    "simulate_step",
    "sample_symmetric_exit",
    "sample_symmetric_exit_batch",
    "gbm_hitting_prob",
    "gbm_two_sided_exit",
]


@dataclass(frozen=True)
class SmoothFn:
    """A scalar function with optional derivatives up to third order.

    Callables should accept floats and NumPy arrays alike.
    """

    value: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    d3: Optional[Callable] = None

    def __call__(self, x):
        return self.value(x)

    @classmethod
    def constant(cls, c: float) -> "SmoothFn":
        return cls(
            value=lambda x: c * np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else c,
            d1=lambda x: np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0,
            d2=lambda x: np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0,
            d3=lambda x: np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0,
        )


def check_smooth_fn(fn: SmoothFn, points, rel_tol: float = 1e-5) -> None:
    """Spot-check provided derivatives against central finite differences.

    Step is 1e-5 * max(1, |x|); raises DomainError on relative error above
    rel_tol (relative to max(1, |fd|)).
    """
    pairs = [(fn.value, fn.d1), (fn.d1, fn.d2), (fn.d2, fn.d3)]
    for x in points:
        h = 1e-5 * max(1.0, abs(x))
        for base, deriv in pairs:
            if base is None or deriv is None:
                continue
            fd = (base(x + h) - base(x - h)) / (2.0 * h)
            err = abs(deriv(x) - fd) / max(1.0, abs(fd))
            if err > rel_tol:
                raise DomainError(
                    f"derivative inconsistent at x={x}: declared {deriv(x)}, "
                    f"finite difference {fd}"
                )


@dataclass(frozen=True)
class DiffusionModel:
    """Diffusion coefficients plus the open state interval and a scheme tag."""

    drift: Callable
    vol: Callable
    state_interval: tuple
    scheme_code: int
    param_mu: float = 0.0
    param_sigma2: float = 1.0
    limit_state: Optional[float] = None

    @classmethod
    def gbm(cls, mu: float, sigma2: float) -> "DiffusionModel":
        """Geometric Brownian motion on (0, inf), exact transitions.

        When mu < sigma2/2 the process converges to 0 almost surely; the
        model is then limit-tagged so censored paths can be valued at 0+.
        """
        if sigma2 <= 0.0:
            raise DomainError("sigma2 must be positive")
        sig = math.sqrt(sigma2)
        return cls(
            drift=lambda x: mu * np.asarray(x, dtype=float),
            vol=lambda x: sig * np.asarray(x, dtype=float),
            state_interval=(0.0, math.inf),
            scheme_code=SCHEME_GBM,
            param_mu=mu,
            param_sigma2=sigma2,
            limit_state=0.0 if mu < 0.5 * sigma2 else None,
        )

    @classmethod
    def wiener(cls) -> "DiffusionModel":
        """Standard Wiener process on the whole line, exact transitions."""
        return cls(
            drift=lambda x: np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0,
            vol=lambda x: np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0,
            state_interval=(-math.inf, math.inf),
            scheme_code=SCHEME_WIENER,
            param_mu=0.0,
            param_sigma2=1.0,
        )

    @classmethod
    def euler(cls, drift, vol, state_interval, limit_state=None) -> "DiffusionModel":
        """General model stepped by Euler-Maruyama (vectorized callables)."""
        a, b = state_interval
        if not a < b:
            raise DomainError("state interval must be nonempty")
        return cls(
            drift=drift,
            vol=vol,
            state_interval=(float(a), float(b)),
            scheme_code=SCHEME_EULER,
            limit_state=limit_state,
        )

    def contains(self, x: float) -> bool:
        a, b = self.state_interval
        return a < x < b

    def vol2(self, x):
        v = self.vol(x)
        return v * v


@dataclass(frozen=True)
class PathConfig:
    """Simulation settings: step, censoring horizon, master seed."""

    seed: int
    dt: float = 1e-3
    horizon: float = 200.0
    antithetic: bool = False

    def __post_init__(self):
        if not self.dt > 0.0:
            raise DomainError("dt must be positive")
        if self.dt > self.horizon:
            raise DomainError("dt must not exceed the horizon")


def generator_apply(model: DiffusionModel, k: SmoothFn, x: float) -> float:
    """Characteristic operator mu(x) k'(x) + (1/2) sigma^2(x) k''(x)."""
    if not model.contains(x):
        raise DomainError(f"x={x} outside the state interval {model.state_interval}")
    if k.d1 is None or k.d2 is None:
        raise MissingDerivativeError("generator_apply needs k.d1 and k.d2")
    return float(model.drift(x)) * float(k.d1(x)) + 0.5 * float(model.vol2(x)) * float(k.d2(x))


def simulate_step(model: DiffusionModel, x: float, dt: float, noise: float, rng=None) -> float:
    """Advance one step from x using a given standard normal draw.

    GBM and Wiener use exact transitions.  Euler proposals that leave the
    state interval are redrawn with halved dt (so the accepted step may
    advance less time than requested), up to 30 halvings; redraws take
    normals from ``rng`` (a numpy Generator).
    """
    if not model.contains(x):
        raise DomainError(f"x={x} outside the state interval {model.state_interval}")
    if model.scheme_code == SCHEME_GBM:
        mu, s2 = model.param_mu, model.param_sigma2
        return x * math.exp((mu - 0.5 * s2) * dt + math.sqrt(s2 * dt) * noise)
    if model.scheme_code == SCHEME_WIENER:
        return x + math.sqrt(dt) * noise
    a, b = model.state_interval
    z = noise
    step = dt
    for _ in range(31):
        xn = x + float(model.drift(x)) * step + float(model.vol(x)) * math.sqrt(step) * z
        if a < xn < b:
            return xn
        if rng is None:
            raise BoundaryEscapeError(
                "Euler proposal left the state interval and no rng was supplied for redraws"
            )
        step *= 0.5
        z = float(rng.standard_normal())
    raise BoundaryEscapeError("Euler step left the state interval after 30 halvings")


def sample_symmetric_exit_batch(
    model: DiffusionModel,
    x: float,
    h: float,
    config: PathConfig,
    n_paths: int,
    path_offset: int = 0,
    threads: int = 1,
):
    """First-exit states and times from (x-h, x+h) for a batch of paths.

    Exit states are snapped exactly to x±h.  Raises HorizonExceededError if
    any path fails to exit before the horizon.
    """
    if h <= 0.0:
        raise DomainError("h must be positive")
    a, b = model.state_interval
    if not (a < x - h and x + h < b):
        raise DomainError("[x-h, x+h] must lie inside the state interval")
    state, time, kind, _ = _sampling.run_batch(
        model,
        [(x - h, x + h)],
        LAM_ZERO,
        0.0,
        x,
        config.horizon,
        config.seed,
        config.dt,
        np.arange(path_offset, path_offset + n_paths, dtype=np.uint64),
        antithetic=config.antithetic,
        threads=threads,
    )
    if (kind == _sampling.KIND_CENSORED).any():
        raise HorizonExceededError("no exit before the horizon; increase horizon or h")
    return state, time


def sample_symmetric_exit(model, x, h, config: PathConfig, path_index: int = 0):
    """Single-path version of :func:`sample_symmetric_exit_batch`."""
    state, time = sample_symmetric_exit_batch(model, x, h, config, 1, path_offset=path_index)
    return float(state[0]), float(time[0])


def gbm_hitting_prob(xi: float, x: float, b: float) -> float:
    """P_x(tau_b < inf) = b^(xi-1) x^(1-xi) for GBM with xi = 2 mu / sigma^2 in (0,1)."""
    if not 0.0 < xi < 1.0:
        raise DomainError("xi must lie in (0, 1)")
    if not 0.0 < x <= b:
        raise DomainError("need 0 < x <= b")
    return (x / b) ** (1.0 - xi)


def gbm_two_sided_exit(xi: float, x: float, c: float, d: float) -> float:
    """P_x(exit of (c,d) happens at d) via the scale function x^(1-xi)."""
    if not 0.0 < c <= x <= d:
        raise DomainError("need 0 < c <= x <= d")
    if c == d:
        raise DomainError("need c < d")
    if xi == 1.0:
        raise DomainError("xi = 1 (log scale) is out of scope")
    p = 1.0 - xi
    return (x**p - c**p) / (d**p - c**p)
