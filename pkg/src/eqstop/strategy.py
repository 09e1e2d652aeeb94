"""Mixed-strategy stopping times: Cox-jump stopping coupled with set exit.

A strategy is an intensity function lambda >= 0 plus an open continuation
set C (finite union of open intervals).  The stopping time is the earlier of
the first jump of a Cox process driven by lambda(X_t) and the first exit
from C; starting outside C stops immediately.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _sampling
from .diffusion import DiffusionModel, PathConfig, SmoothFn
from .errors import DomainError, TargetNotReachedError

__all__ = [
    "ContinuationSet",
    "MixedStrategy",
    "PointClass",
    "StopKind",
    "StopOutcome",
    "classify_point",
    "sample_stop",
    "sample_stop_batch",
    "integrated_intensity_invert",
]

BOUNDARY_TOL = 1e-12


class PointClass(enum.Enum):
    IN_C = "in_C"
    INT_COMPLEMENT = "int_complement"
    BOUNDARY = "boundary"


class StopKind(enum.Enum):
    COX_JUMP = "cox_jump"
    EXIT_C = "exit_C"
    IMMEDIATE = "immediate_stop"
    CENSORED = "censored"


_KIND_MAP = {
    _sampling.KIND_COX: StopKind.COX_JUMP,
    _sampling.KIND_EXIT: StopKind.EXIT_C,
    _sampling.KIND_CENSORED: StopKind.CENSORED,
    _sampling.KIND_IMMEDIATE: StopKind.IMMEDIATE,
}


@dataclass(frozen=True)
class ContinuationSet:
    """Ordered disjoint open intervals; may be empty."""

    intervals: tuple

    def __init__(self, intervals: Sequence = ()):
        ivs = tuple((float(l), float(r)) for l, r in intervals)
        for l, r in ivs:
            if not l < r:
                raise DomainError(f"empty interval ({l}, {r})")
        for (l0, r0), (l1, r1) in zip(ivs, ivs[1:]):
            if not r0 <= l1:
                raise DomainError("intervals must be sorted and disjoint")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def whole(cls, state_interval) -> "ContinuationSet":
        return cls([state_interval])

    @classmethod
    def empty(cls) -> "ContinuationSet":
        return cls([])

    def boundary(self, state_interval=(-np.inf, np.inf)) -> list:
        """Finite interval endpoints interior to the state interval."""
        a, b = state_interval
        out = []
        for l, r in self.intervals:
            for e in (l, r):
                if np.isfinite(e) and a < e < b:
                    out.append(e)
        return sorted(set(out))

    def contains(self, x: float) -> bool:
        inside, _, _ = _sampling.containing_interval(self.intervals, x)
        return bool(inside[0])


@dataclass(frozen=True)
class MixedStrategy:
    """Intensity (None means identically zero) plus continuation set."""

    intensity: Optional[SmoothFn]
    continuation: ContinuationSet
    intensity_const: Optional[float] = None

    @classmethod
    def pure(cls, continuation: ContinuationSet) -> "MixedStrategy":
        """Stop at the first exit from C (lambda = 0)."""
        return cls(None, continuation, 0.0)

    @classmethod
    def constant(cls, lam: float, continuation: ContinuationSet) -> "MixedStrategy":
        if lam < 0.0:
            raise DomainError("intensity must be nonnegative")
        return cls(SmoothFn.constant(lam), continuation, float(lam))

    @classmethod
    def cox(cls, intensity: SmoothFn, continuation: ContinuationSet) -> "MixedStrategy":
        """State-dependent intensity; callable must be vectorized."""
        return cls(intensity, continuation, None)

    def lam(self, x) -> float:
        if self.intensity is None:
            return 0.0
        return self.intensity.value(x)


@dataclass(frozen=True)
class StopOutcome:
    state: float
    time: float
    kind: StopKind


def classify_point(c: ContinuationSet, x: float, state_interval=(-np.inf, np.inf)) -> PointClass:
    """Classify x against C; boundary matched within 1e-12 absolute."""
    for e in c.boundary(state_interval):
        if abs(x - e) <= BOUNDARY_TOL:
            return PointClass.BOUNDARY
    return PointClass.IN_C if c.contains(x) else PointClass.INT_COMPLEMENT


def sample_stop_batch(
    model: DiffusionModel,
    strategy: MixedStrategy,
    x,
    config: PathConfig,
    n_paths: int,
    path_offset: int = 0,
    threads: int = 1,
):
    """Vectorized stopping outcomes; returns (state, time, kind_code) arrays."""
    lam_kind, lam_const, lam_fn = _sampling.lam_spec(strategy)
    state, time, kind, _ = _sampling.run_batch(
        model,
        strategy.continuation.intervals,
        lam_kind,
        lam_const,
        x,
        config.horizon,
        config.seed,
        config.dt,
        np.arange(path_offset, path_offset + n_paths, dtype=np.uint64),
        antithetic=config.antithetic,
        lam_fn=lam_fn,
        threads=threads,
    )
    return state, time, kind


def sample_stop(
    model: DiffusionModel,
    strategy: MixedStrategy,
    x: float,
    config: PathConfig,
    path_index: int = 0,
) -> StopOutcome:
    """Stopping outcome of a single path, reproducible from (seed, path_index)."""
    state, time, kind = sample_stop_batch(model, strategy, x, config, 1, path_offset=path_index)
    return StopOutcome(float(state[0]), float(time[0]), _KIND_MAP[int(kind[0])])


def integrated_intensity_invert(times, values, target: float) -> float:
    """First time the nondecreasing cumulative intensity reaches target.

    Locates the first grid crossing and interpolates linearly inside it.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.ndim != 1 or times.size < 1:
        raise DomainError("times and values must be equal-length 1-d arrays")
    if np.any(np.diff(values) < 0.0):
        raise DomainError("cumulative values must be nondecreasing")
    if target > values[-1]:
        raise TargetNotReachedError(f"target {target} exceeds final value {values[-1]}")
    i = int(np.searchsorted(values, target, side="left"))
    if i == 0:
        return float(times[0])
    dv = values[i] - values[i - 1]
    frac = (target - values[i - 1]) / dv if dv > 0.0 else 1.0
    return float(times[i - 1] + frac * (times[i] - times[i - 1]))
