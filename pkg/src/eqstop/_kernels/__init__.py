"""Sampling kernels for mixed-strategy stopping.

Two interchangeable implementations of one algorithm:

``_core``         Cython extension; geometric Brownian motion / Wiener state
                  processes with zero or constant intensity (the hot cases).
``numpy_backend`` Pure NumPy; additionally handles Euler models and
                  state-dependent intensities.

Both follow the same draw-consumption contract (see ``eqstop._rng``) so that
a path is reproducible bit-for-bit within a backend and matches across
backends up to floating-point library differences of ~1 ulp.

Algorithm per path, starting strictly inside its continuation interval
``(lo, hi)`` with horizon ``tmax`` and step ``dt``:

1.  If the intensity is not identically zero, draw ``E1 ~ Exp(1)``.
2.  Repeat: shorten the step to the remaining horizon, and, for constant
    positive intensity, to the known jump time ``(E1 - Lam)/lam`` if that
    falls inside the step (the state at a shortened step end is then an
    exact-transition sample).  Draw one normal increment; GBM steps in log
    space (exact transitions, barriers mapped by log).
3.  Barrier resolution inside the step: a step ending at or beyond a finite
    barrier exits there (state snapped to the barrier exactly, time by
    linear interpolation of the driving coordinate); otherwise, when a
    finite barrier exists, one uniform decides a Brownian-bridge crossing
    with ``p = exp(-2(u-a)(u-b)/(sigma^2 dt))`` per barrier (crossing time
    assigned mid-step).  Without the bridge test the missed-excursion bias
    in exit statistics is O(sqrt(dt)), large enough to fail 3-standard-error
    comparisons against closed forms at the default step.
4.  For state-dependent intensities the integrated intensity accumulates by
    the trapezoidal rule and the jump time is located by linear
    interpolation; exit and jump within one step resolve to the earlier
    event (ties stop at the barrier).
5.  Censor at the horizon (exact-transition state at ``tmax``).

Outcome codes: 0 = Cox jump, 1 = exit from the continuation set,
2 = censored.  Immediate stops (start outside the open set) never reach the
kernel.
"""

from __future__ import annotations

SCHEME_WIENER = 0
SCHEME_GBM = 1
SCHEME_EULER = 2

LAM_ZERO = 0
LAM_CONST = 1
LAM_FUNC = 2

KIND_COX = 0
KIND_EXIT = 1
KIND_CENSORED = 2
