"""Counter-based random number streams for reproducible parallel Monte Carlo.

Every path owns a stream keyed by ``(seed, stream_index)`` and consumes draws
at integer counters ``k = 0, 1, 2, ...``.  A draw is a pure function of
``(seed, stream_index, k)``, so results do not depend on execution order,
chunking, or thread count.  The mixing function is the SplitMix64 finalizer
applied twice; output quality is more than adequate at the sample sizes used
here, and the construction is trivial to reproduce in compiled code.

Layout contract (shared with the compiled kernel, which re-implements it):

    base(seed, s) = fin(fin(seed + PHI) ^ (s*PHI + SALT))
    raw(base, k)  = fin(base + (k+1)*PHI)
    u01(raw)      = ((raw >> 11) + 0.5) * 2**-53        in (0, 1)
    normal        = ndtri(u01)                           (scipy cephes)
    exponential   = -log1p(-u01)

Antithetic pairs: paths 2m and 2m+1 share stream m; the odd member replaces
every uniform u by 1-u.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
PHI = np.uint64(0x9E3779B97F4A7C15)
SALT = np.uint64(0x632BE59BD9B4E019)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = float(2.0**-53)


def mix64(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """SplitMix64 finalizer (vectorized over uint64 arrays; wraps mod 2^64)."""
    z = np.uint64(z) if np.isscalar(z) or isinstance(z, int) else z
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def stream_base(seed: int, stream: np.ndarray | int) -> np.ndarray | np.uint64:
    """Per-stream base state from a 64-bit master seed."""
    stream = np.asarray(stream, dtype=np.uint64) if not isinstance(stream, (int, np.integer)) else np.uint64(stream)
    with np.errstate(over="ignore"):
        s0 = mix64(np.uint64(seed) + PHI)
        return mix64(s0 ^ (stream * PHI + SALT))


def raw_at(base: np.ndarray | np.uint64, k: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """Raw 64-bit output at counter k of a stream."""
    k = np.asarray(k, dtype=np.uint64) if not isinstance(k, (int, np.integer)) else np.uint64(k)
    with np.errstate(over="ignore"):
        return mix64(base + (k + np.uint64(1)) * PHI)


def uniform_at(base, k, flip=None) -> np.ndarray | float:
    """Uniform draw in the open interval (0, 1) at counter k."""
    r = raw_at(base, k)
    u = ((r >> np.uint64(11)).astype(np.float64) if isinstance(r, np.ndarray) else float(r >> np.uint64(11)))
    u = (u + 0.5) * _INV53
    if flip is not None:
        u = np.where(flip, 1.0 - u, u) if isinstance(u, np.ndarray) else (1.0 - u if flip else u)
    return u


def normal_at(base, k, flip=None):
    return ndtri(uniform_at(base, k, flip))


def exponential_at(base, k, flip=None):
    return -np.log1p(-uniform_at(base, k, flip))
