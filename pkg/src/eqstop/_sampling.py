"""Batch orchestration over the stopping kernel.

Maps (model, continuation intervals, intensity) onto kernel calls: locates
each path's containing interval, short-circuits immediate stops, splits work
into chunks, and optionally fans chunks out over threads (the compiled
kernel releases the GIL).  Per-path counter streams make the result
independent of chunking and thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _backend
from ._kernels import LAM_CONST, LAM_FUNC, LAM_ZERO, SCHEME_EULER

KIND_COX = 0
KIND_EXIT = 1
KIND_CENSORED = 2
KIND_IMMEDIATE = 3

_CHUNK = 1 << 16


def containing_interval(intervals, x):
    """Strictly containing open interval of each x, vectorized.

    Returns (inside, lo, hi); points outside every interval (boundaries
    included) get inside=False.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    lo = np.full(x.shape, np.nan)
    hi = np.full(x.shape, np.nan)
    if not intervals:
        return np.zeros(x.shape, dtype=bool), lo, hi
    edges = np.array([e for iv in intervals for e in iv], dtype=np.float64)
    pos = np.searchsorted(edges, x, side="left")
    inside = (pos % 2 == 1) & (x < edges[np.minimum(pos, len(edges) - 1)])
    p = pos[inside]
    lo[inside] = edges[p - 1]
    hi[inside] = edges[p]
    return inside, lo, hi


def run_batch(
    model,
    intervals,
    lam_kind,
    lam_const,
    x0,
    tmax,
    seed,
    dt,
    path_indices,
    antithetic=False,
    k0=None,
    lam_fn=None,
    threads=1,
):
    """Simulate one stopping outcome per path.

    ``x0``/``tmax`` broadcast against ``path_indices``.  Returns
    (state, time, kind, k_end) with kind per KIND_* (IMMEDIATE for paths
    starting outside the open continuation set; those consume no draws).
    """
    path_indices = np.asarray(path_indices, dtype=np.uint64)
    n = path_indices.shape[0]
    x0 = np.broadcast_to(np.asarray(x0, dtype=np.float64), (n,)).copy()
    tmax = np.broadcast_to(np.asarray(tmax, dtype=np.float64), (n,)).copy()
    k0 = np.zeros(n, dtype=np.uint64) if k0 is None else np.asarray(k0, dtype=np.uint64)

    state = x0.copy()
    time = np.zeros(n)
    kind = np.full(n, KIND_IMMEDIATE, dtype=np.int8)
    k_end = k0.copy()

    inside, lo, hi = containing_interval(intervals, x0)
    if not inside.any():
        return state, time, kind, k_end

    if antithetic:
        stream = path_indices >> np.uint64(1)
        flip = (path_indices & np.uint64(1)).astype(np.uint8)
    else:
        stream = path_indices
        flip = np.zeros(n, dtype=np.uint8)

    sel = np.flatnonzero(inside)
    kwargs = dict(lam_fn=lam_fn)
    if model.scheme_code == SCHEME_EULER:
        kwargs.update(drift_fn=model.drift, vol_fn=model.vol, bounds=model.state_interval)

    def _run(chunk):
        return _backend.run_stop(
            model.scheme_code, model.param_mu, model.param_sigma2,
            lam_kind, lam_const,
            x0[chunk], lo[chunk], hi[chunk], tmax[chunk],
            stream[chunk], flip[chunk], k0[chunk], seed, dt, **kwargs,
        )

    chunks = [sel[i : i + _CHUNK] for i in range(0, sel.size, _CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run, chunks))
    else:
        results = [_run(c) for c in chunks]

    for chunk, (st, tm, kd, ke) in zip(chunks, results):
        state[chunk] = st
        time[chunk] = tm
        kind[chunk] = kd
        k_end[chunk] = ke
    return state, time, kind, k_end


def lam_spec(strategy):
    """(lam_kind, lam_const, lam_fn) triple for a MixedStrategy."""
    if strategy.intensity is None:
        return LAM_ZERO, 0.0, None
    if strategy.intensity_const is not None:
        if strategy.intensity_const == 0.0:
            return LAM_ZERO, 0.0, None
        return LAM_CONST, float(strategy.intensity_const), None
    return LAM_FUNC, 0.0, strategy.intensity.value
