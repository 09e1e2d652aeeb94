"""Selects the compiled kernel when available, the NumPy fallback otherwise.

The Cython extension covers GBM/Wiener models with zero or constant
intensity; anything else (Euler models, state-dependent intensities) always
runs on the NumPy backend.  ``EQSTOP_BACKEND=numpy`` forces the fallback,
``EQSTOP_BACKEND=cython`` errors if the extension is missing or the call is
outside its coverage (used by the parity tests and the benchmark).
"""

from __future__ import annotations

import os

import numpy as np

from ._kernels import (
    LAM_CONST,
    LAM_ZERO,
    SCHEME_GBM,
    SCHEME_WIENER,
    numpy_backend,
)

try:
    from ._kernels import _core
except ImportError:  # extension not built; pure-python install still works
    _core = None


def compiled_available() -> bool:
    return _core is not None


def _forced() -> str:
    return os.environ.get("EQSTOP_BACKEND", "").strip().lower()


def active_backend(scheme=SCHEME_GBM, lam_kind=LAM_CONST) -> str:
    """Name of the backend a call with the given shape would use."""
    forced = _forced()
    covered = scheme in (SCHEME_GBM, SCHEME_WIENER) and lam_kind in (LAM_ZERO, LAM_CONST)
    if forced == "numpy":
        return "numpy"
    if forced == "cython":
        if _core is None:
            raise RuntimeError("EQSTOP_BACKEND=cython but the extension is not built")
        if not covered:
            raise RuntimeError("compiled kernel does not cover this model/intensity")
        return "cython"
    return "cython" if (_core is not None and covered) else "numpy"


def run_stop(
    scheme,
    mu,
    sigma2,
    lam_kind,
    lam_const,
    x0,
    lo,
    hi,
    tmax,
    stream,
    flip,
    k0,
    seed,
    dt,
    lam_fn=None,
    drift_fn=None,
    vol_fn=None,
    bounds=(-np.inf, np.inf),
):
    if active_backend(scheme, lam_kind) == "numpy":
        return numpy_backend.run_stop(
            scheme, mu, sigma2, lam_kind, lam_const,
            x0, lo, hi, tmax, stream, flip, k0, seed, dt,
            lam_fn=lam_fn, drift_fn=drift_fn, vol_fn=vol_fn, bounds=bounds,
        )
    n = len(x0)
    out_state = np.empty(n)
    out_time = np.empty(n)
    out_kind = np.empty(n, dtype=np.int8)
    out_k = np.empty(n, dtype=np.uint64)
    _core.run_stop(
        scheme, mu, sigma2, lam_kind, lam_const,
        np.ascontiguousarray(x0, dtype=np.float64),
        np.ascontiguousarray(lo, dtype=np.float64),
        np.ascontiguousarray(hi, dtype=np.float64),
        np.ascontiguousarray(tmax, dtype=np.float64),
        np.ascontiguousarray(stream, dtype=np.uint64),
        np.ascontiguousarray(flip, dtype=np.uint8),
        np.ascontiguousarray(k0, dtype=np.uint64),
        np.uint64(seed), float(dt),
        out_state, out_time, out_kind, out_k,
    )
    return out_state, out_time, out_kind, out_k
