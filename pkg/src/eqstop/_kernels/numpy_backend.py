"""Vectorized NumPy implementation of the stopping kernel.

Reference implementation of the algorithm documented in the package
docstring; the Cython extension mirrors it draw for draw.  Paths advance in
lockstep over the active set, each holding its own draw counter, so the
output for a path depends only on ``(seed, stream, k0)``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from .._rng import PHI, SALT, mix64
from ..errors import BoundaryEscapeError
from . import (
    KIND_CENSORED,
    KIND_COX,
    KIND_EXIT,
    LAM_CONST,
    LAM_FUNC,
    LAM_ZERO,
    SCHEME_EULER,
    SCHEME_GBM,
    SCHEME_WIENER,
)

_INV53 = 2.0**-53
_U1 = np.uint64(1)
_U11 = np.uint64(11)

_MAX_HALVINGS = 30


def _uniforms(base, k, flip):
    with np.errstate(over="ignore"):
        r = mix64(base + (k + _U1) * PHI)
    u = ((r >> _U11).astype(np.float64) + 0.5) * _INV53
    return np.where(flip, 1.0 - u, u)


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
    """Simulate stopping outcomes for a batch of paths.

    All per-path arguments are 1-d arrays of equal length; every start state
    must lie strictly inside its ``(lo, hi)`` interval.  Returns arrays
    ``(state, time, kind, k_end)``.
    """
    n = len(x0)
    x0 = np.asarray(x0, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    tmax = np.asarray(tmax, dtype=np.float64)

    out_state = np.empty(n)
    out_time = np.empty(n)
    out_kind = np.full(n, -1, dtype=np.int8)
    k = np.asarray(k0, dtype=np.uint64).copy()

    with np.errstate(over="ignore"):
        base = mix64(
            mix64(np.uint64(seed) + PHI) ^ (np.asarray(stream, dtype=np.uint64) * PHI + SALT)
        )
    flip = np.asarray(flip, dtype=bool)

    # Driving coordinate: log-state for GBM, state otherwise.
    if scheme == SCHEME_GBM:
        w = np.log(x0)
        wlo = np.where(lo > 0.0, np.log(np.maximum(lo, 1e-300)), -np.inf)
        whi = np.where(np.isfinite(hi), np.log(np.maximum(hi, 1e-300)), np.inf)
        c_drift = mu - 0.5 * sigma2
        c_vol = np.sqrt(sigma2)
    else:
        w = x0.copy()
        wlo = lo.copy()
        whi = hi.copy()
        c_drift = mu if scheme == SCHEME_WIENER else 0.0
        c_vol = np.sqrt(sigma2) if scheme == SCHEME_WIENER else 1.0

    t = np.zeros(n)
    lam_total = np.zeros(n)
    idx = np.arange(n)

    if lam_kind != LAM_ZERO:
        e_target = -np.log1p(-_uniforms(base, k, flip))
        k += _U1
    else:
        e_target = np.full(n, np.inf)

    if lam_kind == LAM_FUNC:
        lam_prev = np.asarray(lam_fn(_to_state(scheme, w)), dtype=np.float64) * np.ones(n)
    else:
        lam_prev = np.full(n, lam_const)

    # No reachable barrier and constant intensity: jump time known upfront,
    # state there one exact transition (mirrors the compiled fast path).
    if lam_kind != LAM_FUNC:
        fast = np.isneginf(wlo) & np.isposinf(whi)
        if fast.any():
            a = idx[fast]
            if lam_kind == LAM_CONST and lam_const > 0.0:
                t_togo = e_target[a] / lam_const
            else:
                t_togo = np.full(a.size, np.inf)
            censored = t_togo >= tmax[a]
            dt_s = np.where(censored, tmax[a], t_togo)
            z = ndtri(_uniforms(base[a], k[a], flip[a]))
            k[a] += _U1
            wn = w[a] + c_drift * dt_s + c_vol * np.sqrt(dt_s) * z
            out_state[a] = _to_state(scheme, wn)
            out_time[a] = dt_s
            out_kind[a] = np.where(censored, KIND_CENSORED, KIND_COX)
            idx = idx[~fast]

    while idx.size:
        rem = tmax[idx] - t[idx]
        done = rem <= 0.0
        if done.any():
            sel = idx[done]
            out_state[sel] = _to_state(scheme, w[sel])
            out_time[sel] = tmax[sel]
            out_kind[sel] = KIND_CENSORED
            idx = idx[~done]
            if not idx.size:
                break
            rem = rem[~done]

        a = idx
        final_step = rem <= dt
        dt_s = np.where(final_step, rem, dt)
        exact_jump = np.zeros(a.size, dtype=bool)
        if lam_kind == LAM_CONST and lam_const > 0.0 and scheme != SCHEME_EULER:
            t_togo = (e_target[a] - lam_total[a]) / lam_const
            exact_jump = t_togo <= dt_s
            dt_s = np.where(exact_jump, t_togo, dt_s)
            final_step = final_step & ~exact_jump

        z = ndtri(_uniforms(base[a], k[a], flip[a]))
        k[a] += _U1

        if scheme == SCHEME_EULER:
            dt_req = dt_s
            dt_s, wn, vol_loc = _euler_propose(
                w[a], dt_s, z, drift_fn, vol_fn, bounds, base[a], k, a, flip[a]
            )
            final_step = final_step & (dt_s == dt_req)
            v_step = vol_loc * vol_loc * dt_s
        else:
            wn = w[a] + c_drift * dt_s + c_vol * np.sqrt(dt_s) * z
            v_step = c_vol * c_vol * dt_s

        lo_a, hi_a = wlo[a], whi[a]
        wa = w[a]
        vis_hi = np.isfinite(hi_a) & (wn >= hi_a)
        vis_lo = ~vis_hi & np.isfinite(lo_a) & (wn <= lo_a)
        crossed_hi = vis_hi.copy()
        crossed_lo = vis_lo.copy()
        dw = wn - wa
        theta = np.full(a.size, np.nan)
        theta[vis_hi] = (hi_a[vis_hi] - wa[vis_hi]) / dw[vis_hi]
        theta[vis_lo] = (lo_a[vis_lo] - wa[vis_lo]) / dw[vis_lo]

        need_bridge = (
            ~vis_hi & ~vis_lo & (np.isfinite(hi_a) | np.isfinite(lo_a)) & (dt_s > 0.0)
        )
        if need_bridge.any():
            m = need_bridge
            ub = _uniforms(base[a][m], k[a][m], flip[a][m])
            k[a[m]] += _U1
            v = v_step[m] if np.ndim(v_step) else np.full(m.sum(), v_step)
            with np.errstate(over="ignore"):
                p_hi = np.where(
                    np.isfinite(hi_a[m]),
                    np.exp(-2.0 * (hi_a[m] - wa[m]) * (hi_a[m] - wn[m]) / v),
                    0.0,
                )
                p_lo = np.where(
                    np.isfinite(lo_a[m]),
                    np.exp(-2.0 * (wa[m] - lo_a[m]) * (wn[m] - lo_a[m]) / v),
                    0.0,
                )
            b_hi = ub < p_hi
            b_lo = ~b_hi & (ub < p_hi + p_lo)
            crossed_hi[m] |= b_hi
            crossed_lo[m] |= b_lo
            th = theta[m]
            th[b_hi | b_lo] = 0.5
            theta[m] = th

        crossed = crossed_hi | crossed_lo
        t_exit = np.where(crossed, t[a] + theta * dt_s, np.inf)

        # Jump candidate inside this step.
        if lam_kind == LAM_CONST and scheme != SCHEME_EULER:
            t_jump = np.where(exact_jump, t[a] + dt_s, np.inf)
            w_jump = wn
            lam_new = lam_total[a] + lam_const * dt_s
        elif lam_kind != LAM_ZERO:
            lam_here = (
                np.full(a.size, lam_const)
                if lam_kind == LAM_CONST
                else np.asarray(lam_fn(_to_state(scheme, wn)), dtype=np.float64) * np.ones(a.size)
            )
            lam_new = lam_total[a] + 0.5 * (lam_prev[a] + lam_here) * dt_s
            hits = (lam_new >= e_target[a]) & (lam_new > lam_total[a])
            frac = np.where(
                hits, (e_target[a] - lam_total[a]) / np.where(hits, lam_new - lam_total[a], 1.0), np.inf
            )
            t_jump = np.where(hits, t[a] + frac * dt_s, np.inf)
            w_jump = wa + dw * np.minimum(frac, 1.0)
            lam_prev[a] = lam_here
        else:
            t_jump = np.full(a.size, np.inf)
            w_jump = wn
            lam_new = lam_total[a]

        is_exit = crossed & (t_exit <= t_jump)
        is_jump = ~is_exit & np.isfinite(t_jump)

        if is_exit.any():
            sel = a[is_exit]
            out_state[sel] = np.where(crossed_hi[is_exit], hi[sel], lo[sel])
            out_time[sel] = t_exit[is_exit]
            out_kind[sel] = KIND_EXIT
        if is_jump.any():
            sel = a[is_jump]
            out_state[sel] = _to_state(scheme, w_jump[is_jump])
            out_time[sel] = t_jump[is_jump]
            out_kind[sel] = KIND_COX

        alive = ~is_exit & ~is_jump
        sel = a[alive]
        w[sel] = wn[alive]
        dt_adv = dt_s[alive] if np.ndim(dt_s) else dt_s
        t[sel] = np.where(final_step[alive], tmax[sel], t[sel] + dt_adv)
        lam_total[sel] = lam_new[alive] if np.ndim(lam_new) else lam_new
        idx = sel

    return out_state, out_time, out_kind, k


def _to_state(scheme, w):
    return np.exp(w) if scheme == SCHEME_GBM else w


def _euler_propose(x, dt_s, z, drift_fn, vol_fn, bounds, base, k, a, flip):
    """Euler step with halved-dt redraws for proposals leaving the state interval.

    The accepted step may advance less time than requested; the effective
    per-path dt is returned.
    """
    blo, bhi = bounds
    dt_eff = np.array(dt_s, dtype=np.float64) * np.ones(len(x))
    mu_loc = np.asarray(drift_fn(x), dtype=np.float64) * np.ones(len(x))
    vol_loc = np.asarray(vol_fn(x), dtype=np.float64) * np.ones(len(x))
    xn = x + mu_loc * dt_eff + vol_loc * np.sqrt(dt_eff) * z
    bad = (xn <= blo) | (xn >= bhi)
    tries = 0
    while bad.any():
        tries += 1
        if tries > _MAX_HALVINGS:
            raise BoundaryEscapeError(
                "Euler step left the state interval after 30 halvings"
            )
        dt_eff[bad] *= 0.5
        zb = ndtri(_uniforms(base[bad], k[a[bad]], flip[bad]))
        k[a[bad]] += _U1
        xn[bad] = x[bad] + mu_loc[bad] * dt_eff[bad] + vol_loc[bad] * np.sqrt(dt_eff[bad]) * zb
        bad = (xn <= blo) | (xn >= bhi)
    return dt_eff, xn, vol_loc
