# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stopping kernel: GBM/Wiener state processes, zero or constant intensity.

Scalar translation of ``numpy_backend.run_stop`` for the hot cases; must
consume random-stream draws in exactly the same order (see package
docstring).  Runs without the GIL so path chunks can be spread over threads.
"""

cimport scipy.special.cython_special as cs
from libc.math cimport INFINITY, exp, isfinite, log, log1p, sqrt

ctypedef unsigned long long u64

cdef double INV53 = 1.0 / 9007199254740992.0
cdef u64 PHI = 0x9E3779B97F4A7C15ULL
cdef u64 SALT = 0x632BE59BD9B4E019ULL


cdef inline u64 mix64(u64 z) nogil:
    z ^= z >> 30
    z *= 0xBF58476D1CE4E5B9ULL
    z ^= z >> 27
    z *= 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double u01(u64 base, u64 k, bint flip) nogil:
    cdef u64 r = mix64(base + (k + 1ULL) * PHI)
    cdef double u = (<double> (r >> 11) + 0.5) * INV53
    return 1.0 - u if flip else u


cdef void one_path(int scheme, double mu, double sigma2, int lam_kind, double lam,
                   double x0, double lo, double hi, double tmax,
                   u64 base, bint flip, u64 k0, double dt,
                   double* out_state, double* out_time, signed char* out_kind,
                   u64* out_k) nogil:
    cdef double w, wlo, whi, cdrift, cvol
    cdef double t = 0.0, lam_total = 0.0, e_target = INFINITY
    cdef double rem, dt_s, t_togo, z, wn, v, theta, p_hi, p_lo, ub
    cdef bint exact_jump, vis_hi, vis_lo, crossed_hi, crossed_lo, final_step
    cdef u64 k = k0

    if scheme == 1:  # GBM steps in log space; barriers map through log.
        w = log(x0)
        wlo = log(lo) if lo > 0.0 else -INFINITY
        whi = log(hi) if isfinite(hi) else INFINITY
        cdrift = mu - 0.5 * sigma2
        cvol = sqrt(sigma2)
    else:
        w = x0
        wlo = lo
        whi = hi
        cdrift = mu
        cvol = sqrt(sigma2)

    if lam_kind != 0:
        e_target = -log1p(-u01(base, k, flip))
        k += 1

    # No reachable barrier and constant intensity: the jump time is E1/lam
    # and the state there is one exact transition, so resolve in O(1).
    if wlo == -INFINITY and whi == INFINITY:
        t_togo = e_target / lam if (lam_kind == 1 and lam > 0.0) else INFINITY
        if t_togo >= tmax:
            dt_s = tmax
            out_kind[0] = 2
        else:
            dt_s = t_togo
            out_kind[0] = 0
        z = cs.ndtri(u01(base, k, flip))
        k += 1
        wn = w + cdrift * dt_s + cvol * sqrt(dt_s) * z
        out_state[0] = exp(wn) if scheme == 1 else wn
        out_time[0] = dt_s
        out_k[0] = k
        return

    while True:
        rem = tmax - t
        if rem <= 0.0:
            out_state[0] = exp(w) if scheme == 1 else w
            out_time[0] = tmax
            out_kind[0] = 2
            break

        final_step = rem <= dt
        dt_s = rem if final_step else dt
        exact_jump = False
        if lam_kind == 1 and lam > 0.0:
            t_togo = (e_target - lam_total) / lam
            if t_togo <= dt_s:
                dt_s = t_togo
                exact_jump = True
                final_step = False

        z = cs.ndtri(u01(base, k, flip))
        k += 1
        wn = w + cdrift * dt_s + cvol * sqrt(dt_s) * z

        vis_hi = isfinite(whi) and wn >= whi
        vis_lo = (not vis_hi) and isfinite(wlo) and wn <= wlo
        crossed_hi = vis_hi
        crossed_lo = vis_lo
        theta = 0.0
        if vis_hi:
            theta = (whi - w) / (wn - w)
        elif vis_lo:
            theta = (wlo - w) / (wn - w)
        elif (isfinite(whi) or isfinite(wlo)) and dt_s > 0.0:
            v = cvol * cvol * dt_s
            p_hi = exp(-2.0 * (whi - w) * (whi - wn) / v) if isfinite(whi) else 0.0
            p_lo = exp(-2.0 * (w - wlo) * (wn - wlo) / v) if isfinite(wlo) else 0.0
            ub = u01(base, k, flip)
            k += 1
            if ub < p_hi:
                crossed_hi = True
                theta = 0.5
            elif ub < p_hi + p_lo:
                crossed_lo = True
                theta = 0.5

        if crossed_hi or crossed_lo:
            # A same-step Cox jump sits at the step end, so the exit wins ties.
            out_state[0] = hi if crossed_hi else lo
            out_time[0] = t + theta * dt_s
            out_kind[0] = 1
            break
        if exact_jump:
            out_state[0] = exp(wn) if scheme == 1 else wn
            out_time[0] = t + dt_s
            out_kind[0] = 0
            break

        w = wn
        t = tmax if final_step else t + dt_s
        if lam_kind == 1:
            lam_total = lam_total + lam * dt_s

    out_k[0] = k


def run_stop(int scheme, double mu, double sigma2, int lam_kind, double lam_const,
             double[::1] x0, double[::1] lo, double[::1] hi, double[::1] tmax,
             u64[::1] stream, unsigned char[::1] flip, u64[::1] k0,
             u64 seed, double dt,
             double[::1] out_state, double[::1] out_time,
             signed char[::1] out_kind, u64[::1] out_k):
    """Fill outcome arrays for a batch of paths; see numpy_backend.run_stop."""
    cdef Py_ssize_t n = x0.shape[0]
    cdef Py_ssize_t i
    cdef u64 s0 = mix64(seed + PHI)
    cdef u64 base
    with nogil:
        for i in range(n):
            base = mix64(s0 ^ (stream[i] * PHI + SALT))
            one_path(scheme, mu, sigma2, lam_kind, lam_const,
                     x0[i], lo[i], hi[i], tmax[i],
                     base, flip[i], k0[i], dt,
                     &out_state[i], &out_time[i], &out_kind[i], &out_k[i])


def kernel_id():
    return "cython"
