# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernels for the built-in systems.

Operation order matches ``_pycore`` exactly; build with ``-ffp-contract=off``
so the two backends stay bitwise identical.
"""

import numpy as np
from libc.math cimport sqrt, exp, log, fabs, isfinite

cdef enum:
    SADDLE_NODE = 1
    HOPF_STEADY = 2
    HOPF_SHIFT = 3
    SLOWFAST_STEADY = 4
    SLOWFAST_UNSTEADY = 5
    EBM_STATIC = 6
    EBM_SHIFT = 7
    EBM_RAMP = 8

cdef enum:
    STOP_NORM_GT = 1
    STOP_COMP_GT = 2
    STOP_COMP_LT = 3
    STOP_QSE_GT = 4

cdef enum:
    COMPLETED = 0
    STOPPED = 1
    DIVERGED = 2

SYSTEM_CODES = {
    "saddle_node": SADDLE_NODE,
    "hopf_steady": HOPF_STEADY,
    "hopf_shift": HOPF_SHIFT,
    "slowfast_steady": SLOWFAST_STEADY,
    "slowfast_unsteady": SLOWFAST_UNSTEADY,
    "ebm_static": EBM_STATIC,
    "ebm_shift": EBM_SHIFT,
    "ebm_ramp": EBM_RAMP,
}

DEF MAXD = 8


cdef inline double _sf_sum(double x1, int n) noexcept nogil:
    cdef double s = 0.0
    cdef double p = 1.0
    cdef int i
    for i in range(n):
        p *= x1
        s += p
    return s


cdef inline double _ebm_flux(const double* par, double mu, double a2, double b2,
                             double T) noexcept nogil:
    cdef double rdown = 0.25 * mu * par[1] * (1.0 - (a2 - b2 * T * T))
    cdef double rup = par[4] * par[2] * T * T * T * T
    return par[0] * (rdown - rup) / par[3]


cdef void _rhs(int code, const double* par, double t, const double* x,
               double* out) noexcept nogil:
    cdef double y, wx, wy, m, dl, x1, arg, lam, b2, bb, a2
    if code == SADDLE_NODE:
        y = x[0] + x[1]
        out[0] = y * y - par[0]
        out[1] = par[1]
    elif code == HOPF_STEADY or code == HOPF_SHIFT:
        wx = x[0] - x[2]
        wy = x[1]
        m = wx * wx + wy * wy
        if code == HOPF_STEADY:
            dl = par[1]
        else:
            dl = par[1] * x[2] * (par[2] - x[2])
        out[0] = -wx - par[0] * wy + m * wx
        out[1] = par[0] * wx - wy + m * wy
        out[2] = dl
    elif code == SLOWFAST_STEADY:
        x1 = x[0]
        out[0] = (x[1] + x[2] + x1 * (x1 - 1.0)) / par[0]
        out[1] = -_sf_sum(x1, <int>par[1])
        out[2] = par[2]
    elif code == SLOWFAST_UNSTEADY:
        x1 = x[0]
        arg = par[2] * (t - par[3]) + exp(par[4])
        lam = log(arg)
        out[0] = (x[1] + lam + x1 * (x1 - 1.0)) / par[0]
        out[1] = -_sf_sum(x1, <int>par[1])
        out[2] = par[2] / arg
    elif code == EBM_STATIC:
        out[0] = _ebm_flux(par, par[5], par[6], par[7], x[0])
    elif code == EBM_SHIFT:
        lam = x[1]
        b2 = (1.0 - lam) * par[9] + lam * par[10]
        bb = par[5] * par[1] * b2 / (4.0 * par[4] * par[2])
        a2 = 1.0 + (bb * bb - par[11]) * par[4] * par[2] / (par[5] * par[1])
        out[0] = _ebm_flux(par, par[5], a2, b2, x[0])
        out[1] = par[8] * lam * (1.0 - lam)
    elif code == EBM_RAMP:
        out[0] = _ebm_flux(par, par[5] + par[12] * t, par[6], par[7], x[0])


cdef inline void _post(int code, const double* par, double t, double* x) noexcept nogil:
    if code == SLOWFAST_UNSTEADY:
        x[2] = log(par[2] * (t - par[3]) + exp(par[4]))


cdef inline double _qse(int code, const double* par, const double* x) noexcept nogil:
    cdef double wx, d
    if code == SADDLE_NODE:
        return fabs(x[0] + x[1] + sqrt(par[0]))
    elif code == HOPF_STEADY or code == HOPF_SHIFT:
        wx = x[0] - x[2]
        return sqrt(wx * wx + x[1] * x[1])
    elif code == SLOWFAST_STEADY or code == SLOWFAST_UNSTEADY:
        d = x[1] + x[2]
        return sqrt(x[0] * x[0] + d * d)
    return 0.0


cdef inline double _norm(const double* x, int d) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(d):
        s += x[i] * x[i]
    return sqrt(s)


cdef inline int _check_stops(int code, const double* par, const double* x, int d,
                             const long* kinds, const long* idx, const double* thr,
                             int nstop) noexcept nogil:
    cdef int j
    cdef long k
    for j in range(nstop):
        k = kinds[j]
        if k == STOP_NORM_GT:
            if _norm(x, d) > thr[j]:
                return j
        elif k == STOP_COMP_GT:
            if x[idx[j]] > thr[j]:
                return j
        elif k == STOP_COMP_LT:
            if x[idx[j]] < thr[j]:
                return j
        elif k == STOP_QSE_GT:
            if _qse(code, par, x) > thr[j]:
                return j
    return -1


def _prep(code, params, x0, kinds, idx, thr):
    if code not in SYSTEM_CODES.values():
        raise ValueError(f"unknown system code {code}")
    par = np.ascontiguousarray(params, dtype=np.float64)
    if par.shape[0] == 0:
        par = np.zeros(1)
    x = np.ascontiguousarray(x0, dtype=np.float64).copy()
    if x.shape[0] > MAXD:
        raise ValueError("state dimension too large for compiled kernel")
    k = np.ascontiguousarray(kinds, dtype=np.int64)
    for v in k:
        if v < 1 or v > 4:
            raise ValueError(f"unknown stop kind {v}")
    i = np.ascontiguousarray(idx, dtype=np.int64)
    h = np.ascontiguousarray(thr, dtype=np.float64)
    if k.shape[0] == 0:
        k = np.zeros(1, dtype=np.int64)
        i = np.zeros(1, dtype=np.int64)
        h = np.zeros(1)
        nstop = 0
    else:
        nstop = k.shape[0]
    return par, x, k, i, h, nstop


def rk4_run(int code, params, x0, double t0, double dt, long nsteps, kinds, idx, thr,
            long record_every=1, double div=1e6):
    par_a, x_a, k_a, i_a, h_a, nstop_py = _prep(code, params, x0, kinds, idx, thr)
    cdef double[::1] par = par_a
    cdef double[::1] x = x_a
    cdef long[::1] kinds_v = k_a
    cdef long[::1] idx_v = i_a
    cdef double[::1] thr_v = h_a
    cdef int nstop = nstop_py
    cdef int d = x.shape[0]
    cdef long cap = nsteps // record_every + 3
    times_a = np.empty(cap)
    states_a = np.empty((cap, d))
    cdef double[::1] times = times_a
    cdef double[:, ::1] states = states_a
    cdef double k1[MAXD]
    cdef double k2[MAXD]
    cdef double k3[MAXD]
    cdef double k4[MAXD]
    cdef double xs[MAXD]
    cdef double xn[MAXD]
    cdef double h2 = 0.5 * dt
    cdef double dt6 = dt / 6.0
    cdef double t, tn
    cdef long k = 0
    cdef long nrec = 0
    cdef int i, status = COMPLETED, which = -1, finite
    cdef const double* pp = &par[0]

    with nogil:
        times[0] = t0
        for i in range(d):
            states[0, i] = x[i]
        nrec = 1
        while k < nsteps:
            t = t0 + k * dt
            _rhs(code, pp, t, &x[0], k1)
            for i in range(d):
                xs[i] = x[i] + h2 * k1[i]
            _rhs(code, pp, t + h2, xs, k2)
            for i in range(d):
                xs[i] = x[i] + h2 * k2[i]
            _rhs(code, pp, t + h2, xs, k3)
            for i in range(d):
                xs[i] = x[i] + dt * k3[i]
            _rhs(code, pp, t + dt, xs, k4)
            for i in range(d):
                xn[i] = x[i] + dt6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            k += 1
            tn = t0 + k * dt
            _post(code, pp, tn, xn)
            finite = 1
            for i in range(d):
                if not isfinite(xn[i]):
                    finite = 0
            if not finite:
                status = DIVERGED
                if times[nrec - 1] != t:
                    times[nrec] = t
                    for i in range(d):
                        states[nrec, i] = x[i]
                    nrec += 1
                break
            for i in range(d):
                x[i] = xn[i]
            if _norm(&x[0], d) > div:
                status = DIVERGED
            else:
                which = _check_stops(code, pp, &x[0], d, &kinds_v[0], &idx_v[0],
                                     &thr_v[0], nstop)
                if which >= 0:
                    status = STOPPED
            if status != COMPLETED or k % record_every == 0 or k == nsteps:
                times[nrec] = tn
                for i in range(d):
                    states[nrec, i] = x[i]
                nrec += 1
            if status != COMPLETED:
                break
    return times_a[:nrec].copy(), states_a[:nrec].copy(), status, which


def em_run(int code, params, x0, double t0, double dt, long nsteps, double amp, g, xi,
           kinds, idx, thr, long record_every=1, double div=1e6):
    par_a, x_a, k_a, i_a, h_a, nstop_py = _prep(code, params, x0, kinds, idx, thr)
    cdef double[::1] par = par_a
    cdef double[::1] x = x_a
    cdef long[::1] kinds_v = k_a
    cdef long[::1] idx_v = i_a
    cdef double[::1] thr_v = h_a
    cdef int nstop = nstop_py
    cdef int d = x.shape[0]
    g_a = np.ascontiguousarray(g, dtype=np.float64)
    xi_a = np.ascontiguousarray(xi, dtype=np.float64)
    if g_a.shape[0] != d:
        raise ValueError("diffusion amplitude must match state dimension")
    if xi_a.ndim != 2 or xi_a.shape[0] < nsteps or xi_a.shape[1] != d:
        raise ValueError("noise array must have shape (nsteps, dim)")
    cdef double[::1] gv = g_a
    cdef double[:, ::1] xiv = xi_a
    cdef long cap = nsteps // record_every + 3
    times_a = np.empty(cap)
    states_a = np.empty((cap, d))
    cdef double[::1] times = times_a
    cdef double[:, ::1] states = states_a
    cdef double f[MAXD]
    cdef double xn[MAXD]
    cdef double t, tn
    cdef long k = 0
    cdef long nrec = 0
    cdef int i, status = COMPLETED, which = -1, finite
    cdef const double* pp = &par[0]

    with nogil:
        times[0] = t0
        for i in range(d):
            states[0, i] = x[i]
        nrec = 1
        while k < nsteps:
            t = t0 + k * dt
            _rhs(code, pp, t, &x[0], f)
            for i in range(d):
                xn[i] = x[i] + f[i] * dt + amp * gv[i] * xiv[k, i]
            k += 1
            tn = t0 + k * dt
            _post(code, pp, tn, xn)
            finite = 1
            for i in range(d):
                if not isfinite(xn[i]):
                    finite = 0
            if not finite:
                status = DIVERGED
                if times[nrec - 1] != t:
                    times[nrec] = t
                    for i in range(d):
                        states[nrec, i] = x[i]
                    nrec += 1
                break
            for i in range(d):
                x[i] = xn[i]
            if _norm(&x[0], d) > div:
                status = DIVERGED
            else:
                which = _check_stops(code, pp, &x[0], d, &kinds_v[0], &idx_v[0],
                                     &thr_v[0], nstop)
                if which >= 0:
                    status = STOPPED
            if status != COMPLETED or k % record_every == 0 or k == nsteps:
                times[nrec] = tn
                for i in range(d):
                    states[nrec, i] = x[i]
                nrec += 1
            if status != COMPLETED:
                break
    return times_a[:nrec].copy(), states_a[:nrec].copy(), status, which
