"""Pure-Python stepping kernels.

This module mirrors ``_core.pyx`` operation for operation. Every arithmetic
expression is written in the same order as the compiled version so both
backends produce bitwise-identical trajectories; keep them in sync.
"""

import math

SADDLE_NODE = 1
HOPF_STEADY = 2
HOPF_SHIFT = 3
SLOWFAST_STEADY = 4
SLOWFAST_UNSTEADY = 5
EBM_STATIC = 6
EBM_SHIFT = 7
EBM_RAMP = 8

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

# stop kinds
STOP_NORM_GT = 1
STOP_COMP_GT = 2
STOP_COMP_LT = 3
STOP_QSE_GT = 4

# run status
COMPLETED = 0
STOPPED = 1
DIVERGED = 2


def _sf_sum(x1, n):
    s = 0.0
    p = 1.0
    for _ in range(n):
        p *= x1
        s += p
    return s


def _ebm_flux(par, mu, a2, b2, T):
    # par: k, I0, sigma, c, e
    rdown = 0.25 * mu * par[1] * (1.0 - (a2 - b2 * T * T))
    rup = par[4] * par[2] * T * T * T * T
    return par[0] * (rdown - rup) / par[3]


def make_rhs(code, par):
    """Return ``(rhs, post, qse)`` closures for a built-in system."""
    par = [float(v) for v in par]
    post = None
    qse = None

    if code == SADDLE_NODE:
        mu, r = par[0], par[1]
        smu = math.sqrt(mu)

        def rhs(t, x):
            y = x[0] + x[1]
            return [y * y - mu, r]

        def qse(t, x):
            return abs(x[0] + x[1] + smu)

    elif code == HOPF_STEADY or code == HOPF_SHIFT:
        om = par[0]
        if code == HOPF_STEADY:
            r = par[1]
        else:
            rho, delta = par[1], par[2]

        def rhs(t, x):
            wx = x[0] - x[2]
            wy = x[1]
            m = wx * wx + wy * wy
            if code == HOPF_STEADY:
                dl = r
            else:
                dl = rho * x[2] * (delta - x[2])
            return [-wx - om * wy + m * wx, om * wx - wy + m * wy, dl]

        def qse(t, x):
            wx = x[0] - x[2]
            return math.sqrt(wx * wx + x[1] * x[1])

    elif code == SLOWFAST_STEADY:
        eps, n, r = par[0], int(par[1]), par[2]

        def rhs(t, x):
            x1 = x[0]
            return [(x[1] + x[2] + x1 * (x1 - 1.0)) / eps, -_sf_sum(x1, n), r]

        def qse(t, x):
            d = x[1] + x[2]
            return math.sqrt(x[0] * x[0] + d * d)

    elif code == SLOWFAST_UNSTEADY:
        eps, n, rho, tref, lref = par[0], int(par[1]), par[2], par[3], par[4]
        elref = math.exp(lref)

        def rhs(t, x):
            x1 = x[0]
            arg = rho * (t - tref) + elref
            lam = math.log(arg)
            return [(x[1] + lam + x1 * (x1 - 1.0)) / eps, -_sf_sum(x1, n), rho / arg]

        def post(t, x):
            x[2] = math.log(rho * (t - tref) + elref)

        def qse(t, x):
            d = x[1] + x[2]
            return math.sqrt(x[0] * x[0] + d * d)

    elif code == EBM_STATIC:
        mu, a2, b2 = par[5], par[6], par[7]

        def rhs(t, x):
            return [_ebm_flux(par, mu, a2, b2, x[0])]

    elif code == EBM_SHIFT:
        mu, rho, b2i, b2f, disc = par[5], par[8], par[9], par[10], par[11]
        I0, sig, e = par[1], par[2], par[4]

        def rhs(t, x):
            lam = x[1]
            b2 = (1.0 - lam) * b2i + lam * b2f
            bb = mu * I0 * b2 / (4.0 * e * sig)
            a2 = 1.0 + (bb * bb - disc) * e * sig / (mu * I0)
            return [_ebm_flux(par, mu, a2, b2, x[0]), rho * lam * (1.0 - lam)]

    elif code == EBM_RAMP:
        mu0, a2, b2, rate = par[5], par[6], par[7], par[12]

        def rhs(t, x):
            return [_ebm_flux(par, mu0 + rate * t, a2, b2, x[0])]

    else:
        raise ValueError(f"unknown system code {code}")

    if qse is None:
        def qse(t, x):
            return 0.0

    return rhs, post, qse


def _coded_stops(kinds, idx, thr, qse):
    stops = []
    for k, i, h in zip(kinds, idx, thr):
        k, i, h = int(k), int(i), float(h)
        if k == STOP_NORM_GT:
            stops.append(lambda t, x, h=h: _norm(x) > h)
        elif k == STOP_COMP_GT:
            stops.append(lambda t, x, i=i, h=h: x[i] > h)
        elif k == STOP_COMP_LT:
            stops.append(lambda t, x, i=i, h=h: x[i] < h)
        elif k == STOP_QSE_GT:
            stops.append(lambda t, x, h=h: qse(t, x) > h)
        else:
            raise ValueError(f"unknown stop kind {k}")
    return stops


def _norm(x):
    s = 0.0
    for v in x:
        s += v * v
    return math.sqrt(s)


def _finite(x):
    for v in x:
        if not math.isfinite(v):
            return False
    return True


def rk4_loop(rhs, x0, t0, dt, nsteps, stops=(), record_every=1, div=1e6, post=None):
    """Classical RK4 with on-grid stop detection.

    Returns ``(times, states, status, which)`` where ``which`` is the index
    of the stop condition that fired (or -1).
    """
    d = len(x0)
    x = [float(v) for v in x0]
    h2 = 0.5 * dt
    dt6 = dt / 6.0
    times = [t0]
    states = [list(x)]
    status = COMPLETED
    which = -1
    k = 0
    while k < nsteps:
        t = t0 + k * dt
        k1 = rhs(t, x)
        xs = [x[i] + h2 * k1[i] for i in range(d)]
        k2 = rhs(t + h2, xs)
        xs = [x[i] + h2 * k2[i] for i in range(d)]
        k3 = rhs(t + h2, xs)
        xs = [x[i] + dt * k3[i] for i in range(d)]
        k4 = rhs(t + dt, xs)
        xn = [x[i] + dt6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(d)]
        k += 1
        tn = t0 + k * dt
        if post is not None:
            post(tn, xn)
        if not _finite(xn):
            status = DIVERGED
            if times[-1] != t:
                times.append(t)
                states.append(list(x))
            break
        x = xn
        if _norm(x) > div:
            status = DIVERGED
        else:
            for j, stop in enumerate(stops):
                if stop(tn, x):
                    status = STOPPED
                    which = j
                    break
        if status != COMPLETED or k % record_every == 0 or k == nsteps:
            times.append(tn)
            states.append(list(x))
        if status != COMPLETED:
            break
    return times, states, status, which


def em_loop(rhs, x0, t0, dt, nsteps, amp, g, xi, stops=(), record_every=1, div=1e6,
            post=None):
    """Euler-Maruyama ``x + f dt + amp * g(x) * xi``.

    ``g`` is either a constant sequence or a callable of the state; ``xi`` is
    an ``(nsteps, d)`` array of standard normals.
    """
    d = len(x0)
    x = [float(v) for v in x0]
    times = [t0]
    states = [list(x)]
    status = COMPLETED
    which = -1
    k = 0
    gconst = None if callable(g) else [float(v) for v in g]
    while k < nsteps:
        t = t0 + k * dt
        f = rhs(t, x)
        gk = gconst if gconst is not None else [float(v) for v in g(x)]
        row = xi[k]
        xn = [x[i] + f[i] * dt + amp * gk[i] * float(row[i]) for i in range(d)]
        k += 1
        tn = t0 + k * dt
        if post is not None:
            post(tn, xn)
        if not _finite(xn):
            status = DIVERGED
            if times[-1] != t:
                times.append(t)
                states.append(list(x))
            break
        x = xn
        if _norm(x) > div:
            status = DIVERGED
        else:
            for j, stop in enumerate(stops):
                if stop(tn, x):
                    status = STOPPED
                    which = j
                    break
        if status != COMPLETED or k % record_every == 0 or k == nsteps:
            times.append(tn)
            states.append(list(x))
        if status != COMPLETED:
            break
    return times, states, status, which


def rk4_run(code, params, x0, t0, dt, nsteps, kinds, idx, thr, record_every=1, div=1e6):
    rhs, post, qse = make_rhs(code, params)
    stops = _coded_stops(kinds, idx, thr, qse)
    return rk4_loop(rhs, x0, t0, dt, nsteps, stops, record_every, div, post)


def em_run(code, params, x0, t0, dt, nsteps, amp, g, xi, kinds, idx, thr,
           record_every=1, div=1e6):
    rhs, post, qse = make_rhs(code, params)
    stops = _coded_stops(kinds, idx, thr, qse)
    return em_loop(rhs, x0, t0, dt, nsteps, amp, g, xi, stops, record_every, div, post)
