"""Fast-slow system with a folded critical manifold.

    eps dx1/dt = x2 + lambda + x1 (x1 - 1)
        dx2/dt = -sum_{n=1}^N x1^n

driven either steadily (``dlambda/dt = r``) or with decaying rate
(``dlambda/dt = rho exp(-lambda)``). The QSE is ``(x1, x2) = (0, -lambda)``.
The critical manifold ``x2 = -lambda - x1 (x1 - 1)`` folds at ``x1 = 1/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import solve_ivp

from .critical import CriticalRateResult, find_critical_rate
from .dynamics import TimeGrid, VectorField, integrate_ode, kernel_field
from .outcome import TIPS, TRACKS, UNDECIDED, Outcome

FOLD_X1 = 0.5


class AtFold(ValueError):
    pass


class OnRepellingSheet(ValueError):
    pass


@dataclass(frozen=True)
class Steady:
    r: float


@dataclass(frozen=True)
class Unsteady:
    rho: float
    lambda_t0: float = 0.0
    t0: float = 0.0


@dataclass(frozen=True)
class SlowFastParams:
    epsilon: float
    N: int
    drift: Union[Steady, Unsteady]

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.N < 1 or self.N % 2 == 0:
            raise ValueError("N must be an odd positive integer")
        if isinstance(self.drift, Unsteady) and not self.drift.rho > 0:
            raise ValueError("rho must be positive")


def power_sum(x1, N: int):
    """``sum_{n=1}^N x1^n``."""
    x1 = np.asarray(x1, dtype=float)
    s = np.zeros_like(x1)
    p = np.ones_like(x1)
    for _ in range(N):
        p = p * x1
        s = s + p
    return s if s.ndim else float(s)


def series_pq(N: int) -> tuple[float, float]:
    p = sum(2.0 ** -n for n in range(1, N + 1))
    q = sum(n * 2.0 ** -n for n in range(1, N + 1))
    return p, q


def unsteady_lambda(rho: float, lambda_t0: float, t0: float, t):
    """Closed-form ``lambda(t) = ln(rho (t - t0) + exp(lambda_t0))``."""
    return np.log(rho * (np.asarray(t, dtype=float) - t0) + math.exp(lambda_t0))


def sf_field(p: SlowFastParams) -> VectorField:
    """3-D field in ``(x1, x2, lambda)``.

    For unsteady drift ``lambda`` is written from its closed form after each
    step, so the third component never accumulates integration error.
    """
    names = ("x1", "x2", "lambda")
    if isinstance(p.drift, Steady):
        return kernel_field("slowfast_steady", (p.epsilon, p.N, p.drift.r), 3, names=names)
    d = p.drift
    return kernel_field("slowfast_unsteady", (p.epsilon, p.N, d.rho, d.t0, d.lambda_t0), 3,
                        names=names)


def critical_manifold(lam, x1):
    return -np.asarray(lam) - np.asarray(x1) * (np.asarray(x1) - 1.0)


def fold_point(lam: float) -> tuple[float, float]:
    return FOLD_X1, -lam + 0.25


def _slow_rate(drift, lam):
    if isinstance(drift, Steady):
        return drift.r
    return drift.rho * math.exp(-lam)


def projected_reduced_field(p: SlowFastParams) -> VectorField:
    """Slow flow on the critical manifold in ``(x1, lambda)``."""
    N, drift = p.N, p.drift

    def f(u, t):
        x1, lam = u[0], u[1]
        den = 2.0 * x1 - 1.0
        if abs(den) < 1e-12:
            raise AtFold("projected reduced field is singular at the fold x1 = 1/2")
        r = _slow_rate(drift, lam)
        return np.array([(-r + power_sum(x1, N)) / den, r])
    return VectorField(f, 2, names=("x1", "lambda"))


def desingularised_field_steady(p: SlowFastParams) -> VectorField:
    """Reduced flow rescaled by ``dt/dtau = -(2 x1 - 1)``."""
    if not isinstance(p.drift, Steady):
        raise ValueError("steady drift required")
    r, N = p.drift.r, p.N
    return VectorField(lambda u, t: np.array([r - power_sum(u[0], N),
                                              -r * (2.0 * u[0] - 1.0)]),
                       2, names=("x1", "lambda"))


def desingularised_field_unsteady(p: SlowFastParams) -> VectorField:
    if not isinstance(p.drift, Unsteady):
        raise ValueError("unsteady drift required")
    rho, N = p.drift.rho, p.N

    def f(u, t):
        g = rho * math.exp(-u[1])
        return np.array([g - power_sum(u[0], N), -g * (2.0 * u[0] - 1.0)])
    return VectorField(f, 2, names=("x1", "lambda"))


def sf_critical_rate_steady(N: int) -> float:
    if N < 1 or N % 2 == 0:
        raise ValueError("N must be an odd positive integer")
    return series_pq(N)[0]


@dataclass(frozen=True)
class FoldedSaddle:
    """Folded saddle of the unsteady desingularised system.

    ``w`` is the direction in the closed-form critical-rate estimate;
    ``stable_direction`` is the stable eigenvector of the Jacobian at the
    saddle in ``(x1, lambda)`` order. The two differ by swapping the roles
    of the components.
    """

    x1_F: float
    lambda_F: float
    p: float
    q: float
    w: tuple[float, float]
    stable_direction: tuple[float, float]
    eigenvalues: tuple[float, float]


def _w1(p, q):
    k = q / p
    return -k + math.sqrt(2.0 + k * k)


def folded_saddle(N: int, rho: float) -> FoldedSaddle:
    p, q = series_pq(N)
    w1 = _w1(p, q)
    disc = math.sqrt(q * q + 2.0 * p * p)
    return FoldedSaddle(FOLD_X1, -math.log(p / rho), p, q, (w1, 1.0), (1.0 / w1, 1.0),
                        (-q - disc, -q + disc))


def folded_saddle_jacobian(N: int, rho: float) -> np.ndarray:
    fs = folded_saddle(N, rho)
    return np.array([[-2.0 * fs.q, -fs.p], [-2.0 * fs.p, 0.0]])


def sf_rho_c_approx(N: int, x1_0: float, lambda_0: float) -> float:
    """Closed-form estimate ``p exp(lambda_0 + (1/2 - x1_0) / w1)``."""
    if x1_0 > FOLD_X1:
        raise OnRepellingSheet("initial point lies on the repelling sheet x1 > 1/2")
    p, q = series_pq(N)
    return p * math.exp(lambda_0 + (FOLD_X1 - x1_0) / _w1(p, q))


def sf_rho_c_singular(N: int, x1_0: float, lambda_0: float, *, delta: float = 1e-7,
                      rtol: float = 1e-11, atol: float = 1e-13) -> float:
    """Singular-limit threshold from the stable manifold of the folded saddle.

    With ``m = lambda - ln(rho)`` the desingularised unsteady system is
    independent of ``rho``. Its saddle's stable manifold, followed backwards
    onto the attracting sheet to ``x1 = x1_0``, meets ``m = m*``; the start
    ``(x1_0, lambda_0)`` lies on it exactly when ``rho = exp(lambda_0 - m*)``.
    """
    if x1_0 >= FOLD_X1:
        raise OnRepellingSheet("initial point must lie on the attracting sheet x1 < 1/2")
    fs = folded_saddle(N, 1.0)
    v = np.array(fs.stable_direction)
    v /= np.linalg.norm(v)

    def back(tau, u):
        g = math.exp(-u[1])
        return [-(g - power_sum(u[0], N)), g * (2.0 * u[0] - 1.0)]

    def reach(tau, u):
        return u[0] - x1_0
    reach.terminal = True

    u0 = [fs.x1_F - delta * v[0], fs.lambda_F - delta * v[1]]
    sol = solve_ivp(back, (0.0, 1e4), u0, events=reach, rtol=rtol, atol=atol, method="DOP853")
    if not sol.t_events[0].size:
        raise RuntimeError("stable manifold did not reach the starting x1")
    m_star = sol.y_events[0][0][1]
    return math.exp(lambda_0 - m_star)


def settled_lag(N: int, r: float) -> Optional[float]:
    """Constant ``x1 < 1/2`` with ``sum x1^n = r``, or ``None`` when ``r >= p``."""
    if r >= series_pq(N)[0]:
        return None
    lo, hi = -1.0, FOLD_X1
    while power_sum(lo, N) > r:
        lo *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if power_sum(mid, N) < r:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sf_classify(p: SlowFastParams, x0=(0.0, 0.0), horizon: float = 100.0, *,
                dt: Optional[float] = None, tol: float = 0.05, backend=None) -> Outcome:
    """Run the full system from ``(x1, x2) = x0`` and classify.

    Tips: the run diverges after ``x1`` has passed the fold. Tracks, steady
    drift: bounded to the horizon with ``x1 < 1`` over its final quarter, so
    the state settles at its constant lag or on a small cycle around it
    without reaching the repelling sheet. Tracks, unsteady drift: within
    ``tol`` of the QSE at the horizon. Anything else is undecided.
    """
    if dt is None:
        dt = p.epsilon / 20.0
    if isinstance(p.drift, Steady):
        t0, lam0 = 0.0, 0.0
    else:
        t0, lam0 = p.drift.t0, p.drift.lambda_t0
    traj = integrate_ode(sf_field(p), [x0[0], x0[1], lam0], TimeGrid(t0, t0 + horizon, dt),
                         record_every=100, backend=backend)
    if traj.diverged:
        if np.any(traj.states[:, 0] > FOLD_X1):
            return Outcome(TIPS, traj.final_time)
        return Outcome(UNDECIDED, detail="diverged without crossing the fold")
    x1, x2, lam = traj.final_state
    if isinstance(p.drift, Steady):
        tail = traj.states[traj.times >= t0 + 0.75 * horizon, 0]
        if tail.max() < 1.0:
            return Outcome(TRACKS)
        return Outcome(UNDECIDED, detail=f"x1 reached {tail.max():g} late in the run")
    dist = math.hypot(x1, x2 + lam)
    if dist < tol:
        return Outcome(TRACKS)
    return Outcome(UNDECIDED, detail=f"QSE distance {dist:g} at horizon")


def empirical_steady_rate(epsilon: float, N: int, bracket=None, rel_tol: float = 1e-3,
                          **kw) -> CriticalRateResult:
    rc = sf_critical_rate_steady(N)
    if bracket is None:
        bracket = (0.6 * rc, min(1.4 * rc, 1.2))
    return find_critical_rate(lambda r: sf_classify(SlowFastParams(epsilon, N, Steady(r)), **kw),
                              bracket, rel_tol, rc)


def empirical_unsteady_rate(epsilon: float, N: int, x1_0: float = 0.0, lambda_0: float = 0.0,
                            bracket=(0.4, 1.5), rel_tol: float = 1e-3,
                            **kw) -> CriticalRateResult:
    """Bisection on ``rho`` from ``x1 = x1_0`` on the QSE-side of the slow manifold.

    The start is ``(x1_0, -lambda_0)`` in ``(x1, x2)``; the reported analytic
    value is the closed-form estimate.
    """
    def classify(rho):
        p = SlowFastParams(epsilon, N, Unsteady(rho, lambda_0, 0.0))
        return sf_classify(p, (x1_0, -lambda_0), **kw)
    return find_critical_rate(classify, bracket, rel_tol, sf_rho_c_approx(N, x1_0, lambda_0))
