"""Linear tipping-radius model ``dx/dt = M (x - x_qse(lambda(t)))``.

The state tracks the quasi-static equilibrium (QSE) while
``|x - x_qse| < R`` and is said to tip once that distance reaches ``R``.
Norms are Euclidean on vectors and the induced 2-norm on matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .dynamics import Predicate, TimeGrid, Trajectory, VectorField, integrate_ode


class NotSteadyDrift(ValueError):
    pass


class ZeroDrift(ValueError):
    pass


class InitialOutsideRadius(ValueError):
    pass


def stable_matrix(M) -> np.ndarray:
    """Validate and return ``M`` as a 2-D float array with stable spectrum."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1] or M.shape[0] not in (1, 2):
        raise ValueError("M must be a scalar or a square 2x2 matrix")
    if not np.all(np.linalg.eigvals(M).real < 0):
        raise ValueError("M must have eigenvalues with negative real part")
    return M


def _vec(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class QsePath:
    """QSE location ``x_tilde(lambda)`` driven by ``lambda(t)``.

    If ``dx_tilde_dlambda`` is omitted it is approximated by a five-point
    central difference with step ``1e-5 * max(1, |lambda|)``.
    """

    x_tilde: Callable[[float], np.ndarray]
    lambda_of_t: Callable[[float], float]
    dlambda_dt: Callable[[float], float]
    dx_tilde_dlambda: Optional[Callable[[float], np.ndarray]] = None

    def position(self, t):
        return _vec(self.x_tilde(self.lambda_of_t(t)))

    def slope(self, lam):
        if self.dx_tilde_dlambda is not None:
            return _vec(self.dx_tilde_dlambda(lam))
        h = 1e-5 * max(1.0, abs(lam))
        f = lambda s: _vec(self.x_tilde(s))
        return (f(lam - 2 * h) - 8 * f(lam - h) + 8 * f(lam + h) - f(lam + 2 * h)) / (12 * h)

    def drift(self, t):
        lam = self.lambda_of_t(t)
        return self.slope(lam) * self.dlambda_dt(t)


def steady_path(direction, rate: float, lambda0: float = 0.0) -> QsePath:
    """QSE moving along ``direction`` with ``lambda(t) = lambda0 + rate t``."""
    v = _vec(direction)
    return QsePath(lambda lam: lam * v,
                   lambda t: lambda0 + rate * t,
                   lambda t: rate,
                   lambda lam: v)


@dataclass(frozen=True)
class LinearTippingSystem:
    M: np.ndarray
    R: float
    path: QsePath

    def __post_init__(self):
        object.__setattr__(self, "M", stable_matrix(self.M))
        if not self.R > 0:
            raise ValueError("tipping radius must be positive")
        if self.path.position(0.0).shape != (self.M.shape[0],):
            raise ValueError("QSE path dimension does not match M")

    @property
    def dim(self):
        return self.M.shape[0]


@dataclass(frozen=True)
class DecayEnvelope:
    """``||exp(M u)|| <= c exp(-beta u)`` for ``u >= 0``."""

    c: float
    beta: float

    def bound(self, u):
        return self.c * np.exp(-self.beta * np.asarray(u, dtype=float))


def qse_drift(sys: LinearTippingSystem, t: float) -> np.ndarray:
    return sys.path.drift(t)


def instantaneous_lag(sys: LinearTippingSystem, t: float) -> np.ndarray:
    return np.linalg.solve(sys.M, qse_drift(sys, t))


def steady_drift_deviation(sys: LinearTippingSystem, sample_times=(0.0, 1.0)) -> float:
    """Asymptotic distance ``|M^-1 r|`` from the QSE under steady drift."""
    rs = [qse_drift(sys, t) for t in sample_times]
    ref = max(np.linalg.norm(rs[0]), 1e-300)
    for r in rs[1:]:
        if np.linalg.norm(r - rs[0]) > 1e-9 * ref:
            raise NotSteadyDrift("QSE drift varies between sample times")
    return float(np.linalg.norm(np.linalg.solve(sys.M, rs[0])))


def _norm_inv(M):
    return float(np.linalg.norm(np.linalg.inv(M), 2))


def avoid_criterion_steady(sys: LinearTippingSystem, r) -> bool:
    """Sufficient for tracking: ``||M^-1|| |r| < R``."""
    return _norm_inv(sys.M) * float(np.linalg.norm(_vec(r))) < sys.R


def tip_criterion_steady(sys: LinearTippingSystem, r) -> bool:
    """Sufficient for tipping: ``|r| / ||M|| > R``."""
    return float(np.linalg.norm(_vec(r))) / float(np.linalg.norm(sys.M, 2)) > sys.R


def decay_envelope(M, *, cond_limit: float = 1e8) -> DecayEnvelope:
    """Exponential envelope of ``||exp(M u)||``.

    For diagonalisable ``M = V D V^-1`` we take ``beta = -max Re(eig)`` and
    ``c = cond(V)``. Near-defective matrices fall back to a 10% smaller
    ``beta`` with ``c`` the supremum of ``||exp(M u)|| exp(beta u)`` on a
    dense grid.
    """
    M = stable_matrix(M)
    w, V = np.linalg.eig(M)
    beta = float(-np.max(w.real))
    cond = np.linalg.cond(V) if np.linalg.matrix_rank(V) == V.shape[0] else np.inf
    if np.isfinite(cond) and cond < cond_limit:
        return DecayEnvelope(float(max(cond, 1.0)), beta)
    beta *= 0.9
    us = np.linspace(0.0, 60.0 / beta, 6001)
    c = max(np.linalg.norm(expm(M * u), 2) * np.exp(beta * u) for u in us)
    return DecayEnvelope(float(max(c, 1.0)), beta)


def _support_start(sys, t, tiny=1e-12, max_span=1e4):
    span = 1.0
    while span < max_span and np.linalg.norm(qse_drift(sys, t - span)) > tiny:
        span *= 2.0
    return t - span


def r_max(sys: LinearTippingSystem, t: float, t_start: Optional[float] = None,
          n: int = 20001) -> float:
    """``sup_{s <= t} |r(s)|`` sampled over the effective support of ``r``."""
    if t_start is None:
        t_start = _support_start(sys, t)
    ss = np.linspace(t_start, t, n)
    return float(max(np.linalg.norm(qse_drift(sys, s)) for s in ss))


def avoid_criterion_general(sys: LinearTippingSystem, t: float,
                            t_start: Optional[float] = None) -> bool:
    """Sufficient for not tipping by ``t``: ``(c / beta) r_max(t) < R``."""
    env = decay_envelope(sys.M)
    return env.c / env.beta * r_max(sys, t, t_start) < sys.R


def natural_timescale(sys: LinearTippingSystem, t: float) -> float:
    r = float(np.linalg.norm(qse_drift(sys, t)))
    if r == 0.0:
        raise ZeroDrift("QSE is not moving at this time")
    return sys.R / r


def linear_field(sys: LinearTippingSystem) -> VectorField:
    M = sys.M
    pos = sys.path.position
    return VectorField(lambda x, t: M @ (x - pos(t)), sys.dim,
                       qse_distance=lambda x, t: float(np.linalg.norm(x - pos(t))))


def simulate_linear_model(sys: LinearTippingSystem, x0, grid: TimeGrid,
                          record_every: int = 1) -> tuple[Trajectory, Optional[float]]:
    """Integrate until ``|x - x_qse| >= R`` or the end of the grid.

    Returns the trajectory and the tip time (``None`` if it tracked).
    """
    x0 = _vec(x0)
    if np.linalg.norm(x0 - sys.path.position(grid.t0)) >= sys.R:
        raise InitialOutsideRadius("initial state is already outside the tipping radius")
    pos = sys.path.position
    tip = Predicate(lambda x, t: np.linalg.norm(x - pos(t)) >= sys.R)
    traj = integrate_ode(linear_field(sys), x0, grid, tip, record_every=record_every)
    tipped = traj.stop_event is not None
    return traj, (traj.stop_event.time if tipped else None)


def criteria_report(sys: LinearTippingSystem, r, t: Optional[float] = None) -> list[dict]:
    """Criterion records ``{criterion, value, threshold_R, verdict}`` for JSON export."""
    rn = float(np.linalg.norm(_vec(r)))
    out = [
        {"criterion": "avoid_steady", "value": _norm_inv(sys.M) * rn,
         "threshold_R": sys.R, "verdict": avoid_criterion_steady(sys, r)},
        {"criterion": "tip_steady", "value": rn / float(np.linalg.norm(sys.M, 2)),
         "threshold_R": sys.R, "verdict": tip_criterion_steady(sys, r)},
    ]
    if t is not None:
        env = decay_envelope(sys.M)
        val = env.c / env.beta * r_max(sys, t)
        out.append({"criterion": "avoid_general", "value": val,
                    "threshold_R": sys.R, "verdict": val < sys.R})
    return out
