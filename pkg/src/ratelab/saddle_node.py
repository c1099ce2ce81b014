"""Saddle-node normal form with a steadily drifting parameter.

    dx/dt = (x + lambda)^2 - mu,    dlambda/dt = r

The stable QSE is the line ``lambda = -sqrt(mu) - x`` and the saddle QSE is
``lambda = sqrt(mu) - x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .critical import CriticalRateResult, find_critical_rate
from .dynamics import TimeGrid, VectorField, integrate_ode, kernel_field
from .outcome import TIPS, TRACKS, UNDECIDED, Outcome


class InitialAboveSaddleBranch(ValueError):
    pass


@dataclass(frozen=True)
class SaddleNodeParams:
    mu: float
    r: float = 0.0
    x0: float = 0.0
    lambda0: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")


@dataclass(frozen=True)
class InvariantLine:
    """The line ``lambda = intercept - x``."""

    intercept: float
    stable: Optional[bool]

    def lam(self, x):
        return self.intercept - np.asarray(x)

    def offset(self, x, lam):
        return x + lam - self.intercept


def sn_field(p: SaddleNodeParams) -> VectorField:
    return kernel_field("saddle_node", (p.mu, p.r), 2, names=("x", "lambda"))


def invariant_lines(mu: float, r: float):
    """Attracting line A and repelling line B, or ``None`` once ``r > mu``.

    At ``r == mu`` both are the single neutral line ``lambda = -x``.
    """
    if r > mu:
        return None
    s = math.sqrt(mu - r)
    if s == 0.0:
        line = InvariantLine(0.0, None)
        return line, line
    return InvariantLine(-s, True), InvariantLine(s, False)


def sn_critical_rate(p: SaddleNodeParams) -> float:
    """Exact critical rate for an initial condition on the basin side of the saddle."""
    y0 = p.x0 + p.lambda0
    if y0 >= math.sqrt(p.mu):
        raise InitialAboveSaddleBranch("initial condition is on or above the saddle QSE")
    if y0 <= 0.0:
        return p.mu
    return p.mu - y0 * y0


def sn_effective_radius(mu: float) -> float:
    if not mu > 0:
        raise ValueError("mu must be positive")
    return math.sqrt(mu) / 2.0


def linearisation(mu: float) -> float:
    """Linear rate at the stable QSE, ``M = -2 sqrt(mu)``."""
    return -2.0 * math.sqrt(mu)


def comoving_rate(y, mu: float, r: float):
    """Right-hand side in the co-moving coordinate ``y = x + lambda``."""
    return np.asarray(y) ** 2 - mu + r


def classify(p: SaddleNodeParams, r: float, *, dt: float = 0.005,
             horizon: Optional[float] = None, backend=None) -> Outcome:
    """Tips = divergence; tracks = never more than ``10 sqrt(mu)`` from the stable QSE."""
    smu = math.sqrt(p.mu)
    if horizon is None:
        horizon = 200.0 / smu
    field = sn_field(SaddleNodeParams(p.mu, r, p.x0, p.lambda0))
    traj = integrate_ode(field, [p.x0, p.lambda0], TimeGrid(0.0, horizon, dt),
                         record_every=10, backend=backend)
    if traj.diverged:
        return Outcome(TIPS, traj.final_time)
    dist = np.abs(traj.states[:, 0] + traj.states[:, 1] + smu)
    if dist.max() <= 10.0 * smu:
        return Outcome(TRACKS)
    return Outcome(UNDECIDED, detail=f"max QSE distance {dist.max():g} without divergence")


def empirical_critical_rate(p: SaddleNodeParams, bracket=None, rel_tol: float = 1e-3,
                            **kw) -> CriticalRateResult:
    try:
        analytic = sn_critical_rate(p)
    except InitialAboveSaddleBranch:
        analytic = None
    if bracket is None:
        bracket = (0.2 * p.mu, 2.0 * p.mu)
    return find_critical_rate(lambda r: classify(p, r, **kw), bracket, rel_tol, analytic)
