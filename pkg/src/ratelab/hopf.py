"""Subcritical Hopf normal form driven along the real axis.

    dz/dt = F(z - lambda),   F(w) = (-1 + i omega) w + |w|^2 w

The QSE is ``z = lambda`` and its basin is the unit disc around it, bounded
by the unstable periodic orbit ``|z - lambda| = 1``. With steady drift
``dlambda/dt = r`` the co-moving variable ``w = z - lambda`` obeys
``dw/dt = F(w) - r``; with the logistic shift the drift rate peaks at
``delta^2 rho / 4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .critical import CriticalRateResult, find_critical_rate
from .dynamics import (DistanceFromPathExceeds, TimeGrid, VectorField, integrate_ode,
                       kernel_field)
from .outcome import TIPS, TRACKS, Outcome

STABLE = "stable"
SADDLE_NODE_CRITICAL = "saddle-node-critical"
HOPF_CRITICAL = "hopf-critical"
UNSTABLE = "unstable"

FIG4_OMEGA = 5.0


class NoFold(ValueError):
    pass


class NotInHopfRegion(ValueError):
    pass


@dataclass(frozen=True)
class SteadyDrift:
    r: float


@dataclass(frozen=True)
class ShiftDrift:
    rho: float
    delta: float
    t0: float = 0.0

    def __post_init__(self):
        if not (self.rho > 0 and self.delta > 0):
            raise ValueError("rho and delta must be positive")


@dataclass(frozen=True)
class HopfParams:
    omega: float
    drift: Union[SteadyDrift, ShiftDrift]


@dataclass(frozen=True)
class CoMovingEquilibrium:
    w_mag: float
    theta: float
    stability: str

    @property
    def w(self) -> complex:
        return self.w_mag * complex(math.cos(self.theta), math.sin(self.theta))


def F(w, omega):
    w = np.asarray(w, dtype=complex)
    return (-1.0 + 1j * omega) * w + np.abs(w) ** 2 * w


def hopf_field(p: HopfParams) -> VectorField:
    """Real 3-D field in ``(x, y, lambda)``."""
    if isinstance(p.drift, SteadyDrift):
        return kernel_field("hopf_steady", (p.omega, p.drift.r), 3, names=("x", "y", "lambda"))
    return kernel_field("hopf_shift", (p.omega, p.drift.rho, p.drift.delta), 3,
                        names=("x", "y", "lambda"))


def comoving_field(omega: float, r: float) -> VectorField:
    """``dw/dt = F(w) - r`` in real coordinates."""
    def drift(u, t):
        v = F(complex(u[0], u[1]), omega) - r
        return np.array([v.real, v.imag])
    return VectorField(drift, 2, names=("wx", "wy"))


def equilibrium_cubic(m, r, omega):
    """Residual of ``m^3 - 2 m^2 + (omega^2 + 1) m - r^2`` with ``m = |w|^2``."""
    return m ** 3 - 2.0 * m ** 2 + (omega ** 2 + 1.0) * m - r ** 2


def _bisect(f, a, b, tol=1e-15):
    fa = f(a)
    for _ in range(200):
        c = 0.5 * (a + b)
        fc = f(c)
        if fc == 0.0 or (b - a) < tol * max(1.0, abs(c)):
            return c
        if (fa < 0) == (fc < 0):
            a, fa = c, fc
        else:
            b = c
    return 0.5 * (a + b)


def _cubic_roots(r, omega):
    g = lambda m: equilibrium_cubic(m, r, omega)
    top = max(4.0, abs(r) ** (2.0 / 3.0) + 3.0)
    # split [0, top] at the turning points so each piece is monotone
    knots = [0.0, top]
    disc = 16.0 - 12.0 * (omega ** 2 + 1.0)
    if disc >= 0:
        for s in ((4.0 - math.sqrt(disc)) / 6.0, (4.0 + math.sqrt(disc)) / 6.0):
            if 0.0 < s < top:
                knots.append(s)
    knots.sort()
    roots = []
    scale = 1.0 + r * r
    for a, b in zip(knots[:-1], knots[1:]):
        ga, gb = g(a), g(b)
        if ga == 0.0:
            roots.append(a)
        elif (ga < 0) != (gb < 0):
            roots.append(_bisect(g, a, b))
    for s in knots[1:-1]:
        # tangential (double) roots do not change sign
        if abs(g(s)) < 1e-13 * scale:
            roots.append(s)
    if abs(g(top)) == 0.0:
        roots.append(top)
    roots = sorted(roots)
    out = []
    for m in roots:
        if not out or abs(m - out[-1]) > 1e-9:
            out.append(m)
    return out


def characteristic_coefficients(w_mag: float, omega: float) -> tuple[float, float]:
    """``(b, c)`` of ``s^2 + b s + c`` linearised at a co-moving equilibrium."""
    m = w_mag * w_mag
    return 2.0 - 4.0 * m, omega ** 2 + (m - 1.0) * (3.0 * m - 1.0)


def equilibrium_stability(w_mag: float, omega: float, tol: float = 1e-12) -> str:
    b, c = characteristic_coefficients(w_mag, omega)
    if c < -tol or b < -tol:
        return UNSTABLE
    if abs(c) <= tol:
        return SADDLE_NODE_CRITICAL
    if abs(b) <= tol:
        return HOPF_CRITICAL
    return STABLE


def comoving_equilibria(r: float, omega: float) -> list[CoMovingEquilibrium]:
    """Equilibria of ``dw/dt = F(w) - r`` sorted by ``|w|``."""
    eqs = []
    for m in _cubic_roots(r, omega):
        mag = math.sqrt(max(m, 0.0))
        if r == 0.0 or mag == 0.0:
            theta = 0.0
        else:
            w = r / complex(m - 1.0, omega)
            theta = math.atan2(w.imag, w.real)
        eqs.append(CoMovingEquilibrium(mag, theta, equilibrium_stability(mag, omega)))
    return eqs


def sn_curve_branches(omega: float) -> tuple[float, float]:
    """``(|w|^2_-, |w|^2_+)`` on the saddle-node curve; requires ``omega^2 <= 1/3``."""
    disc = 1.0 - 0.75 * (1.0 + omega * omega)
    if disc < -1e-15:
        raise NoFold(f"no fold for omega={omega:g} (omega^2 > 1/3)")
    s = math.sqrt(max(disc, 0.0))
    return 2.0 / 3.0 * (1.0 - s), 2.0 / 3.0 * (1.0 + s)


def sn_rate(m: float, omega: float) -> float:
    return math.sqrt(m ** 3 - 2.0 * m ** 2 + (omega ** 2 + 1.0) * m)


def hopf_curve(omega: float) -> float:
    if not omega * omega > 0.25:
        raise NotInHopfRegion(f"omega={omega:g} has no Hopf point (needs omega^2 > 1/4)")
    return math.sqrt((1.0 + 4.0 * omega * omega) / 8.0)


def cusp_point() -> tuple[float, float]:
    """Positive cusp of the saddle-node curve in ``(r, omega)``."""
    m = sn_curve_branches(math.sqrt(1.0 / 3.0))[0]
    return sn_rate(m, math.sqrt(1.0 / 3.0)), math.sqrt(1.0 / 3.0)


def bt_point() -> tuple[float, float]:
    """Positive Bogdanov-Takens point where the Hopf curve meets the saddle-node curve."""
    return 0.5, 0.5


def hopf_critical_rate_steady(omega: float) -> float:
    """Critical steady drift rate: saddle-node branch for ``omega^2 <= 1/4``, Hopf beyond."""
    if omega * omega <= 0.25:
        return sn_rate(sn_curve_branches(omega)[0], omega)
    return hopf_curve(omega)


def critical_branch(omega: float) -> str:
    return "saddle-node" if omega * omega <= 0.25 else "hopf"


def diagram_table(omega_min=-1.2, omega_max=1.2, step=0.01) -> list[tuple]:
    """Rows ``(omega, r_c, branch_kind)`` of the two-parameter tipping diagram."""
    n = int(round((omega_max - omega_min) / step))
    rows = []
    for k in range(n + 1):
        om = round(omega_min + k * step, 12)
        rows.append((om, hopf_critical_rate_steady(om), critical_branch(om)))
    return rows


def shift_path(rho: float, delta: float, t0: float, t):
    """Logistic shift ``lambda(t)`` from 0 to ``delta`` and its rate."""
    t = np.asarray(t, dtype=float)
    th = np.tanh(delta * rho * (t - t0) / 2.0)
    lam = delta * (th + 1.0) / 2.0
    rate = delta * delta * rho / 4.0 * (1.0 - th * th)
    if lam.ndim == 0:
        return float(lam), float(rate)
    return lam, rate


def shift_time(rho: float, delta: float, t0: float, lam: float) -> float:
    """Inverse of ``shift_path``: the time at which ``lambda`` takes value ``lam``."""
    if not 0.0 < lam < delta:
        raise ValueError("lambda must lie strictly between 0 and delta")
    return t0 + math.log(lam / (delta - lam)) / (delta * rho)


# ----------------------------------------------------------------------------
# simulation-based classification


def steady_initial_state(omega: float, r: float, start: str = "comoving_equilibrium",
                         perturbation: float = 1e-3):
    """Initial ``(x, y, lambda)`` for a steady-drift run with ``lambda(0) = 0``.

    ``start="qse"`` places the state on the QSE. The default starts at the
    tracking (smallest) co-moving equilibrium nudged by ``perturbation``
    in both components, or at the QSE when no equilibrium exists.
    """
    if start == "qse":
        return np.array([0.0, 0.0, 0.0])
    if start != "comoving_equilibrium":
        raise ValueError(f"unknown start {start!r}")
    eqs = comoving_equilibria(r, omega)
    w = eqs[0].w if eqs else 0j
    return np.array([w.real + perturbation, w.imag + perturbation, 0.0])


def classify_steady(omega: float, r: float, *, start: str = "comoving_equilibrium",
                    dt: float = 0.01, horizon: float = 3000.0, escape_radius: float = 10.0,
                    backend=None) -> Outcome:
    x0 = steady_initial_state(omega, r, start)
    field = hopf_field(HopfParams(omega, SteadyDrift(r)))
    traj = integrate_ode(field, x0, TimeGrid(0.0, horizon, dt),
                         DistanceFromPathExceeds(escape_radius), record_every=1000,
                         backend=backend)
    if traj.stopped:
        return Outcome(TIPS, traj.final_time)
    return Outcome(TRACKS)


def empirical_steady_rate(omega: float, bracket=None, rel_tol: float = 1e-3,
                          **kw) -> CriticalRateResult:
    analytic = hopf_critical_rate_steady(omega)
    if bracket is None:
        bracket = (0.5 * analytic, 1.5 * analytic)
    return find_critical_rate(lambda r: classify_steady(omega, r, **kw), bracket, rel_tol,
                              analytic)


def shift_horizon(rho: float, delta: float, lambda_init: float) -> float:
    t_mid = math.log((delta - lambda_init) / lambda_init) / (delta * rho)
    return 2.0 * t_mid + 50.0 / (delta * rho) + 10.0


def classify_shift(omega: float, delta: float, rho: float, x0: float, y0: float,
                   lambda_init: float, *, dt: Optional[float] = None,
                   horizon: Optional[float] = None, backend=None) -> Outcome:
    """Tips once ``|z - lambda| >= 1`` (the basin boundary) or on divergence."""
    if np.hypot(x0 - lambda_init, y0) >= 1.0:
        raise ValueError("initial state must lie inside the QSE basin")
    if dt is None:
        dt = min(1e-3, 0.02 / (delta * rho))
    if horizon is None:
        horizon = shift_horizon(rho, delta, lambda_init)
    field = hopf_field(HopfParams(omega, ShiftDrift(rho, delta)))
    traj = integrate_ode(field, [x0, y0, lambda_init], TimeGrid(0.0, horizon, dt),
                         DistanceFromPathExceeds(1.0), record_every=1000, backend=backend)
    if traj.stopped:
        return Outcome(TIPS, traj.final_time)
    return Outcome(TRACKS)


def hopf_empirical_rho_c(delta: float, x0: float, y0: float, lambda_init: float,
                         bracket, omega: float = FIG4_OMEGA, rel_tol: float = 1e-3,
                         analytic: Optional[float] = None, **kw) -> CriticalRateResult:
    return find_critical_rate(
        lambda rho: classify_shift(omega, delta, rho, x0, y0, lambda_init, **kw),
        bracket, rel_tol, analytic)
