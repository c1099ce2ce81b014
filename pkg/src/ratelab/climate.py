"""Zero-dimensional energy-balance model with ice-albedo feedback.

    c dT/dt = R_down - R_up,  R_down = mu I0 (1 - alpha(T)) / 4,  R_up = e sigma T^4
    alpha(T) = a2 - b2 T^2

Time is measured in years: the per-second tendency is multiplied by
``SECONDS_PER_YEAR`` and a global ``time_scale`` knob (default 1).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .critical import CriticalRateResult, find_critical_rate
from .dynamics import (ComponentBelow, TimeGrid, Trajectory, VectorField, integrate_ode,
                       integrate_sde, kernel_field, run_ensemble, RandomStream)
from .outcome import TIPS, TRACKS, UNDECIDED, Outcome

SECONDS_PER_YEAR = 3.15569e7
ICE_TEMPERATURE = 200.0


@dataclass(frozen=True)
class EBMConstants:
    I0: float = 1366.0
    sigma: float = 5.6704e-8
    c: float = 1e8
    e_SA: float = 0.62
    time_scale: float = 1.0

    def __post_init__(self):
        for k in ("I0", "sigma", "c", "e_SA", "time_scale"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")

    @property
    def k(self) -> float:
        """Seconds-to-model-time factor."""
        return self.time_scale * SECONDS_PER_YEAR


@dataclass(frozen=True)
class AlbedoParams:
    a2: float = 1.6927
    b2: float = 1.690e-5

    def __post_init__(self):
        if not self.a2 > 1:
            raise ValueError("a2 must exceed 1")


@dataclass(frozen=True)
class DerivedGroups:
    a: float
    b_mu: float
    d_mu: float

    @property
    def discriminant(self) -> float:
        return self.b_mu ** 2 - 4.0 * self.d_mu


def derived_groups(consts: EBMConstants, ap: AlbedoParams, mu: float) -> DerivedGroups:
    es = consts.e_SA * consts.sigma
    return DerivedGroups(es / consts.c,
                         mu * consts.I0 * ap.b2 / (4.0 * es),
                         -mu * consts.I0 * (1.0 - ap.a2) / (4.0 * es))


def albedo(ap: AlbedoParams, T):
    return ap.a2 - ap.b2 * np.asarray(T, dtype=float) ** 2


def radiation_terms(consts: EBMConstants, ap: AlbedoParams, mu: float, T):
    T = np.asarray(T, dtype=float)
    down = 0.25 * mu * consts.I0 * (1.0 - albedo(ap, T))
    up = consts.e_SA * consts.sigma * T ** 4
    return down, up


def ebm_tendency_flux(consts: EBMConstants, ap: AlbedoParams, mu: float, T):
    """``(R_down - R_up) / c`` in model time units."""
    down, up = radiation_terms(consts, ap, mu, T)
    return consts.k * (down - up) / consts.c


def ebm_tendency_quartic(consts: EBMConstants, ap: AlbedoParams, mu: float, T):
    """``a (-T^4 + b_mu T^2 - d_mu)`` in model time units."""
    g = derived_groups(consts, ap, mu)
    T = np.asarray(T, dtype=float)
    T2 = T * T
    return consts.k * g.a * (-T2 * T2 + g.b_mu * T2 - g.d_mu)


def _kernel_params(consts, ap, mu, rho=0.0, b2_init=0.0, b2_final=0.0, disc=0.0, mu_rate=0.0):
    return (consts.k, consts.I0, consts.sigma, consts.c, consts.e_SA, mu, ap.a2, ap.b2,
            rho, b2_init, b2_final, disc, mu_rate)


def ebm_field(consts: EBMConstants, ap: AlbedoParams, mu: float, nu: float = 0.0) -> VectorField:
    """Scalar field ``f(T)``; with ``nu > 0`` it carries unit additive noise."""
    return kernel_field("ebm_static", _kernel_params(consts, ap, mu), 1,
                        noise=(1.0,) if nu > 0 else None, names=("T",))


def equilibria(consts: EBMConstants, ap: AlbedoParams, mu: float):
    """``(T_minus, T_plus)`` or ``None`` once the discriminant is negative."""
    g = derived_groups(consts, ap, mu)
    disc = g.discriminant
    if disc < 0:
        return None
    s = math.sqrt(disc)
    lo, hi = (g.b_mu - s) / 2.0, (g.b_mu + s) / 2.0
    if lo <= 0:
        return None
    return math.sqrt(lo), math.sqrt(hi)


def mu_critical(consts: EBMConstants, ap: AlbedoParams) -> float:
    """Fold value ``4 d_1 / b_1^2``; the groups are linear in ``mu``."""
    g = derived_groups(consts, ap, 1.0)
    return 4.0 * g.d_mu / g.b_mu ** 2


def discriminant(consts: EBMConstants, ap: AlbedoParams, mu: float) -> float:
    return derived_groups(consts, ap, mu).discriminant


# ----------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class RShift:
    """Smooth albedo change at constant discriminant, ``dlambda/dt = rho lambda (1 - lambda)``.

    ``horizon=None`` picks ``max(500, 2 ln((1 - l0)/l0) / rho + 100)`` years,
    long enough for ``lambda`` to complete its passage at any rate.
    """

    rho: float = 0.18
    mu: float = 1.0
    b2_init: float = 1.690e-5
    b2_final: float = 1.8350e-5
    a2_init: float = 1.6927
    lambda_init: float = 1e-6
    T_init: float = 290.0
    horizon: Optional[float] = None
    dt: float = 0.05
    kind: str = field(default="R_shift", init=False)

    def __post_init__(self):
        if not (self.rho > 0 and 0 < self.lambda_init < 1):
            raise ValueError("need rho > 0 and 0 < lambda_init < 1")

    @property
    def run_horizon(self) -> float:
        if self.horizon is not None:
            return self.horizon
        l0 = self.lambda_init
        return max(500.0, 2.0 * math.log((1.0 - l0) / l0) / self.rho + 100.0)


@dataclass(frozen=True)
class NNoise:
    nu: float = 1.0
    mu: float = 1.0
    a2: float = 1.6927
    b2: float = 1.690e-5
    T_init: Optional[float] = None
    horizon: float = 2000.0
    dt: float = 0.1
    kind: str = field(default="N_noise", init=False)

    def __post_init__(self):
        if not (math.isfinite(self.nu) and self.nu >= 0):
            raise ValueError("nu must be finite and non-negative")


@dataclass(frozen=True)
class BRamp:
    mu_rate: float = -0.0004
    mu_init: float = 1.0
    a2: float = 1.2
    b2: float = 1.04e-5
    mu_stop: float = 0.5
    T_init: Optional[float] = None
    dt: float = 0.1
    kind: str = field(default="B_ramp", init=False)

    def __post_init__(self):
        if not self.mu_rate < 0 or not self.mu_stop < self.mu_init:
            raise ValueError("B_ramp needs a decreasing mu")

    @property
    def horizon(self) -> float:
        return (self.mu_stop - self.mu_init) / self.mu_rate


@dataclass(frozen=True)
class Static:
    mu: float = 1.0
    a2: float = 1.6927
    b2: float = 1.690e-5
    T_init: Optional[float] = None
    horizon: float = 500.0
    dt: float = 0.1
    kind: str = field(default="Static", init=False)


EBMScenario = Union[RShift, NNoise, BRamp, Static]
SCENARIO_TYPES = {c.__dataclass_fields__["kind"].default: c for c in (RShift, NNoise, BRamp, Static)}


def scenario_to_dict(s: EBMScenario) -> dict:
    return asdict(s)


def scenario_from_dict(d: dict) -> EBMScenario:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in SCENARIO_TYPES:
        raise ValueError(f"unknown scenario kind {kind!r}")
    cls = SCENARIO_TYPES[kind]
    names = {k for k, f in cls.__dataclass_fields__.items() if f.init}
    extra = set(d) - names
    if extra:
        raise ValueError(f"unknown field(s) for {kind}: {sorted(extra)}")
    return cls(**d)


def table2(label: str) -> EBMScenario:
    """Scenario defaults for panels 'a', 'b', 'c', 'd'."""
    return {"a": RShift(rho=0.18), "b": RShift(rho=0.19), "c": NNoise(), "d": BRamp()}[label]


def shift_discriminant(consts: EBMConstants, s: RShift) -> float:
    return discriminant(consts, AlbedoParams(s.a2_init, s.b2_init), s.mu)


def scenario_R_path(consts: EBMConstants, s: RShift, lam):
    """``(b2, a2, dlambda/dt)`` at ``lambda`` with the discriminant held fixed."""
    lam = np.asarray(lam, dtype=float)
    D = shift_discriminant(consts, s)
    es = consts.e_SA * consts.sigma
    b2 = (1.0 - lam) * s.b2_init + lam * s.b2_final
    bb = s.mu * consts.I0 * b2 / (4.0 * es)
    a2 = 1.0 + (bb * bb - D) * es / (s.mu * consts.I0)
    rate = s.rho * lam * (1.0 - lam)
    if lam.ndim == 0:
        return float(b2), float(a2), float(rate)
    return b2, a2, rate


def scenario_field(consts: EBMConstants, s: EBMScenario) -> VectorField:
    if isinstance(s, RShift):
        D = shift_discriminant(consts, s)
        par = _kernel_params(consts, AlbedoParams(s.a2_init, s.b2_init), s.mu, s.rho,
                             s.b2_init, s.b2_final, D)
        return kernel_field("ebm_shift", par, 2, names=("T", "lambda"))
    if isinstance(s, BRamp):
        par = _kernel_params(consts, AlbedoParams(s.a2, s.b2), s.mu_init, mu_rate=s.mu_rate)
        return kernel_field("ebm_ramp", par, 1, names=("T",))
    return ebm_field(consts, AlbedoParams(s.a2, s.b2), s.mu,
                     nu=s.nu if isinstance(s, NNoise) else 0.0)


def _initial_T(consts, s):
    if s.T_init is not None:
        return s.T_init
    mu = s.mu_init if isinstance(s, BRamp) else s.mu
    eq = equilibria(consts, AlbedoParams(s.a2, s.b2), mu)
    if eq is None:
        raise ValueError("no equilibrium to start from")
    return eq[1]


@dataclass
class ScenarioResult:
    scenario: EBMScenario
    trajectory: Trajectory
    outcome: Outcome
    columns: tuple
    info: dict

    def to_csv(self, path):
        return self.trajectory.to_csv(path, columns=self.columns)


def run_scenario(s: EBMScenario, consts: EBMConstants = EBMConstants(), seed: int = 0, *,
                 record_every: int = 10, backend=None) -> ScenarioResult:
    """Run one scenario and classify it.

    R_shift tips on divergence or ``T < 200 K`` and tracks when it ends
    within 1 K of the final stable equilibrium. N_noise tips on first
    passage below ``T-``. B_ramp tips on ``T < 200 K`` (or divergence) and
    stops when ``mu`` reaches ``mu_stop``.
    """
    fld = scenario_field(consts, s)
    T0 = _initial_T(consts, s)
    cold = ComponentBelow(0, ICE_TEMPERATURE)
    info = {}
    if isinstance(s, RShift):
        traj = integrate_ode(fld, [T0, s.lambda_init], TimeGrid(0.0, s.run_horizon, s.dt), cold,
                             record_every=record_every, backend=backend)
        b2f, a2f, _ = scenario_R_path(consts, s, 1.0)
        Tp = equilibria(consts, AlbedoParams(a2f, b2f), s.mu)[1]
        info.update(T_plus_final=Tp, a2_final=a2f)
        if traj.stopped:
            out = Outcome(TIPS, traj.final_time)
        elif abs(traj.final_state[0] - Tp) < 1.0:
            out = Outcome(TRACKS)
        else:
            out = Outcome(UNDECIDED, detail=f"T={traj.final_state[0]:g} K at horizon")
        return ScenarioResult(s, traj, out, ("t_years", "T_kelvin", "lambda"), info)

    if isinstance(s, BRamp):
        traj = integrate_ode(fld, [T0], TimeGrid(0.0, s.horizon, s.dt), cold,
                             record_every=record_every, backend=backend)
        mu = s.mu_init + s.mu_rate * traj.times
        traj = Trajectory(traj.times, np.column_stack([traj.states, mu]), traj.stop_event,
                          ("T", "mu"))
        mu_c = mu_critical(consts, AlbedoParams(s.a2, s.b2))
        info.update(mu_c=mu_c, predicted_tip_time=(mu_c - s.mu_init) / s.mu_rate)
        out = Outcome(TIPS, traj.final_time) if traj.stopped else Outcome(TRACKS)
        return ScenarioResult(s, traj, out, ("t_years", "T_kelvin", "mu"), info)

    grid = TimeGrid(0.0, s.horizon, s.dt)
    if isinstance(s, NNoise):
        Tm = equilibria(consts, AlbedoParams(s.a2, s.b2), s.mu)[0]
        info.update(T_minus=Tm, seed=seed)
        traj = integrate_sde(fld, [T0], grid, s.nu, RandomStream(seed, 0), ComponentBelow(0, Tm),
                             record_every=record_every, backend=backend)
    else:
        traj = integrate_ode(fld, [T0], grid, cold, record_every=record_every, backend=backend)
    out = Outcome(TIPS, traj.final_time) if traj.stopped else Outcome(TRACKS)
    return ScenarioResult(s, traj, out, ("t_years", "T_kelvin"), info)


def classify_shift(rho: float, consts: EBMConstants = EBMConstants(), base: RShift = RShift(),
                   backend=None) -> Outcome:
    return run_scenario(replace(base, rho=rho), consts, record_every=1000,
                        backend=backend).outcome


def ebm_empirical_rho_c(bracket=(0.18, 0.19), rel_tol: float = 1e-3,
                        consts: EBMConstants = EBMConstants(), base: RShift = RShift(),
                        analytic: Optional[float] = None) -> CriticalRateResult:
    """Bisection on ``rho`` for the R_shift scenario (deterministic, no seed)."""
    return find_critical_rate(lambda rho: classify_shift(rho, consts, base), bracket, rel_tol,
                              analytic)


@dataclass
class ExitTimeStats:
    nu: float
    n: int
    horizon: float
    times: list
    mean: Optional[float]
    restricted_mean: float
    fraction_tipped: float

    def to_dict(self):
        return asdict(self)


def exit_time_stats(nu: float, n: int, T_init: Optional[float] = None, horizon: float = 2000.0,
                    base_seed: int = 0, *, consts: EBMConstants = EBMConstants(),
                    ap: AlbedoParams = AlbedoParams(), mu: float = 1.0, dt: float = 0.1,
                    workers: int = 1, backend=None) -> ExitTimeStats:
    """First-passage times below ``T-`` for ``n`` members started at ``T_init`` (default ``T+``).

    ``times`` holds ``None`` for members that never exit. ``mean`` averages
    the exits only; ``restricted_mean`` counts non-exits at the horizon.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    Tm, Tp = equilibria(consts, ap, mu)
    T0 = Tp if T_init is None else T_init
    fld = ebm_field(consts, ap, mu, nu=1.0)
    runs = run_ensemble(fld, [T0], TimeGrid(0.0, horizon, dt), nu, base_seed, n,
                        ComponentBelow(0, Tm), workers=workers, record_every=10 ** 9,
                        backend=backend)
    times = [r.final_time if r.stopped else None for r in runs]
    hits = [t for t in times if t is not None]
    restricted = float(np.mean([horizon if t is None else t for t in times]))
    return ExitTimeStats(nu, n, horizon, times, float(np.mean(hits)) if hits else None,
                         restricted, len(hits) / n)
