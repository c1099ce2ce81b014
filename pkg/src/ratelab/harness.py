"""Named-system registry, critical-rate search, sweeps and config-driven runs."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy

from . import __version__, climate, hopf, saddle_node as sn, slowfast as sf
from ._backend import BACKEND
from .critical import CriticalRateResult, find_critical_rate
from .dynamics import DistanceFromPathExceeds, TimeGrid, Trajectory, integrate_ode
from .outcome import TIPS, TRACKS, Outcome


class ConfigInvalid(ValueError):
    """A config or parameter set is malformed; the message names the field."""


class UnknownSystem(KeyError):
    def __str__(self):
        return f"unknown system {self.args[0]!r}; known: {', '.join(sorted(SYSTEMS))}"


@dataclass
class RunResult:
    trajectory: Trajectory
    outcome: Outcome
    columns: Optional[tuple] = None
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SystemSpec:
    name: str
    defaults: dict
    simulate: Callable[[dict, int], RunResult]
    rate_param: Optional[str] = None
    classify: Optional[Callable[[dict, float], Outcome]] = None
    analytic: Optional[Callable[[dict], Optional[float]]] = None
    default_bracket: Optional[Callable[[dict], tuple]] = None
    outputs: dict = field(default_factory=dict)
    stochastic: bool = False


SYSTEMS: dict[str, SystemSpec] = {}


def register(spec: SystemSpec) -> SystemSpec:
    SYSTEMS[spec.name] = spec
    return spec


def get_system(name: str) -> SystemSpec:
    try:
        return SYSTEMS[name]
    except KeyError:
        raise UnknownSystem(name) from None


def resolve_params(spec: SystemSpec, params: Optional[dict]) -> dict:
    """Merge ``params`` over the defaults, rejecting unknown or non-numeric fields."""
    params = dict(params or {})
    out = dict(spec.defaults)
    for k, v in params.items():
        if k not in spec.defaults:
            raise ConfigInvalid(f"params.{k}: not a parameter of {spec.name} "
                                f"(expected one of {sorted(spec.defaults)})")
        d = spec.defaults[k]
        if isinstance(d, str):
            if not isinstance(v, str):
                raise ConfigInvalid(f"params.{k}: expected a string")
        elif v is None:
            if d is not None:
                raise ConfigInvalid(f"params.{k}: must not be null")
        elif isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigInvalid(f"params.{k}: expected a finite number, got {v!r}")
        out[k] = v
    return out


# ----------------------------------------------------------------------------
# saddle-node


def _sn_params(p, r=None):
    return sn.SaddleNodeParams(p["mu"], p["r"] if r is None else r, p["x0"], p["lambda0"])


def _sn_sim(p, seed):
    sp = _sn_params(p)
    horizon = p["horizon"] or 200.0 / math.sqrt(sp.mu)
    traj = integrate_ode(sn.sn_field(sp), [sp.x0, sp.lambda0], TimeGrid(0.0, horizon, p["dt"]),
                         record_every=int(p["record_every"]))
    out = sn.classify(sp, sp.r, dt=p["dt"], horizon=horizon)
    return RunResult(traj, out, ("t", "x", "lambda"))


def _sn_analytic(p):
    try:
        return sn.sn_critical_rate(_sn_params(p))
    except sn.InitialAboveSaddleBranch:
        return None


register(SystemSpec(
    "saddle_node",
    {"mu": 0.25, "r": 0.2, "x0": 0.0, "lambda0": 0.0, "dt": 0.005, "horizon": None,
     "record_every": 10},
    _sn_sim, "r",
    classify=lambda p, r: sn.classify(_sn_params(p), r, dt=p["dt"], horizon=p["horizon"]),
    analytic=_sn_analytic,
    default_bracket=lambda p: (0.2 * p["mu"], 2.0 * p["mu"]),
    outputs={"r_c": _sn_analytic,
             "effective_radius": lambda p: sn.sn_effective_radius(p["mu"])},
))


# ----------------------------------------------------------------------------
# Hopf


def _hs_sim(p, seed):
    x0 = hopf.steady_initial_state(p["omega"], p["r"], p["start"])
    f = hopf.hopf_field(hopf.HopfParams(p["omega"], hopf.SteadyDrift(p["r"])))
    traj = integrate_ode(f, x0, TimeGrid(0.0, p["horizon"], p["dt"]),
                         DistanceFromPathExceeds(p["escape_radius"]),
                         record_every=int(p["record_every"]))
    out = Outcome(TIPS, traj.final_time) if traj.stopped else Outcome(TRACKS)
    return RunResult(traj, out, ("t", "x", "y", "lambda"))


def _hs_classify(p, r):
    return hopf.classify_steady(p["omega"], r, start=p["start"], dt=p["dt"],
                                horizon=p["horizon"], escape_radius=p["escape_radius"])


register(SystemSpec(
    "hopf_steady",
    {"omega": 0.0, "r": 0.3, "start": "comoving_equilibrium", "dt": 0.01, "horizon": 3000.0,
     "escape_radius": 10.0, "record_every": 100},
    _hs_sim, "r", classify=_hs_classify,
    analytic=lambda p: hopf.hopf_critical_rate_steady(p["omega"]),
    default_bracket=lambda p: (0.5 * hopf.hopf_critical_rate_steady(p["omega"]),
                               1.5 * hopf.hopf_critical_rate_steady(p["omega"])),
    outputs={"r_c": lambda p: hopf.hopf_critical_rate_steady(p["omega"]),
             "branch": lambda p: hopf.critical_branch(p["omega"])},
))


def _shift_lambda_init(p, rho):
    if p["t0"] is None:
        return p["lambda_init"]
    return hopf.shift_path(rho, p["delta"], p["t0"], 0.0)[0]


def _hshift_classify(p, rho):
    return hopf.classify_shift(p["omega"], p["delta"], rho, p["x0"], p["y0"],
                               _shift_lambda_init(p, rho), dt=p["dt"], horizon=p["horizon"])


def _hshift_sim(p, seed):
    rho, delta = p["rho"], p["delta"]
    lam0 = _shift_lambda_init(p, rho)
    dt = p["dt"] or min(1e-3, 0.02 / (delta * rho))
    horizon = p["horizon"] or hopf.shift_horizon(rho, delta, lam0)
    f = hopf.hopf_field(hopf.HopfParams(p["omega"], hopf.ShiftDrift(rho, delta)))
    traj = integrate_ode(f, [p["x0"], p["y0"], lam0], TimeGrid(0.0, horizon, dt),
                         DistanceFromPathExceeds(1.0), record_every=int(p["record_every"]))
    out = Outcome(TIPS, traj.final_time) if traj.stopped else Outcome(TRACKS)
    return RunResult(traj, out, ("t", "x", "y", "lambda"))


register(SystemSpec(
    "hopf_shift",
    {"omega": hopf.FIG4_OMEGA, "delta": 8.0, "rho": 1.0, "t0": None, "x0": 0.4, "y0": 0.5,
     "lambda_init": 1e-4, "dt": None, "horizon": None, "record_every": 100},
    _hshift_sim, "rho", classify=_hshift_classify,
    default_bracket=lambda p: (0.05, 10.0),
))


# ----------------------------------------------------------------------------
# slow-fast


def _sf_p(p, rate=None, steady=True):
    N = p["N"]
    if float(N) != int(N):
        raise ConfigInvalid("params.N: must be an odd positive integer")
    if steady:
        drift = sf.Steady(p["r"] if rate is None else rate)
    else:
        drift = sf.Unsteady(p["rho"] if rate is None else rate, p["lambda0"], 0.0)
    return sf.SlowFastParams(p["epsilon"], int(N), drift)


def _sf_x0(p, steady):
    return (p["x1_0"], p["x2_0"]) if steady else (p["x1_0"], -p["lambda0"])


def _sf_sim(steady):
    def sim(p, seed):
        sp = _sf_p(p, steady=steady)
        x0 = _sf_x0(p, steady)
        lam0 = 0.0 if steady else p["lambda0"]
        dt = p["dt"] or sp.epsilon / 20.0
        traj = integrate_ode(sf.sf_field(sp), [x0[0], x0[1], lam0],
                             TimeGrid(0.0, p["horizon"], dt), record_every=int(p["record_every"]))
        out = sf.sf_classify(sp, x0, p["horizon"], dt=dt)
        return RunResult(traj, out, ("t", "x1", "x2", "lambda"))
    return sim


def _sf_classify(steady):
    def cl(p, rate):
        return sf.sf_classify(_sf_p(p, rate, steady), _sf_x0(p, steady), p["horizon"],
                              dt=p["dt"])
    return cl


register(SystemSpec(
    "slowfast_steady",
    {"epsilon": 0.01, "N": 1, "r": 0.4, "x1_0": 0.0, "x2_0": 0.0, "dt": None,
     "horizon": 100.0, "record_every": 20},
    _sf_sim(True), "r", classify=_sf_classify(True),
    analytic=lambda p: sf.sf_critical_rate_steady(int(p["N"])),
    default_bracket=lambda p: (0.6 * sf.sf_critical_rate_steady(int(p["N"])),
                               min(1.4 * sf.sf_critical_rate_steady(int(p["N"])), 1.2)),
    outputs={"r_c": lambda p: sf.sf_critical_rate_steady(int(p["N"]))},
))

register(SystemSpec(
    "slowfast_unsteady",
    {"epsilon": 0.01, "N": 1, "rho": 0.7, "lambda0": 0.0, "x1_0": 0.0, "dt": None,
     "horizon": 100.0, "record_every": 20},
    _sf_sim(False), "rho", classify=_sf_classify(False),
    analytic=lambda p: sf.sf_rho_c_approx(int(p["N"]), p["x1_0"], p["lambda0"]),
    default_bracket=lambda p: (0.4, 1.5),
    outputs={"rho_c_approx": lambda p: sf.sf_rho_c_approx(int(p["N"]), p["x1_0"], p["lambda0"]),
             "rho_c_singular": lambda p: sf.sf_rho_c_singular(int(p["N"]), p["x1_0"],
                                                              p["lambda0"])},
))


# ----------------------------------------------------------------------------
# energy balance model

_CONST_KEYS = ("I0", "sigma", "c", "e_SA", "time_scale")
_CONST_DEFAULTS = {k: getattr(climate.EBMConstants(), k) for k in _CONST_KEYS}


def _scenario_defaults(cls):
    s = cls()
    d = {k: getattr(s, k) for k, f in cls.__dataclass_fields__.items() if f.init}
    d.update(_CONST_DEFAULTS)
    d["record_every"] = 10
    return d


def _ebm_split(cls, p, **over):
    consts = climate.EBMConstants(**{k: p[k] for k in _CONST_KEYS})
    names = [k for k, f in cls.__dataclass_fields__.items() if f.init]
    try:
        s = cls(**{k: p[k] for k in names})
    except ValueError as exc:
        raise ConfigInvalid(f"params: {exc}") from None
    return replace(s, **over), consts


def _ebm_sim(cls):
    def sim(p, seed):
        s, consts = _ebm_split(cls, p)
        res = climate.run_scenario(s, consts, seed, record_every=int(p["record_every"]))
        return RunResult(res.trajectory, res.outcome, res.columns, res.info)
    return sim


def _ebm_R_classify(p, rho):
    s, consts = _ebm_split(climate.RShift, p, rho=rho)
    return climate.classify_shift(rho, consts, s)


def _ebm_static_outputs():
    def eq(p, i):
        s, consts = _ebm_split(climate.Static, p)
        e = climate.equilibria(consts, climate.AlbedoParams(s.a2, s.b2), s.mu)
        return None if e is None else e[i]

    def muc(p):
        s, consts = _ebm_split(climate.Static, p)
        return climate.mu_critical(consts, climate.AlbedoParams(s.a2, s.b2))

    def disc(p):
        s, consts = _ebm_split(climate.Static, p)
        return climate.discriminant(consts, climate.AlbedoParams(s.a2, s.b2), s.mu)
    return {"T_minus": lambda p: eq(p, 0), "T_plus": lambda p: eq(p, 1), "mu_c": muc,
            "discriminant": disc}


def _ebm_B_outputs():
    def run(p):
        s, consts = _ebm_split(climate.BRamp, p)
        return climate.run_scenario(s, consts, record_every=10 ** 9)

    def tip(p):
        r = run(p)
        return r.outcome.time if r.outcome.tips else None
    return {"tip_time": tip, "predicted_tip_time": lambda p: run(p).info["predicted_tip_time"]}


register(SystemSpec("ebm_R", _scenario_defaults(climate.RShift), _ebm_sim(climate.RShift),
                    "rho", classify=_ebm_R_classify, default_bracket=lambda p: (0.18, 0.19)))
register(SystemSpec("ebm_N", _scenario_defaults(climate.NNoise), _ebm_sim(climate.NNoise),
                    stochastic=True))
register(SystemSpec("ebm_B", _scenario_defaults(climate.BRamp), _ebm_sim(climate.BRamp),
                    outputs=_ebm_B_outputs()))
register(SystemSpec("ebm_static", _scenario_defaults(climate.Static),
                    _ebm_sim(climate.Static), outputs=_ebm_static_outputs()))


# ----------------------------------------------------------------------------
# operations


def critical_rate(system: str, params: Optional[dict] = None, bracket: Optional[Sequence] = None,
                  rel_tol: float = 1e-3) -> CriticalRateResult:
    """Bisection for the critical rate of a deterministic named system."""
    spec = get_system(system)
    if spec.stochastic or spec.classify is None:
        raise ConfigInvalid(f"system {system} has no critical rate (stochastic or rate-free)")
    p = resolve_params(spec, params)
    if bracket is None:
        bracket = spec.default_bracket(p)
    analytic = spec.analytic(p) if spec.analytic else None
    return find_critical_rate(lambda rate: spec.classify(p, rate), bracket, rel_tol, analytic)


@dataclass(frozen=True)
class SweepSpec:
    system: str
    parameter: str
    values: tuple
    fixed: dict = field(default_factory=dict)
    outputs: tuple = ()
    bracket: Optional[tuple] = None
    rel_tol: float = 1e-3

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if not vals:
            raise ConfigInvalid("values: sweep grid must be nonempty")
        d = np.diff(vals)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigInvalid("values: sweep grid must be strictly monotone")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        known = {"system", "parameter", "values", "fixed", "outputs", "bracket", "rel_tol"}
        extra = set(d) - known
        if extra:
            raise ConfigInvalid(f"{sorted(extra)[0]}: unknown sweep field")
        for k in ("system", "parameter", "values"):
            if k not in d:
                raise ConfigInvalid(f"{k}: required")
        if isinstance(d["values"], dict):
            g = d["values"]
            n = int(round((g["stop"] - g["start"]) / g["step"]))
            d = dict(d, values=[round(g["start"] + i * g["step"], 12) for i in range(n + 1)])
        return cls(d["system"], d["parameter"], tuple(d["values"]), dict(d.get("fixed", {})),
                   tuple(d.get("outputs", ())), tuple(d["bracket"]) if d.get("bracket") else None,
                   float(d.get("rel_tol", 1e-3)))


def available_outputs(spec: SystemSpec) -> list[str]:
    names = list(spec.outputs)
    if spec.classify is not None:
        names += ["critical_rate", "critical_rate_lo", "critical_rate_hi"]
    return names


def sweep(s: SweepSpec) -> tuple[list[str], list[list]]:
    """Table ``(header, rows)``; one row per grid value, one column per output.

    An empty outputs request yields a header-only table.
    """
    spec = get_system(s.system)
    if s.parameter not in spec.defaults:
        raise ConfigInvalid(f"parameter: {s.parameter!r} is not a parameter of {s.system}")
    valid = available_outputs(spec)
    for o in s.outputs:
        if o not in valid:
            raise ConfigInvalid(f"outputs: {o!r} not available for {s.system} "
                                f"(choose from {valid})")
    header = [s.parameter] + list(s.outputs)
    if not s.outputs:
        return header, []
    rows = []
    for v in s.values:
        p = resolve_params(spec, dict(s.fixed, **{s.parameter: v}))
        row = [v]
        crit = None
        for o in s.outputs:
            if o.startswith("critical_rate"):
                if crit is None:
                    crit = critical_rate(s.system, p, s.bracket, s.rel_tol)
                row.append({"critical_rate": crit.rate_mid, "critical_rate_lo": crit.rate_lo,
                            "critical_rate_hi": crit.rate_hi}[o])
            else:
                row.append(spec.outputs[o](p))
        rows.append(row)
    return header, rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_table(path, header, rows):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def diagram_rows(step: float = 0.01):
    return [["omega", "r_c", "branch_kind"]] + [list(r) for r in hopf.diagram_table(step=step)]


# ----------------------------------------------------------------------------
# config runs


def versions() -> dict:
    return {"ratelab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _json_dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def load_config(path) -> tuple[dict, bytes]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigInvalid(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config must be a JSON object")
    extra = set(cfg) - {"system", "params", "seed", "n", "workers", "description"}
    if extra:
        raise ConfigInvalid(f"{sorted(extra)[0]}: unknown config field")
    if "system" not in cfg:
        raise ConfigInvalid("system: required")
    if not isinstance(cfg.get("params", {}), dict):
        raise ConfigInvalid("params: must be an object")
    for k in ("seed", "n", "workers"):
        if k in cfg and (isinstance(cfg[k], bool) or not isinstance(cfg[k], int) or cfg[k] < 0):
            raise ConfigInvalid(f"{k}: must be a non-negative integer")
    return cfg, raw


def _manifest(cfg, raw, seed, outputs):
    return {"config_sha256": hashlib.sha256(raw).hexdigest(), "system": cfg["system"],
            "seed": seed, "versions": versions(), "backend": BACKEND,
            "outputs": sorted(outputs)}


def run_config(path, out) -> dict:
    """Simulate one config; writes ``trajectory.csv``, ``result.json`` and ``manifest.json``.

    For stochastic systems a config field ``n`` additionally runs an
    ``n``-member exit-time ensemble into ``exit_times.csv`` and the result.
    """
    cfg, raw = load_config(path)
    spec = get_system(cfg["system"])
    p = resolve_params(spec, cfg.get("params"))
    seed = int(cfg.get("seed", 0))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    res = spec.simulate(p, seed)
    written = ["trajectory.csv", "result.json", "manifest.json"]
    res.trajectory.to_csv(out / "trajectory.csv", columns=res.columns)
    if res.trajectory.stopped:
        written.append("trajectory.stop.json")
    result = {"system": spec.name, "params": p, "outcome": res.outcome.label,
              "tip_time": res.outcome.time, "detail": res.outcome.detail, "info": res.info}
    if spec.stochastic and cfg.get("n"):
        stats = _exit_stats(p, int(cfg["n"]), seed, int(cfg.get("workers", 1)))
        _write_exit_times(out / "exit_times.csv", stats)
        written.append("exit_times.csv")
        result["exit_report"] = _exit_summary(stats)
    _json_dump(result, out / "result.json")
    _json_dump(_manifest(cfg, raw, seed, written), out / "manifest.json")
    return result


def _exit_stats(p, n, seed, workers=1):
    s, consts = _ebm_split(climate.NNoise, p)
    T_init = s.T_init
    return climate.exit_time_stats(s.nu, n, T_init, s.horizon, seed, consts=consts,
                                   ap=climate.AlbedoParams(s.a2, s.b2), mu=s.mu, dt=s.dt,
                                   workers=workers)


def _exit_summary(stats):
    d = stats.to_dict()
    d.pop("times")
    return d


def _write_exit_times(path, stats):
    write_table(path, ["member", "exit_time_years"],
                [[i, t] for i, t in enumerate(stats.times)])


def run_ensemble_config(path, out, n: int, seed: int, workers: int = 1) -> dict:
    """Exit-time ensemble for a stochastic config; writes CSV, summary and manifest."""
    cfg, raw = load_config(path)
    spec = get_system(cfg["system"])
    if not spec.stochastic:
        raise ConfigInvalid(f"system: {spec.name} is deterministic; ensembles need a "
                            "stochastic system")
    if n < 1:
        raise ConfigInvalid("n: ensemble size must be at least 1")
    p = resolve_params(spec, cfg.get("params"))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stats = _exit_stats(p, n, seed, workers)
    _write_exit_times(out / "exit_times.csv", stats)
    summary = dict(_exit_summary(stats), system=spec.name, params=p, seed=seed)
    _json_dump(summary, out / "ensemble.json")
    _json_dump(_manifest(cfg, raw, seed, ["exit_times.csv", "ensemble.json", "manifest.json"]),
               out / "manifest.json")
    return summary


def export_figures(out, *, seed: int = 0) -> list[str]:
    """Reproduction data (CSV only) for the tipping diagram and the example trajectories."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    def save(name, system, **params):
        spec = get_system(system)
        res = spec.simulate(resolve_params(spec, params), seed)
        res.trajectory.to_csv(out / name, columns=res.columns)
        files.append(name)

    rows = diagram_rows()
    write_table(out / "fig2a_diagram.csv", rows[0], rows[1:])
    files.append("fig2a_diagram.csv")
    for r in (0.15, 0.3):
        save(f"fig3_saddle_node_r{r}.csv", "saddle_node", mu=0.25, r=r, horizon=20.0)
    for rho in (4.76, 4.8):
        save(f"fig4_hopf_shift_rho{rho}.csv", "hopf_shift", rho=rho)
    for r in (0.4, 0.6):
        save(f"fig5a_slowfast_r{r}.csv", "slowfast_steady", r=r, horizon=20.0)
    for rho in (0.7, 1.0):
        save(f"fig5b_slowfast_rho{rho}.csv", "slowfast_unsteady", rho=rho, horizon=20.0)
    save("fig6a_ebm_R_rho0.18.csv", "ebm_R", rho=0.18)
    save("fig6b_ebm_R_rho0.19.csv", "ebm_R", rho=0.19)
    save("fig6c_ebm_N.csv", "ebm_N")
    save("fig6d_ebm_B.csv", "ebm_B")
    return files
