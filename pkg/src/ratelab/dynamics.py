"""Fixed-step integration of nonautonomous ODEs and SDEs with tipping detection.

Deterministic runs use classical fourth-order Runge-Kutta; stochastic runs
use Euler-Maruyama with additive (or state-dependent) diffusion. Both check
stop conditions on the grid after every accepted step. A state whose norm
exceeds ``DIVERGENCE_THRESHOLD``, or that becomes non-finite, ends the run
with a ``Diverged`` event.

Gaussian increments
-------------------
The increment for ensemble member ``stream_index`` at step ``k`` is row ``k``
of::

    Generator(PCG64(SeedSequence(seed, spawn_key=(stream_index,))))
        .standard_normal((n_steps, dim))

so ``(seed, stream_index, k)`` determines it completely.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import _pycore
from ._backend import get_kernels

DIVERGENCE_THRESHOLD = 1e6


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    dt: float

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.t1) and math.isfinite(self.dt)):
            raise ValueError("time grid bounds must be finite")
        if self.t1 <= self.t0:
            raise ValueError("t1 must exceed t0")
        if self.dt <= 0 or self.dt > self.t1 - self.t0:
            raise ValueError("dt must lie in (0, t1 - t0]")

    @property
    def n_steps(self) -> int:
        q = (self.t1 - self.t0) / self.dt
        # tolerate representation error such as 1.1/0.1 = 11.000000000000002
        return max(1, math.ceil(q - 1e-9 * max(1.0, q)))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class Kernel:
    """Handle to a compiled right-hand side: system code plus parameter vector.

    ``noise`` is the constant per-component diffusion amplitude used by the
    compiled Euler-Maruyama loop.
    """

    code: int
    params: tuple
    noise: Optional[tuple] = None


@dataclass(frozen=True)
class VectorField:
    drift: Callable[[np.ndarray, float], np.ndarray]
    dimension: int
    diffusion: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kernel: Optional[Kernel] = None
    qse_distance: Optional[Callable[[np.ndarray, float], float]] = None
    names: Optional[tuple] = None

    def __call__(self, x, t):
        return np.asarray(self.drift(np.asarray(x, dtype=float), t), dtype=float)


def kernel_field(system: str, params, dimension: int, noise=None, names=None) -> VectorField:
    """Build a VectorField for one of the compiled built-in systems."""
    code = _pycore.SYSTEM_CODES[system]
    params = tuple(float(p) for p in params)
    rhs, post, qse = _pycore.make_rhs(code, params)

    def drift(x, t):
        return np.array(rhs(t, [float(v) for v in x]))

    def qse_distance(x, t):
        return qse(t, [float(v) for v in x])

    diffusion = None
    if noise is not None:
        g = np.asarray(noise, dtype=float)
        noise = tuple(float(v) for v in noise)

        def diffusion(x):
            return g

    return VectorField(drift, dimension, diffusion,
                       Kernel(code, params, noise), qse_distance, names)


# ----------------------------------------------------------------------------
# stop conditions


@dataclass(frozen=True)
class NormExceeds:
    threshold: float
    kind = "NormExceeds"

    def holds(self, x, t, field):
        return float(np.linalg.norm(x)) > self.threshold

    def coded(self):
        return (_pycore.STOP_NORM_GT, 0, self.threshold)


@dataclass(frozen=True)
class ComponentExceeds:
    index: int
    threshold: float
    kind = "ComponentExceeds"

    def holds(self, x, t, field):
        return x[self.index] > self.threshold

    def coded(self):
        return (_pycore.STOP_COMP_GT, self.index, self.threshold)


@dataclass(frozen=True)
class ComponentBelow:
    index: int
    threshold: float
    kind = "ComponentBelow"

    def holds(self, x, t, field):
        return x[self.index] < self.threshold

    def coded(self):
        return (_pycore.STOP_COMP_LT, self.index, self.threshold)


@dataclass(frozen=True)
class DistanceFromPathExceeds:
    """Distance from a moving reference point exceeds ``radius``.

    With ``path=None`` the field's own QSE distance is used (and the compiled
    kernel can evaluate it). Otherwise ``path(t)`` gives the reference point
    compared against ``components`` of the state.
    """

    radius: float
    path: Optional[Callable[[float], np.ndarray]] = None
    components: Optional[tuple] = None
    kind = "DistanceFromPathExceeds"

    def holds(self, x, t, field):
        if self.path is None:
            if field.qse_distance is None:
                raise ValueError("field has no QSE distance; supply a path")
            return field.qse_distance(x, t) > self.radius
        xs = x if self.components is None else x[list(self.components)]
        return float(np.linalg.norm(xs - np.asarray(self.path(t), dtype=float))) > self.radius

    def coded(self):
        if self.path is None:
            return (_pycore.STOP_QSE_GT, 0, self.radius)
        return None


@dataclass(frozen=True)
class Predicate:
    fn: Callable[[np.ndarray, float], bool]
    kind = "Predicate"

    def holds(self, x, t, field):
        return bool(self.fn(x, t))

    def coded(self):
        return None


# ----------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class StopEvent:
    time: float
    kind: str
    diverged: bool


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    stop_event: Optional[StopEvent] = None
    names: Optional[tuple] = dc_field(default=None, repr=False)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def diverged(self) -> bool:
        return self.stop_event is not None and self.stop_event.diverged

    @property
    def stopped(self) -> bool:
        return self.stop_event is not None

    def to_csv(self, path, columns: Optional[Sequence[str]] = None, sidecar: bool = True):
        """Write ``t,x1,...`` rows at 17 significant digits.

        When the run ended on a stop event and ``sidecar`` is set, a
        ``<stem>.stop.json`` file records ``{stop_time, stop_kind}``.
        """
        path = Path(path)
        d = self.states.shape[1]
        if columns is None:
            columns = ("t",) + (self.names or tuple(f"x{i + 1}" for i in range(d)))
        if len(columns) != d + 1:
            raise ValueError("need one column name per state component plus time")
        data = np.column_stack([self.times, self.states])
        with open(path, "w", newline="") as fh:
            fh.write(",".join(columns) + "\n")
            for row in data:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")
        if sidecar and self.stop_event is not None:
            side = path.with_name(path.stem + ".stop.json")
            side.write_text(json.dumps({"stop_time": self.stop_event.time,
                                        "stop_kind": self.stop_event.kind}))
        return path


def read_trajectory_csv(path) -> Trajectory:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    event = None
    side = path.with_name(path.stem + ".stop.json")
    if side.exists():
        meta = json.loads(side.read_text())
        event = StopEvent(meta["stop_time"], meta["stop_kind"], meta["stop_kind"] == "Diverged")
    return Trajectory(data[:, 0], data[:, 1:], event, tuple(header[1:]))


# ----------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RandomStream:
    seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(ss))

    def normals(self, n_steps: int, dim: int) -> np.ndarray:
        return self.generator().standard_normal((n_steps, dim))


# ----------------------------------------------------------------------------
# integration


def _stops(stop):
    if stop is None:
        return []
    if isinstance(stop, (list, tuple)):
        return list(stop)
    return [stop]


def _initial(field, x0):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (field.dimension,):
        raise ValueError(f"initial state must have dimension {field.dimension}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state must be finite")
    return x0


def _encode(field, stops):
    if field.kernel is None:
        return None
    coded = [s.coded() for s in stops]
    if any(c is None for c in coded):
        return None
    kinds = [c[0] for c in coded]
    idx = [c[1] for c in coded]
    thr = [float(c[2]) for c in coded]
    return kinds, idx, thr


def _generic_stops(field, stops):
    return [lambda t, x, s=s: s.holds(np.asarray(x), t, field) for s in stops]


def _generic_rhs(field):
    def rhs(t, x):
        return [float(v) for v in field.drift(np.asarray(x), t)]
    return rhs


def _wrap(out, stops, names):
    times, states, status, which = out
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states.reshape(len(times), -1)
    event = None
    if status == _pycore.DIVERGED:
        event = StopEvent(float(times[-1]), "Diverged", True)
    elif status == _pycore.STOPPED:
        event = StopEvent(float(times[-1]), stops[which].kind, False)
    return Trajectory(times, states, event, names)


def integrate_ode(field: VectorField, x0, grid: TimeGrid, stop=None, *, record_every: int = 1,
                  divergence_threshold: float = DIVERGENCE_THRESHOLD,
                  backend: Optional[str] = None) -> Trajectory:
    """Integrate ``dx/dt = drift(x, t)`` with fixed-step RK4.

    ``stop`` may be a single condition or a list; the run ends at the first
    grid time where any of them holds. Built-in fields run on the selected
    kernel backend; everything else (and any Python-callable stop condition)
    runs in the pure-Python loop.
    """
    x0 = _initial(field, x0)
    stops = _stops(stop)
    n = grid.n_steps
    enc = _encode(field, stops)
    if enc is not None:
        kernels = get_kernels(backend)
        out = kernels.rk4_run(field.kernel.code, field.kernel.params, x0, grid.t0, grid.dt, n,
                              *enc, record_every, divergence_threshold)
    else:
        out = _pycore.rk4_loop(_generic_rhs(field), x0, grid.t0, grid.dt, n,
                               _generic_stops(field, stops), record_every,
                               divergence_threshold)
    return _wrap(out, stops, field.names)


def integrate_sde(field: VectorField, x0, grid: TimeGrid, nu: float, rng: RandomStream,
                  stop=None, *, record_every: int = 1,
                  divergence_threshold: float = DIVERGENCE_THRESHOLD,
                  backend: Optional[str] = None) -> Trajectory:
    """Euler-Maruyama for ``dx = f dt + sqrt(nu) g(x) dW`` (``g`` defaults to 1).

    With ``nu = 0`` this is forward Euler, bit for bit.
    """
    if not math.isfinite(nu) or nu < 0:
        raise ValueError("nu must be finite and non-negative")
    x0 = _initial(field, x0)
    stops = _stops(stop)
    n = grid.n_steps
    amp = math.sqrt(nu * grid.dt)
    xi = rng.normals(n, field.dimension)
    enc = _encode(field, stops)
    if enc is not None and field.kernel.noise is not None:
        kernels = get_kernels(backend)
        out = kernels.em_run(field.kernel.code, field.kernel.params, x0, grid.t0, grid.dt, n,
                             amp, np.asarray(field.kernel.noise), xi, *enc, record_every,
                             divergence_threshold)
    else:
        g = field.diffusion if field.diffusion is not None else np.ones(field.dimension)
        out = _pycore.em_loop(_generic_rhs(field), x0, grid.t0, grid.dt, n, amp, g, xi,
                              _generic_stops(field, stops), record_every,
                              divergence_threshold)
    return _wrap(out, stops, field.names)


def run_ensemble(field: VectorField, x0, grid: TimeGrid, nu: float, base_seed: int, n: int,
                 stop=None, *, workers: int = 1, record_every: int = 1,
                 backend: Optional[str] = None) -> list:
    """Run ``n`` independent members; member ``i`` uses ``stream_index=i``.

    Members share no mutable state, so ``workers > 1`` runs them on a thread
    pool (the compiled kernels release the GIL). The result is always ordered
    by stream index.
    """
    if n < 1:
        raise ValueError("ensemble size must be at least 1")

    def member(i):
        return integrate_sde(field, x0, grid, nu, RandomStream(base_seed, i), stop,
                             record_every=record_every, backend=backend)

    if workers <= 1:
        return [member(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(member, range(n)))
