"""Rate-induced, bifurcation-induced and noise-induced tipping toolkit."""

__version__ = "0.1.0"

from ._backend import BACKEND, compiled_available
from .critical import (BracketInvalid, ClassificationError, CriticalRateResult, NonMonotone,
                       UndecidedClassification, find_critical_rate)
from .dynamics import (ComponentBelow, ComponentExceeds, DistanceFromPathExceeds, NormExceeds,
                       Predicate, RandomStream, StopEvent, TimeGrid, Trajectory, VectorField,
                       integrate_ode, integrate_sde, read_trajectory_csv, run_ensemble)
from .outcome import TIPS, TRACKS, UNDECIDED, Outcome

__all__ = [
    "__version__", "BACKEND", "compiled_available",
    "BracketInvalid", "ClassificationError", "CriticalRateResult", "NonMonotone",
    "UndecidedClassification", "find_critical_rate",
    "ComponentBelow", "ComponentExceeds", "DistanceFromPathExceeds", "NormExceeds", "Predicate",
    "RandomStream", "StopEvent", "TimeGrid", "Trajectory", "VectorField", "integrate_ode",
    "integrate_sde", "read_trajectory_csv", "run_ensemble",
    "TIPS", "TRACKS", "UNDECIDED", "Outcome",
]
