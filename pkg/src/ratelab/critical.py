"""Bisection for the critical rate separating tracking from tipping."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Callable, Optional, Sequence

from .outcome import TIPS, TRACKS, Outcome


class ClassificationError(RuntimeError):
    """Bisection could not proceed; carries the offending rate."""

    def __init__(self, message, rate=None):
        super().__init__(message)
        self.rate = rate


class BracketInvalid(ClassificationError):
    pass


class NonMonotone(ClassificationError):
    pass


class UndecidedClassification(ClassificationError):
    pass


@dataclass
class CriticalRateResult:
    rate_lo: float
    rate_hi: float
    iterations: int
    class_lo: str
    class_hi: str
    analytic_value: Optional[float] = None

    @property
    def rate_mid(self) -> float:
        return 0.5 * (self.rate_lo + self.rate_hi)

    @property
    def rel_width(self) -> float:
        return (self.rate_hi - self.rate_lo) / self.rate_mid

    def rel_error(self) -> Optional[float]:
        if self.analytic_value is None:
            return None
        return abs(self.rate_mid - self.analytic_value) / abs(self.analytic_value)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rate_mid"] = self.rate_mid
        d["rel_error"] = self.rel_error()
        return d


def max_iterations(bracket, rel_tol, rate_mid) -> int:
    lo, hi = bracket
    return math.ceil(math.log2((hi - lo) / (rel_tol * rate_mid))) + 2


def _label(outcome):
    return outcome.label if isinstance(outcome, Outcome) else str(outcome)


def find_critical_rate(classify: Callable[[float], Outcome], bracket: Sequence[float],
                       rel_tol: float = 1e-3, analytic: Optional[float] = None,
                       probes: Sequence[float] = ()) -> CriticalRateResult:
    """Bisect ``classify`` on ``[lo, hi]`` until the relative width is below ``rel_tol``.

    Lower rates must track and higher rates must tip. An undecided
    classification anywhere aborts with ``UndecidedClassification``;
    ``probes`` are extra rates checked against the final bracket ordering.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0 < rel_tol and lo < hi):
        raise ValueError("need lo < hi and a positive tolerance")

    def label(rate):
        lab = _label(classify(rate))
        if lab not in (TRACKS, TIPS):
            raise UndecidedClassification(f"classification undecided at rate {rate:g}", rate)
        return lab

    c_lo, c_hi = label(lo), label(hi)
    if c_lo == c_hi:
        raise BracketInvalid(f"both ends of [{lo:g}, {hi:g}] classify as {c_lo}", lo)
    if c_lo == TIPS:
        raise NonMonotone(f"rate {lo:g} tips while the larger rate {hi:g} tracks", lo)

    it = 0
    while (hi - lo) / (0.5 * (lo + hi)) > rel_tol:
        mid = 0.5 * (lo + hi)
        if label(mid) == TRACKS:
            lo = mid
        else:
            hi = mid
        it += 1

    for p in probes:
        lab = label(p)
        if (p <= lo and lab == TIPS) or (p >= hi and lab == TRACKS):
            raise NonMonotone(f"probe rate {p:g} classifies as {lab} against the bracket", p)

    return CriticalRateResult(lo, hi, it, TRACKS, TIPS, analytic)
