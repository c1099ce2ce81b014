"""Classification labels shared by the tipping predicates."""

from dataclasses import dataclass
from typing import Optional

TRACKS = "tracks"
TIPS = "tips"
UNDECIDED = "undecided"


@dataclass(frozen=True)
class Outcome:
    label: str
    time: Optional[float] = None
    detail: str = ""

    @property
    def tips(self):
        return self.label == TIPS

    @property
    def tracks(self):
        return self.label == TRACKS

    def __str__(self):
        if self.time is not None:
            return f"{self.label}({self.time:g})"
        return self.label
