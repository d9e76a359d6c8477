from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

CheckStatus = Literal["PASS", "FAIL", "SOFT"]


@dataclass(frozen=True, slots=True)
class RunRecord:
    """One emitted output row: a bound evaluated at one sweep point."""

    scenario: str
    axis: str
    axis_value: float
    bound: str
    value: float
    tau: float
    p: Optional[float] = None
    w_index: Optional[int] = None
    basis: str = ""
    numerator: Optional[float] = None
    denominator: Optional[float] = None
    degenerate: bool = False
    wall_time: Optional[float] = None
    seed: int = 0


@dataclass(frozen=True, slots=True)
class CheckResult:
    name: str
    status: CheckStatus
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "FAIL"
