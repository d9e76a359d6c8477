from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

from src.bounds.types import BoundForm, BoundResult
from src.core.config import settings
from src.operators.types import ComplexMatrix


class OptimizeError(RuntimeError):
    def __init__(
        self,
        message: str,
        *,
        operation: Literal["config", "optimize_w", "optimize_p", "optimize_basis", "optimize_full"],
        cause: Optional[BaseException] = None,
    ):
        super().__init__(message)
        self.message = message
        self.operation = operation
        self.cause = cause


def parse_p_grid(value: Any) -> List[float]:
    if isinstance(value, str):
        items = [item.strip() for item in value.split(",") if item.strip()]
        return [float(item) for item in items]
    return [float(item) for item in value]


class OptimizeConfig(BaseModel):
    p_grid: List[float] = Field(default_factory=lambda: parse_p_grid(settings.P_GRID))
    basis_samples: int = Field(default_factory=lambda: settings.BASIS_SAMPLES, ge=1)
    hillclimb_iters: int = Field(default_factory=lambda: settings.HILLCLIMB_ITERS, ge=0)
    hillclimb_step: float = Field(default_factory=lambda: settings.HILLCLIMB_STEP, gt=0)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    target_form: BoundForm = "integral"

    stall_limit: int = Field(default=10, ge=1)
    min_step: float = Field(default=1e-6, gt=0)
    golden_iters: int = Field(default=20, ge=0)

    @field_validator("p_grid", mode="before")
    @classmethod
    def _coerce_grid(cls, value: Any) -> List[float]:
        return parse_p_grid(value)

    @field_validator("p_grid")
    @classmethod
    def _check_grid(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("p_grid must not be empty")
        if any(math.isnan(p) or p < 1 for p in value):
            raise ValueError("p_grid values must lie in [1, inf]")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("p_grid must be strictly ascending")
        if 1.0 not in value or 2.0 not in value:
            raise ValueError("p_grid must contain 1 and 2")
        return value


@dataclass(frozen=True, slots=True)
class OptimumReport:
    """Best (p, 𝟙_j, basis) found; ``best_value`` re-evaluates exactly through qsl_bound."""

    best_value: float
    best_p: float
    best_w_index: int
    best_basis: ComplexMatrix
    best_result: BoundResult
    form: BoundForm = "integral"
    basis_tag: str = "canonical"
    history: tuple[tuple[int, float], ...] = field(default_factory=tuple)
    degenerate_optima_count: int = 1
    evaluations: int = 0
