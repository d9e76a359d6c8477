from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

from src.core.config import settings
from src.core.utils import parse_number
from src.dynamics.types import Trajectory
from src.operators.types import ComplexMatrix

ScenarioId = Literal["qubit_ti", "qudit4", "spont_emission", "nv_center", "dephasing", "coherence_gen"]
SCENARIO_IDS: tuple[str, ...] = ("qubit_ti", "qudit4", "spont_emission", "nv_center", "dephasing", "coherence_gen")
ComparisonName = Literal["mt", "dl", "tq", "tc"]


class ScenarioError(RuntimeError):
    def __init__(
        self,
        message: str,
        *,
        operation: Literal["config", "registry", "build", "config_file"],
        scenario: Optional[str] = None,
        cause: Optional[BaseException] = None,
    ):
        super().__init__(message)
        self.message = message
        self.operation = operation
        self.scenario = scenario
        self.cause = cause


class ScenarioPreset(BaseModel):
    description: str = ""
    units: str = "natural"
    defaults: Dict[str, float] = Field(default_factory=dict)
    required: List[str] = Field(default_factory=list)
    optional: List[str] = Field(default_factory=list)
    comparisons: List[ComparisonName] = Field(default_factory=list)

    @field_validator("defaults", mode="before")
    @classmethod
    def _parse_defaults(cls, value: Any) -> Dict[str, float]:
        return {str(k): parse_number(v) for k, v in (value or {}).items()}

    @property
    def keys(self) -> set[str]:
        return set(self.defaults) | set(self.required) | set(self.optional)


class ScenarioConfig(BaseModel):
    id: ScenarioId
    params: Dict[str, float] = Field(default_factory=dict)
    grid_points: int = Field(default_factory=lambda: settings.DEFAULT_GRID_POINTS, ge=64)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)

    @field_validator("params")
    @classmethod
    def _finite(cls, value: Dict[str, float]) -> Dict[str, float]:
        for key, item in value.items():
            if not math.isfinite(item):
                raise ValueError(f"Parameter {key} must be finite, got {item}")
        return value

    def with_param(self, key: str, value: float) -> "ScenarioConfig":
        return self.model_copy(update={"params": {**self.params, key: float(value)}})


@dataclass(frozen=True, slots=True)
class AnalyticCheck:
    """A named comparison against a closed form, evaluated on demand; returns the deviation."""

    name: str
    tolerance: float
    evaluate: Callable[[], float]

    def run(self) -> tuple[float, bool]:
        deviation = float(self.evaluate())
        return deviation, deviation <= self.tolerance


@dataclass(frozen=True, slots=True)
class ScenarioBuild:
    config: ScenarioConfig
    params: Dict[str, float]
    trajectory: Trajectory
    comparisons: tuple[ComparisonName, ...]
    checks: tuple[AnalyticCheck, ...] = ()
    observable: Optional[ComplexMatrix] = None
    meta: Dict[str, float] = field(default_factory=dict)

    @property
    def tau(self) -> float:
        return self.trajectory.tau
