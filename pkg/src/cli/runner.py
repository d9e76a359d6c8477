from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator

from src.bounds.qsl import BoundEvaluator, delta_diagonal_basis, energy_basis
from src.bounds.quantumness import t_c_bound, t_q_bound
from src.bounds.reference import dl_bound, mt_bound_closed
from src.bounds.types import BoundError
from src.domain.results import RunRecord
from src.dynamics.types import DynamicsError, Trajectory
from src.operators.linalg import SIGMA_Z, unitarity_residual
from src.operators.sampling import haar_unitary
from src.operators.types import ComplexMatrix, OperatorError, WeightVector
from src.optimize.search import optimize_full
from src.optimize.types import OptimizeConfig, OptimizeError
from src.scenarios.builders import build
from src.scenarios.registry import get_registry
from src.scenarios.types import ScenarioBuild, ScenarioConfig, ScenarioError
from src.core.config import settings

logger = logging.getLogger(__name__)

BoundName = Literal["int", "sup", "opt_int", "opt_sup", "mt", "dl", "tq", "tc"]
BOUND_NAMES: tuple[str, ...] = ("int", "sup", "opt_int", "opt_sup", "mt", "dl", "tq", "tc")
HEISENBERG_SCENARIOS = {"dephasing"}

NUMERICAL_ERRORS = (OperatorError, DynamicsError, BoundError, OptimizeError)


class CliConfigError(RuntimeError):
    def __init__(
        self,
        message: str,
        *,
        operation: Literal["args", "config_file", "request", "basis", "output"],
        cause: Optional[BaseException] = None,
    ):
        super().__init__(message)
        self.message = message
        self.operation = operation
        self.cause = cause


class PointFailure(RuntimeError):
    """A sweep point failed in a worker; carries the exit code chosen there."""

    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code

    def __reduce__(self):
        return (PointFailure, (self.message, self.exit_code))


class SweepRequest(BaseModel):
    scenario: ScenarioConfig
    axis: str = "tau"
    values: List[float] = Field(default_factory=list)
    bounds: List[BoundName]
    p: float = 1.0
    w_index: int = Field(default=1, ge=1)
    basis: str = "canonical"
    optimize: OptimizeConfig = Field(default_factory=OptimizeConfig)
    timing: bool = True

    @field_validator("bounds")
    @classmethod
    def _non_empty(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one bound is required")
        return value

    @field_validator("p")
    @classmethod
    def _p_range(cls, value: float) -> float:
        if not value >= 1:
            raise ValueError(f"p must lie in [1, inf], got {value}")
        return value

    @field_validator("basis")
    @classmethod
    def _basis_selector(cls, value: str) -> str:
        if value in ("canonical", "energy", "delta_diag"):
            return value
        if value.startswith("haar:"):
            int(value.split(":", 1)[1])
            return value
        if value.startswith("file:") and value[5:]:
            return value
        raise ValueError(f"unknown basis selector {value!r}")


def make_request(**kwargs) -> SweepRequest:
    try:
        request = SweepRequest(**kwargs)
    except ValidationError as exc:
        raise CliConfigError(_first_error(exc), operation="request", cause=exc) from exc
    validate_request(request)
    return request


def _first_error(exc: ValidationError) -> str:
    err = exc.errors()[0]
    where = ".".join(str(part) for part in err.get("loc", ()))
    return f"{where}: {err.get('msg')}" if where else str(err.get("msg"))


def validate_request(request: SweepRequest) -> None:
    registry = get_registry()
    preset = registry.get(request.scenario.id)
    if request.axis not in preset.keys:
        raise CliConfigError(
            f"Axis {request.axis!r} is not a parameter of {request.scenario.id} (accepted: {', '.join(sorted(preset.keys))})",
            operation="request",
        )
    if not request.values:
        raise CliConfigError("Sweep values must not be empty", operation="request")
    if not all(np.isfinite(request.values)):
        raise CliConfigError("Sweep values must be finite", operation="request")
    heisenberg = request.scenario.id in HEISENBERG_SCENARIOS
    for bound in request.bounds:
        if bound in ("mt", "dl", "tc") and heisenberg:
            raise CliConfigError(f"Bound {bound} needs a density-matrix scenario", operation="request")
        if bound == "tq" and not heisenberg:
            raise CliConfigError("Bound tq needs an observable (Heisenberg-picture) scenario", operation="request")
        if bound == "tc" and request.scenario.id in ("qudit4", "nv_center"):
            raise CliConfigError(f"Bound tc has no default observable for {request.scenario.id}", operation="request")


def resolve_basis(selector: str, traj: Trajectory) -> tuple[Optional[ComplexMatrix], str]:
    n = traj.dim
    if selector == "canonical":
        return None, selector
    if selector == "energy":
        return energy_basis(traj), selector
    if selector == "delta_diag":
        return delta_diagonal_basis(traj), selector
    if selector.startswith("haar:"):
        return haar_unitary(n, int(selector.split(":", 1)[1])), selector
    path = Path(selector[5:])
    try:
        basis = np.load(path) if path.suffix == ".npy" else np.loadtxt(path, dtype=complex, ndmin=2)
    except (OSError, ValueError) as exc:
        raise CliConfigError(f"Cannot read basis file {path}: {exc}", operation="basis", cause=exc) from exc
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (n, n):
        raise CliConfigError(f"Basis file {path} has shape {basis.shape}, expected ({n}, {n})", operation="basis")
    if unitarity_residual(basis) > settings.UNITARY_TOL:
        raise CliConfigError(f"Basis in {path} is not unitary", operation="basis")
    return basis, selector


def _mt(built: ScenarioBuild) -> float:
    traj = built.trajectory
    if traj.generator.is_closed:
        return mt_bound_closed(traj)
    return dl_bound(traj).mt_open


def evaluate_point(request: SweepRequest, axis_value: float) -> list[RunRecord]:
    """Every requested bound at one sweep point, in request order."""
    cfg = request.scenario.with_param(request.axis, axis_value)
    built = build(cfg)
    traj = built.trajectory
    basis, basis_tag = resolve_basis(request.basis, traj)
    n2 = traj.dim**2
    if request.w_index > n2:
        raise CliConfigError(f"w index {request.w_index} exceeds n² = {n2}", operation="request")
    evaluator: Optional[BoundEvaluator] = None

    records: list[RunRecord] = []
    for name in request.bounds:
        started = time.perf_counter()
        fields: dict = {"p": None, "w_index": None, "basis": "", "numerator": None, "denominator": None, "degenerate": False}
        if name in ("int", "sup"):
            evaluator = evaluator or BoundEvaluator(traj, basis, basis_tag=basis_tag)
            form = "integral" if name == "int" else "supremum"
            result = evaluator.evaluate(request.p, WeightVector.indicator(request.w_index, n2), form)
            value = result.value
            fields.update(
                p=request.p,
                w_index=request.w_index,
                basis=basis_tag,
                numerator=result.numerator,
                denominator=result.denominator,
                degenerate=result.degenerate,
            )
        elif name in ("opt_int", "opt_sup"):
            opt_cfg = request.optimize.model_copy(
                update={"target_form": "integral" if name == "opt_int" else "supremum", "seed": cfg.seed}
            )
            report = optimize_full(traj, opt_cfg)
            value = report.best_value
            fields.update(
                p=report.best_p,
                w_index=report.best_w_index,
                basis=report.basis_tag,
                numerator=report.best_result.numerator,
                denominator=report.best_result.denominator,
                degenerate=report.degenerate_optima_count > 1,
            )
        elif name == "mt":
            value = _mt(built)
        elif name == "dl":
            dl = dl_bound(traj)
            value = dl.value
            fields.update(basis=dl.winning_norm)
        elif name == "tq":
            value = t_q_bound(traj, built.observable)
        else:
            observable = built.observable if built.observable is not None else np.array(SIGMA_Z)
            value = t_c_bound(traj, observable)
        elapsed = time.perf_counter() - started
        if value > traj.tau + settings.TAU_SLACK:
            logger.warning("%s bound %.12g exceeds tau %.12g at %s=%s", name, value, traj.tau, request.axis, axis_value)
        records.append(
            RunRecord(
                scenario=cfg.id,
                axis=request.axis,
                axis_value=axis_value,
                bound=name,
                value=value,
                tau=traj.tau,
                wall_time=elapsed if request.timing else None,
                seed=cfg.seed,
                **fields,
            )
        )
    return records


def _point_worker(request: SweepRequest, axis_value: float) -> list[RunRecord]:
    try:
        return evaluate_point(request, axis_value)
    except (CliConfigError, ScenarioError) as exc:
        raise PointFailure(f"{request.axis}={axis_value}: {exc}", 2) from None
    except NUMERICAL_ERRORS as exc:
        raise PointFailure(f"{request.axis}={axis_value}: {exc}", 3) from None


def default_jobs() -> int:
    return os.cpu_count() or 1


def run_sweep(request: SweepRequest, jobs: Optional[int] = None) -> list[RunRecord]:
    """Evaluate all sweep points; output order follows ``request.values`` regardless of completion order."""
    jobs = default_jobs() if jobs is None else max(1, jobs)
    values = list(request.values)
    logger.info("Sweeping %s over %s values of %s with %s job(s)", request.scenario.id, len(values), request.axis, jobs)
    if jobs == 1 or len(values) == 1:
        chunks = [_point_worker(request, v) for v in values]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(values))) as pool:
            chunks = list(pool.map(_point_worker, [request] * len(values), values))
    return [record for chunk in chunks for record in chunk]
