from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

from src.operators.norms import check_basis
from src.operators.types import ComplexMatrix, MatchedWeights, OperatorError, WeightVector

BoundForm = Literal["integral", "supremum"]
NormName = Literal["op", "tr", "hs"]


class BoundError(RuntimeError):
    def __init__(
        self,
        message: str,
        *,
        operation: Literal[
            "spec",
            "quadrature",
            "qsl_bound",
            "mt_bound_closed",
            "dl_bound",
            "quantumness",
            "t_q_bound",
            "coherence",
            "t_c_bound",
        ],
        residual: Optional[float] = None,
        cause: Optional[BaseException] = None,
    ):
        super().__init__(message)
        self.message = message
        self.operation = operation
        self.residual = residual
        self.cause = cause


@dataclass(frozen=True, slots=True)
class BoundSpec:
    """The triple (p, w, basis) plus the form (integral or supremum)."""

    p: float
    w: WeightVector
    basis: Optional[ComplexMatrix] = None
    form: BoundForm = "integral"
    basis_tag: str = "canonical"

    def __post_init__(self) -> None:
        if math.isnan(self.p) or self.p < 1:
            raise BoundError(f"p must lie in [1, inf], got {self.p}", operation="spec")
        if self.form not in ("integral", "supremum"):
            raise BoundError(f"Unknown bound form {self.form!r}", operation="spec")
        if self.basis is not None:
            n = int(round(math.sqrt(self.w.size)))
            try:
                basis = check_basis(self.basis, n)
            except OperatorError as exc:
                raise BoundError(exc.message, operation="spec", residual=exc.residual, cause=exc) from exc
            object.__setattr__(self, "basis", basis)


@dataclass(frozen=True, slots=True)
class BoundResult:
    value: float
    numerator: float
    denominator: float
    wbar: MatchedWeights
    form: BoundForm
    p: float
    tau: float
    integral_value: float = 0.0
    supremum_value: float = 0.0
    basis_tag: str = "canonical"
    w_index: Optional[int] = None
    trivial: bool = False
    quadrature_residual: float = 0.0
    candidate_values: tuple[float, ...] = field(default_factory=tuple)

    @property
    def degenerate(self) -> bool:
        return self.wbar.degenerate

    @property
    def truncated(self) -> bool:
        return self.wbar.truncated


@dataclass(frozen=True, slots=True)
class DLBoundResult:
    value: float
    winning_norm: NormName
    mt_open: float
    sin2_angle: float
    averages: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class QuadratureResult:
    integral: float
    average: float
    residual: float
    maximum: float

