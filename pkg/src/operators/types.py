from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
import numpy.typing as npt

ComplexMatrix = npt.NDArray[np.complex128]
RealVector = npt.NDArray[np.float64]


class OperatorError(RuntimeError):
    def __init__(
        self,
        message: str,
        *,
        operation: Literal[
            "vectorize",
            "devectorize",
            "arrow_norm",
            "matched_seminorm",
            "hermitian_eig",
            "singular_values",
            "bures_angle",
            "energy_stddev",
            "haar_unitary",
            "weights",
            "validate",
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
class VectorizedOperator:
    """Entries of U†MU listed as (M11, M12, ..., Mnn) with the basis U attached."""

    entries: npt.NDArray[np.complex128]
    basis: Optional[ComplexMatrix] = None
    basis_tag: str = "canonical"

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.entries.size)))

    def __len__(self) -> int:
        return int(self.entries.size)

    def moduli(self) -> RealVector:
        return np.abs(self.entries)


@dataclass(frozen=True, slots=True)
class WeightVector:
    """Nonnegative weights stored in descending order."""

    entries: RealVector

    def __post_init__(self) -> None:
        values = np.asarray(self.entries, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise OperatorError("Weights must be a nonempty vector", operation="weights")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise OperatorError("Weights must be finite and nonnegative", operation="weights")
        if not np.any(values > 0):
            raise OperatorError("At least one weight must be positive", operation="weights")
        if np.any(np.diff(values) > 0):
            raise OperatorError("Weights must be sorted descending", operation="weights")
        values.setflags(write=False)
        object.__setattr__(self, "entries", values)

    @classmethod
    def from_values(cls, values: npt.ArrayLike, *, normalize: bool = True) -> "WeightVector":
        arr = np.sort(np.asarray(values, dtype=float))[::-1]
        if normalize and arr.size and arr[0] > 0:
            arr = arr / arr[0]
        return cls(np.ascontiguousarray(arr))

    @classmethod
    def indicator(cls, j: int, size: int) -> "WeightVector":
        """The weight 𝟙_j: ones in the first j slots, zeros elsewhere."""
        if not 1 <= j <= size:
            raise OperatorError(f"Indicator index {j} outside 1..{size}", operation="weights")
        arr = np.zeros(size)
        arr[:j] = 1.0
        return cls(arr)

    @property
    def size(self) -> int:
        return int(self.entries.size)

    def support_size(self) -> int:
        return int(np.count_nonzero(self.entries > 0))

    def indicator_index(self) -> Optional[int]:
        """j when the weights equal 𝟙_j, otherwise None."""
        j = self.support_size()
        if np.all(self.entries[:j] == 1.0):
            return j
        return None

    def scaled(self, factor: float) -> "WeightVector":
        return WeightVector(self.entries * float(factor))


@dataclass(frozen=True, slots=True)
class MatchedWeights:
    """A realization of w̄: ``weights_at[k]`` is the weight placed on coordinate k."""

    assignment: npt.NDArray[np.int64]
    weights_at: RealVector
    value: float
    degenerate: bool = False
    candidates: tuple[RealVector, ...] = field(default_factory=tuple)
    truncated: bool = False

    @property
    def support(self) -> npt.NDArray[np.bool_]:
        return self.weights_at > 0
