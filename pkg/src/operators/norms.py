from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from typing import Iterator, Optional, Sequence

import numpy as np
import numpy.typing as npt

from src.core.config import settings
from src.operators.linalg import as_square, dagger, unitarity_residual
from src.operators.types import (
    ComplexMatrix,
    MatchedWeights,
    OperatorError,
    RealVector,
    VectorizedOperator,
    WeightVector,
)

logger = logging.getLogger(__name__)


def check_basis(U: Optional[npt.ArrayLike], dim: int) -> ComplexMatrix:
    if U is None:
        return np.eye(dim, dtype=complex)
    basis = np.asarray(U, dtype=complex)
    if basis.shape != (dim, dim):
        raise OperatorError(f"Basis shape {basis.shape} does not match dimension {dim}", operation="vectorize")
    residual = unitarity_residual(basis)
    if residual > settings.UNITARY_TOL:
        raise OperatorError("Basis matrix is not unitary", operation="vectorize", residual=residual)
    return basis


def vectorize(M: npt.ArrayLike, U: Optional[npt.ArrayLike] = None, *, basis_tag: str = "canonical") -> VectorizedOperator:
    """Entries of U†MU in the order (M11, M12, ..., M1n, M21, ..., Mnn)."""
    arr = as_square(M, operation="vectorize")
    basis = check_basis(U, arr.shape[0])
    rotated = dagger(basis) @ arr @ basis
    entries = np.ascontiguousarray(rotated.reshape(-1))
    return VectorizedOperator(entries=entries, basis=basis, basis_tag=basis_tag)


def vectorize_stack(stack: npt.ArrayLike, U: Optional[npt.ArrayLike] = None) -> npt.NDArray[np.complex128]:
    """Row k holds vectorize(stack[k], U).entries."""
    arr = np.asarray(stack, dtype=complex)
    basis = check_basis(U, arr.shape[-1])
    rotated = dagger(basis) @ arr @ basis
    return rotated.reshape(arr.shape[0], -1)


def devectorize(x: VectorizedOperator | npt.ArrayLike) -> ComplexMatrix:
    """Inverse of vectorize in the basis the entries were taken in (i.e. returns U†MU)."""
    entries = x.entries if isinstance(x, VectorizedOperator) else np.asarray(x, dtype=complex)
    n = int(round(math.sqrt(entries.size)))
    if n * n != entries.size or n < 1:
        raise OperatorError(f"Length {entries.size} is not a perfect square", operation="devectorize")
    return entries.reshape(n, n).copy()


def _entries(x: VectorizedOperator | npt.ArrayLike) -> npt.NDArray[np.complex128]:
    return x.entries if isinstance(x, VectorizedOperator) else np.asarray(x, dtype=complex).reshape(-1)


def _check_p(p: float, operation: str) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise OperatorError(f"p must lie in [1, inf], got {p}", operation=operation)  # type: ignore[arg-type]
    return p


def weighted_pnorm(sorted_moduli: RealVector, sorted_weights: RealVector, p: float) -> float:
    if math.isinf(p):
        return float(sorted_moduli[0]) if sorted_moduli.size else 0.0
    return float(np.sum(sorted_weights * sorted_moduli**p) ** (1.0 / p))


def tie_blocks(sorted_moduli: RealVector, rtol: Optional[float] = None) -> list[tuple[int, int]]:
    """Half-open [start, stop) ranges of consecutive sorted moduli closer than rtol * largest."""
    rtol = settings.TIE_RTOL if rtol is None else rtol
    if sorted_moduli.size == 0:
        return []
    threshold = rtol * float(sorted_moduli[0])
    blocks: list[tuple[int, int]] = []
    start = 0
    for k in range(1, sorted_moduli.size):
        if sorted_moduli[k - 1] - sorted_moduli[k] > threshold:
            blocks.append((start, k))
            start = k
    blocks.append((start, sorted_moduli.size))
    return blocks


def _distinct_permutations(values: Sequence[float]) -> Iterator[tuple[float, ...]]:
    counts = Counter(values)
    keys = sorted(counts, reverse=True)
    size = len(values)

    def _walk(prefix: list[float]) -> Iterator[tuple[float, ...]]:
        if len(prefix) == size:
            yield tuple(prefix)
            return
        for key in keys:
            if counts[key]:
                counts[key] -= 1
                prefix.append(key)
                yield from _walk(prefix)
                prefix.pop()
                counts[key] += 1

    yield from _walk([])


def _multiset_count(values: Sequence[float]) -> int:
    total = math.factorial(len(values))
    for c in Counter(values).values():
        total //= math.factorial(c)
    return total


def enumerate_matchings(
    order: npt.NDArray[np.int64],
    sorted_weights: RealVector,
    blocks: list[tuple[int, int]],
    *,
    limit: Optional[int] = None,
) -> tuple[tuple[RealVector, ...], bool]:
    """All distinct w̄ obtainable by permuting weights inside each tie block.

    Returns (candidates, truncated). When the count exceeds ``limit`` only the
    canonical matching is returned and ``truncated`` is True.
    """
    limit = settings.MAX_TIE_CANDIDATES if limit is None else limit
    size = order.size
    canonical = np.empty(size)
    canonical[order] = sorted_weights

    varying = [(a, b) for a, b in blocks if len(set(sorted_weights[a:b].tolist())) > 1]
    if not varying:
        return (canonical,), False

    total = 1
    for a, b in varying:
        total *= _multiset_count(sorted_weights[a:b].tolist())
        if total > limit:
            logger.warning("Tie enumeration needs more than %s matchings; using canonical order", limit)
            return (canonical,), True

    per_block = [list(_distinct_permutations(sorted_weights[a:b].tolist())) for a, b in varying]
    candidates: list[RealVector] = []
    for combo in itertools.product(*per_block):
        weights_at = canonical.copy()
        for (a, b), arrangement in zip(varying, combo):
            weights_at[order[a:b]] = arrangement
        candidates.append(weights_at)
    return tuple(candidates), False


def arrow_norm(x: VectorizedOperator | npt.ArrayLike, w: WeightVector, p: float) -> MatchedWeights:
    entries = _entries(x)
    if entries.size != w.size:
        raise OperatorError(f"Length mismatch: vector {entries.size}, weights {w.size}", operation="arrow_norm")
    p = _check_p(p, "arrow_norm")

    moduli = np.abs(entries)
    order = np.argsort(-moduli, kind="stable").astype(np.int64)
    sorted_moduli = moduli[order]
    value = weighted_pnorm(sorted_moduli, w.entries, p)

    weights_at = np.empty(entries.size)
    weights_at[order] = w.entries
    if value == 0.0:
        return MatchedWeights(assignment=order, weights_at=weights_at, value=0.0, candidates=(weights_at,))

    blocks = tie_blocks(sorted_moduli)
    candidates, truncated = enumerate_matchings(order, w.entries, blocks)
    return MatchedWeights(
        assignment=order,
        weights_at=weights_at,
        value=value,
        degenerate=len(candidates) > 1 or truncated,
        candidates=candidates,
        truncated=truncated,
    )


def seminorm_values(moduli: npt.ArrayLike, weights_at: RealVector, p: float) -> RealVector:
    """Weighted ℓp seminorm of each row of ``moduli`` (or of a single vector) under fixed weights."""
    arr = np.asarray(moduli, dtype=float)
    if math.isinf(p):
        support = weights_at > 0
        if not np.any(support):
            return np.zeros(arr.shape[:-1]) if arr.ndim > 1 else np.asarray(0.0)
        return np.max(arr[..., support], axis=-1)
    return np.sum(weights_at * arr**p, axis=-1) ** (1.0 / p)


def matched_seminorm(x: VectorizedOperator | npt.ArrayLike, wbar: MatchedWeights | npt.ArrayLike, p: float) -> float:
    entries = _entries(x)
    weights_at = wbar.weights_at if isinstance(wbar, MatchedWeights) else np.asarray(wbar, dtype=float)
    if weights_at.size != entries.size:
        raise OperatorError(
            f"Length mismatch: vector {entries.size}, weights {weights_at.size}", operation="matched_seminorm"
        )
    p = _check_p(p, "matched_seminorm")
    return float(seminorm_values(np.abs(entries), weights_at, p))
