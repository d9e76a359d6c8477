from __future__ import annotations

import logging
from typing import Literal, Optional

import numpy as np
import numpy.typing as npt

from src.core.config import settings
from src.operators.types import ComplexMatrix, OperatorError, RealVector

logger = logging.getLogger(__name__)

NormKind = Literal["op", "tr", "hs"]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
for _pauli in (SIGMA_X, SIGMA_Y, SIGMA_Z):
    _pauli.setflags(write=False)


def as_square(M: npt.ArrayLike, *, operation: str = "validate") -> ComplexMatrix:
    arr = np.asarray(M, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise OperatorError(f"Expected a nonempty square matrix, got shape {arr.shape}", operation=operation)  # type: ignore[arg-type]
    return arr


def dagger(M: npt.ArrayLike) -> ComplexMatrix:
    return np.conjugate(np.swapaxes(np.asarray(M), -1, -2))


def commutator(A: npt.ArrayLike, B: npt.ArrayLike) -> ComplexMatrix:
    A = np.asarray(A)
    B = np.asarray(B)
    return A @ B - B @ A


def anticommutator(A: npt.ArrayLike, B: npt.ArrayLike) -> ComplexMatrix:
    A = np.asarray(A)
    B = np.asarray(B)
    return A @ B + B @ A


def hermiticity_residual(M: npt.ArrayLike) -> float:
    arr = np.asarray(M)
    scale = float(np.max(np.abs(arr))) if arr.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(arr - dagger(arr)))) / scale


def is_hermitian(M: npt.ArrayLike, tol: Optional[float] = None) -> bool:
    tol = settings.HERMITIAN_TOL if tol is None else tol
    return hermiticity_residual(M) <= tol


def unitarity_residual(U: npt.ArrayLike) -> float:
    arr = np.asarray(U)
    return float(np.max(np.abs(dagger(arr) @ arr - np.eye(arr.shape[0]))))


def is_unitary(U: npt.ArrayLike, tol: Optional[float] = None) -> bool:
    tol = settings.UNITARY_TOL if tol is None else tol
    arr = np.asarray(U)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        return False
    return unitarity_residual(arr) <= tol


def jacobi_eigh(M: npt.ArrayLike, *, tol: float = 1e-14, max_sweeps: int = 64) -> tuple[RealVector, ComplexMatrix]:
    """Cyclic Jacobi for complex Hermitian matrices; eigenvalues unsorted."""
    A = np.array(M, dtype=complex)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    scale = max(float(np.linalg.norm(A)), 1e-300)
    for _ in range(max_sweeps):
        off = float(np.sqrt(np.sum(np.abs(A - np.diag(np.diag(A))) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                c_pq = A[p, q]
                mag = abs(c_pq)
                if mag <= tol * scale * 1e-3:
                    continue
                phase = c_pq / mag
                a, b = A[p, p].real, A[q, q].real
                theta = 0.5 * np.arctan2(2.0 * mag, b - a)
                cos_t, sin_t = np.cos(theta), np.sin(theta)
                G = np.eye(n, dtype=complex)
                # phase fix on column q, then a real plane rotation
                G[p, p] = cos_t
                G[p, q] = sin_t
                G[q, p] = -sin_t * np.conj(phase)
                G[q, q] = cos_t * np.conj(phase)
                A = dagger(G) @ A @ G
                V = V @ G
    else:
        logger.warning("Jacobi iteration hit the sweep cap (%s sweeps)", max_sweeps)
    return np.real(np.diag(A)).copy(), V


def hermitian_eig(
    M: npt.ArrayLike,
    *,
    method: Optional[Literal["lapack", "jacobi"]] = None,
    tol: Optional[float] = None,
) -> tuple[RealVector, ComplexMatrix]:
    """Eigenvalues in descending order and the matching unitary of eigenvectors (columns)."""
    arr = as_square(M, operation="hermitian_eig")
    tol = settings.HERMITIAN_TOL if tol is None else tol
    residual = hermiticity_residual(arr)
    if residual > tol:
        raise OperatorError("Matrix is not Hermitian", operation="hermitian_eig", residual=residual)
    herm = 0.5 * (arr + dagger(arr))
    method = method or settings.EIGEN_METHOD
    if method == "jacobi":
        values, vectors = jacobi_eigh(herm)
    else:
        values, vectors = np.linalg.eigh(herm)
    order = np.argsort(values, kind="stable")[::-1]
    return np.asarray(values)[order], np.asarray(vectors)[:, order]


def singular_values(M: npt.ArrayLike) -> RealVector:
    arr = as_square(M, operation="singular_values")
    return np.linalg.svd(arr, compute_uv=False)


def schatten_norm(M: npt.ArrayLike, kind: NormKind) -> float:
    """op = largest singular value, tr = sum of singular values, hs = Frobenius."""
    arr = np.asarray(M)
    if kind == "hs":
        return float(np.linalg.norm(arr))
    s = singular_values(arr)
    if kind == "op":
        return float(s[0])
    if kind == "tr":
        return float(np.sum(s))
    raise OperatorError(f"Unknown norm kind {kind}", operation="singular_values")


def stacked_schatten_norms(stack: npt.ArrayLike, kind: NormKind) -> RealVector:
    arr = np.asarray(stack)
    if kind == "hs":
        return np.sqrt(np.sum(np.abs(arr) ** 2, axis=(-2, -1)))
    s = np.linalg.svd(arr, compute_uv=False)
    return s[..., 0] if kind == "op" else np.sum(s, axis=-1)


def psd_sqrt(M: npt.ArrayLike, *, psd_tol: Optional[float] = None) -> ComplexMatrix:
    """Principal square root of a PSD matrix; eigenvalues down to -psd_tol are clamped to 0."""
    psd_tol = settings.PSD_TOL if psd_tol is None else psd_tol
    values, vectors = hermitian_eig(M, tol=max(settings.HERMITIAN_TOL, psd_tol))
    if values[-1] < -psd_tol:
        raise OperatorError(
            f"Matrix is not positive semidefinite (min eigenvalue {values[-1]:.3e})",
            operation="validate",
            residual=float(-values[-1]),
        )
    roots = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * roots) @ dagger(vectors)


def stacked_psd_sqrt(stack: npt.ArrayLike, *, psd_tol: Optional[float] = None) -> npt.NDArray[np.complex128]:
    psd_tol = settings.PSD_TOL if psd_tol is None else psd_tol
    arr = np.asarray(stack, dtype=complex)
    herm = 0.5 * (arr + dagger(arr))
    values, vectors = np.linalg.eigh(herm)
    if np.min(values) < -psd_tol:
        raise OperatorError(
            f"Stack contains a non-PSD matrix (min eigenvalue {np.min(values):.3e})",
            operation="validate",
            residual=float(-np.min(values)),
        )
    roots = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * roots[..., None, :]) @ dagger(vectors)
