from __future__ import annotations

import math
from typing import Optional

import numpy as np
import numpy.typing as npt

from src.core.config import settings
from src.operators.linalg import as_square, hermitian_eig, hermiticity_residual, psd_sqrt
from src.operators.types import ComplexMatrix, OperatorError

PURE_TOL = 1e-10


def validate_state(rho: npt.ArrayLike, *, operation: str = "validate") -> ComplexMatrix:
    """Return ``rho`` as a complex array after checking Hermiticity, trace and PSD tolerances."""
    arr = as_square(rho, operation=operation)
    herm = hermiticity_residual(arr)
    if herm > settings.PSD_TOL:
        raise OperatorError("State is not Hermitian", operation=operation, residual=herm)  # type: ignore[arg-type]
    trace_err = abs(np.trace(arr) - 1.0)
    if trace_err > settings.TRACE_TOL:
        raise OperatorError("State trace differs from 1", operation=operation, residual=float(trace_err))  # type: ignore[arg-type]
    values, _ = hermitian_eig(arr, tol=settings.PSD_TOL)
    if values[-1] < -settings.PSD_TOL:
        raise OperatorError("State is not positive semidefinite", operation=operation, residual=float(-values[-1]))  # type: ignore[arg-type]
    return arr


def pure_state_projector(psi: npt.ArrayLike) -> ComplexMatrix:
    vec = np.asarray(psi, dtype=complex).reshape(-1)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise OperatorError("Zero state vector", operation="validate")
    vec = vec / norm
    return np.outer(vec, vec.conj())


def purity(rho: npt.ArrayLike) -> float:
    arr = np.asarray(rho)
    return float(np.real(np.trace(arr @ arr)))


def fidelity(rho0: npt.ArrayLike, rho1: npt.ArrayLike, *, shortcut: Optional[bool] = None) -> float:
    """Root fidelity Tr√(√ρ0 ρ1 √ρ0); uses ⟨ψ|ρ1|ψ⟩ when ρ0 is pure."""
    a = validate_state(rho0, operation="bures_angle")
    b = validate_state(rho1, operation="bures_angle")
    if a.shape != b.shape:
        raise OperatorError("State dimensions differ", operation="bures_angle")
    if shortcut is None:
        shortcut = abs(purity(a) - 1.0) <= PURE_TOL
    if shortcut:
        _, vectors = hermitian_eig(a, tol=settings.PSD_TOL)
        psi = vectors[:, 0]
        overlap = float(np.real(np.vdot(psi, b @ psi)))
        return math.sqrt(min(max(overlap, 0.0), 1.0))
    root = psd_sqrt(a)
    inner = root @ b @ root
    values, _ = hermitian_eig(0.5 * (inner + inner.conj().T), tol=settings.PSD_TOL)
    return float(np.sum(np.sqrt(np.clip(values, 0.0, None))))


def bures_angle(rho0: npt.ArrayLike, rho1: npt.ArrayLike, *, shortcut: Optional[bool] = None) -> float:
    F = fidelity(rho0, rho1, shortcut=shortcut)
    return float(math.acos(min(max(F, 0.0), 1.0)))


def energy_stddev(rho: npt.ArrayLike, H: npt.ArrayLike) -> float:
    r = np.asarray(rho, dtype=complex)
    h = np.asarray(H, dtype=complex)
    if r.shape != h.shape:
        raise OperatorError(f"Dimension mismatch: state {r.shape}, Hamiltonian {h.shape}", operation="energy_stddev")
    mean = float(np.real(np.trace(r @ h)))
    second = float(np.real(np.trace(r @ h @ h)))
    return math.sqrt(max(second - mean * mean, 0.0))


def energy_stddev_stack(states: npt.ArrayLike, hamiltonians: npt.ArrayLike) -> npt.NDArray[np.float64]:
    r = np.asarray(states, dtype=complex)
    h = np.asarray(hamiltonians, dtype=complex)
    rh = r @ h
    mean = np.real(np.trace(rh, axis1=-2, axis2=-1))
    second = np.real(np.trace(rh @ h, axis1=-2, axis2=-1))
    return np.sqrt(np.clip(second - mean**2, 0.0, None))
