"""Commutator-based quantumness and coherence, with the specialized speed limits built on them.

Normalizations:

- ``quantumness`` is Q(A, B) = 2‖[A, B]‖²_hs, so T_Q = √Q(A0, A_T) / (√2 ⟨‖[A0, 𝕃†(A_t)]‖_hs⟩_T)
  carries the √2 in its denominator.
- ``coherence`` is C(ρ, A) = −½ Σ_k Tr([√ρ, Π_k]²), the commutator form with the −½ prefactor.
  For |+⟩ and σz this gives C = ½, while ``l1_coherence`` (sum of off-diagonal moduli) gives 1.
- T_C = |√C(ρ0, A) − √C(ρ_T, A)| / ⟨‖∂_t √ρ_t‖_hs⟩_T has no √2 factor.
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
import numpy.typing as npt

from src.bounds.quadrature import time_average
from src.bounds.reference import require_state_trajectory
from src.bounds.types import BoundError
from src.dynamics.types import Trajectory
from src.operators.linalg import commutator, hermitian_eig, psd_sqrt, stacked_psd_sqrt, stacked_schatten_norms
from src.operators.types import ComplexMatrix, OperatorError

logger = logging.getLogger(__name__)

PROJECTOR_IDENTITY_TOL = 1e-10
SPECTRAL_GAP_TOL = 1e-10


def _pair(A: npt.ArrayLike, B: npt.ArrayLike, operation: str) -> tuple[ComplexMatrix, ComplexMatrix]:
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape or A.ndim != 2:
        raise BoundError(f"Dimension mismatch: {A.shape} vs {B.shape}", operation=operation)  # type: ignore[arg-type]
    return A, B


def quantumness(A0: npt.ArrayLike, At: npt.ArrayLike) -> float:
    """Q = 2‖[A0, At]‖²_hs."""
    A0, At = _pair(A0, At, "quantumness")
    return 2.0 * float(np.linalg.norm(commutator(A0, At))) ** 2


def t_q_bound(traj: Trajectory, A0: Optional[npt.ArrayLike] = None) -> float:
    """√Q(A0, A_T) / (√2 ⟨‖[A0, 𝕃†(A_t)]‖_hs⟩_T) for a Heisenberg-picture trajectory."""
    if traj.picture != "heisenberg":
        raise BoundError("T_Q needs a Heisenberg-picture trajectory of observables", operation="t_q_bound")
    reference = traj.initial if A0 is None else np.asarray(A0, dtype=complex)
    reference, _ = _pair(reference, traj.final, "t_q_bound")
    numerator = math.sqrt(quantumness(reference, traj.final))
    if numerator == 0.0:
        return 0.0
    norms = stacked_schatten_norms(commutator(reference[None, :, :], traj.all_derivatives()), "hs")
    quad = time_average(traj, norms, label="commutator with the adjoint generator")
    if quad.average <= 0.0:
        raise BoundError("Zero denominator with nonzero quantumness", operation="t_q_bound")
    return numerator / (math.sqrt(2.0) * quad.average)


def eigenprojectors(A: npt.ArrayLike) -> list[ComplexMatrix]:
    """Rank-one eigenprojectors of a Hermitian A with non-degenerate spectrum."""
    try:
        values, vectors = hermitian_eig(A)
    except OperatorError as exc:
        raise BoundError(exc.message, operation="coherence", cause=exc) from exc
    scale = max(1.0, float(np.max(np.abs(values))))
    if values.size > 1 and float(np.min(-np.diff(values))) <= SPECTRAL_GAP_TOL * scale:
        raise BoundError("Observable has a degenerate spectrum; eigenprojectors are ambiguous", operation="coherence")
    return [np.outer(vectors[:, k], vectors[:, k].conj()) for k in range(values.size)]


def _coherence_from_root(root: ComplexMatrix, projectors: list[ComplexMatrix]) -> float:
    total = 0.0
    for P in projectors:
        c = commutator(root, P)
        total += float(np.real(np.trace(c @ c)))
    return max(0.0, -0.5 * total)


def coherence(rho: npt.ArrayLike, A: npt.ArrayLike) -> float:
    """C = −½ Σ_k Tr([√ρ, Π_k]²) over the eigenprojectors Π_k of A."""
    rho, A = _pair(rho, A, "coherence")
    try:
        root = psd_sqrt(rho)
    except OperatorError as exc:
        raise BoundError(exc.message, operation="coherence", residual=exc.residual, cause=exc) from exc
    return _coherence_from_root(root, eigenprojectors(A))


def l1_coherence(rho: npt.ArrayLike, A: npt.ArrayLike) -> float:
    """Sum of off-diagonal moduli of ρ in the eigenbasis of A."""
    rho, A = _pair(rho, A, "coherence")
    _, vectors = hermitian_eig(A)
    rotated = vectors.conj().T @ rho @ vectors
    return float(np.sum(np.abs(rotated)) - np.sum(np.abs(np.diag(rotated))))


def projector_identity_residual(M: npt.ArrayLike, projectors: list[ComplexMatrix]) -> float:
    """|Σ_k ‖M Π_k‖²_hs − ‖M‖²_hs| relative to ‖M‖²_hs."""
    M = np.asarray(M, dtype=complex)
    total = float(np.linalg.norm(M)) ** 2
    split = sum(float(np.linalg.norm(M @ P)) ** 2 for P in projectors)
    return abs(split - total) / total if total > 0 else abs(split)


def root_derivative_norms(traj: Trajectory) -> npt.NDArray[np.float64]:
    """‖∂_t √ρ_t‖_hs by central differences within each smooth piece, in ``all_derivatives`` order."""
    roots = stacked_psd_sqrt(traj.samples)
    K = traj.times.size
    grid = np.empty(K)
    left = np.empty(len(traj.break_indices))
    edges = [0, *traj.break_indices, K - 1]
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if b - a < 2:
            raise BoundError("Each smooth piece needs at least three samples", operation="t_c_bound")
        deriv = np.gradient(roots[a : b + 1], traj.times[a : b + 1], axis=0, edge_order=2)
        norms = stacked_schatten_norms(deriv, "hs")
        grid[a:b] = norms[:-1]
        if k < len(traj.break_indices):
            left[k] = norms[-1]
        else:
            grid[b] = norms[-1]
    return np.concatenate([grid, left])


def t_c_bound(traj: Trajectory, A: npt.ArrayLike) -> float:
    """|√C(ρ0, A) − √C(ρ_T, A)| / ⟨‖∂_t √ρ_t‖_hs⟩_T."""
    require_state_trajectory(traj, "t_c_bound")
    projectors = eigenprojectors(A)
    roots = stacked_psd_sqrt(traj.samples[[0, -1]])
    numerator = abs(
        math.sqrt(_coherence_from_root(roots[0], projectors)) - math.sqrt(_coherence_from_root(roots[1], projectors))
    )
    if numerator == 0.0:
        return 0.0
    norms = root_derivative_norms(traj)

    mid = traj.times.size // 2
    midpoint_rate = np.gradient(stacked_psd_sqrt(traj.samples[mid - 1 : mid + 2]), traj.times[mid - 1 : mid + 2], axis=0)[1]
    residual = projector_identity_residual(midpoint_rate, projectors)
    if residual > PROJECTOR_IDENTITY_TOL:
        raise BoundError("Projector sum does not reproduce the Hilbert–Schmidt norm", operation="t_c_bound", residual=residual)

    quad = time_average(traj, norms, label="derivative of the state square root")
    if quad.average <= 0.0:
        raise BoundError("Zero denominator with nonzero coherence change", operation="t_c_bound")
    return numerator / quad.average
