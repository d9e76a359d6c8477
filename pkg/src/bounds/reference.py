"""Comparison bounds: Mandelstam–Tamm for closed systems and Deffner–Lutz for open ones."""

from __future__ import annotations

import logging
import math
from typing import Callable, Optional

import numpy as np

from src.bounds.quadrature import time_average
from src.bounds.types import BoundError, DLBoundResult, NormName
from src.dynamics.types import DynamicsError, Trajectory
from src.operators.linalg import stacked_schatten_norms
from src.operators.states import bures_angle, energy_stddev_stack
from src.operators.types import ComplexMatrix, OperatorError

logger = logging.getLogger(__name__)

TRACE_OP_IDENTITY_TOL = 1e-8


def require_state_trajectory(traj: Trajectory, operation: str) -> None:
    if traj.picture != "schrodinger":
        raise BoundError("A density-matrix trajectory is required", operation=operation)  # type: ignore[arg-type]
    try:
        traj.check_states()
    except DynamicsError as exc:
        raise BoundError(exc.message, operation=operation, residual=exc.residual, cause=exc) from exc  # type: ignore[arg-type]


def _angle(traj: Trajectory, operation: str) -> float:
    try:
        return bures_angle(traj.initial, traj.final)
    except OperatorError as exc:
        raise BoundError(exc.message, operation=operation, cause=exc) from exc  # type: ignore[arg-type]


def mt_bound_closed(traj: Trajectory, H_of_t: Optional[Callable[[float], ComplexMatrix]] = None) -> float:
    """ħ Θ(ρ_τ, ρ_0) / ⟨ΔE_t⟩."""
    require_state_trajectory(traj, "mt_bound_closed")
    theta = _angle(traj, "mt_bound_closed")
    if theta == 0.0:
        return 0.0
    hamiltonian = H_of_t or traj.generator.hamiltonian
    grid_H = np.stack([np.asarray(hamiltonian(float(t)), dtype=complex) for t in traj.times])
    energies = energy_stddev_stack(traj.samples, grid_H)
    if traj.break_indices:
        left_H = np.stack(
            [np.asarray(hamiltonian(float(np.nextafter(traj.times[b], -np.inf))), dtype=complex) for b in traj.break_indices]
        )
        left = energy_stddev_stack(traj.samples[list(traj.break_indices)], left_H)
        energies = np.concatenate([energies, left])
    quad = time_average(traj, energies, label="energy spread")
    if quad.average <= 0.0:
        raise BoundError("Zero energy spread with a nonzero Bures angle", operation="mt_bound_closed")
    return traj.generator.hbar * theta / quad.average


def dl_bound(traj: Trajectory) -> DLBoundResult:
    """sin²Θ over the smallest time-averaged Schatten norm of 𝕃ρ_t; the hs variant is reported as mt_open."""
    require_state_trajectory(traj, "dl_bound")
    theta = _angle(traj, "dl_bound")
    sin2 = math.sin(theta) ** 2
    derivatives = traj.all_derivatives()

    norms = {kind: stacked_schatten_norms(derivatives, kind) for kind in ("op", "tr", "hs")}
    if traj.dim == 2:
        gap = float(np.max(np.abs(norms["tr"] - 2.0 * norms["op"])))
        if gap > TRACE_OP_IDENTITY_TOL * max(1.0, float(np.max(norms["op"]))):
            raise BoundError("Trace norm is not twice the operator norm for a qubit generator", operation="dl_bound", residual=gap)

    averages = {kind: time_average(traj, values, label=f"{kind} norm of the generator").average for kind, values in norms.items()}
    if sin2 == 0.0:
        return DLBoundResult(value=0.0, winning_norm="op", mt_open=0.0, sin2_angle=0.0, averages=averages)

    candidates: dict[NormName, float] = {}
    for kind, avg in averages.items():
        if avg <= 0.0:
            raise BoundError(f"Zero {kind}-norm average with a nonzero Bures angle", operation="dl_bound")
        candidates[kind] = sin2 / avg  # type: ignore[index]
    winner = max(candidates, key=lambda k: candidates[k])
    logger.debug("DL bound candidates %s, winner %s", candidates, winner)
    return DLBoundResult(
        value=candidates[winner],
        winning_norm=winner,
        mt_open=candidates["hs"],
        sin2_angle=sin2,
        averages=averages,
    )
