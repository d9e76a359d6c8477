from __future__ import annotations

import logging
from typing import Optional

import numpy as np
import numpy.typing as npt
from scipy.integrate import simpson, trapezoid

from src.bounds.types import BoundError, QuadratureResult
from src.core.config import settings
from src.dynamics.types import Trajectory

logger = logging.getLogger(__name__)


def split_pieces(traj: Trajectory, values_all: npt.ArrayLike) -> list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]]:
    """Cut per-node values into smooth pieces.

    ``values_all`` follows ``Trajectory.all_derivatives()``: one value per grid node,
    then one left-limit value per break index. A piece ending at a break uses the left limit.
    """
    values_all = np.asarray(values_all, dtype=float)
    K = traj.times.size
    if values_all.shape[0] != K + len(traj.break_indices):
        raise BoundError(
            f"Expected {K + len(traj.break_indices)} values, got {values_all.shape[0]}", operation="quadrature"
        )
    grid_values, left_values = values_all[:K], values_all[K:]
    edges = [0, *traj.break_indices, K - 1]
    pieces = []
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        vals = np.array(grid_values[a : b + 1])
        if k < len(traj.break_indices):
            vals[-1] = left_values[k]
        pieces.append((np.asarray(traj.times[a : b + 1]), vals))
    return pieces


def _simpson_half(x: npt.NDArray[np.float64], y: npt.NDArray[np.float64]) -> Optional[float]:
    idx = list(range(0, x.size, 2))
    if idx[-1] != x.size - 1:
        idx.append(x.size - 1)
    if len(idx) < 3:
        return None
    return float(simpson(y[idx], x=x[idx]))


def time_average(
    traj: Trajectory,
    values_all: npt.ArrayLike,
    *,
    label: str = "integrand",
    diagnostics: bool = True,
    strict: bool = False,
) -> QuadratureResult:
    """(1/τ)∫ of a sampled integrand by composite Simpson per smooth piece.

    The residual compares against the same rule on every second node; above
    ``QUADRATURE_RTOL`` it raises when ``strict`` and warns otherwise.
    """
    pieces = split_pieces(traj, values_all)
    integral = 0.0
    coarse = 0.0
    coarse_ok = True
    for x, y in pieces:
        integral += float(simpson(y, x=x)) if x.size > 2 else float(trapezoid(y, x=x))
        if diagnostics:
            half = _simpson_half(x, y)
            if half is None:
                coarse_ok = False
            else:
                coarse += half
    maximum = float(np.max(np.asarray(values_all, dtype=float)))
    if not np.isfinite(integral) or not np.isfinite(maximum):
        raise BoundError(f"Non-finite {label} encountered", operation="quadrature")

    residual = 0.0
    if diagnostics and coarse_ok:
        scale = abs(integral)
        residual = abs(integral - coarse) / scale if scale > 0 else abs(coarse)
        if residual > settings.QUADRATURE_RTOL:
            if strict:
                raise BoundError(
                    f"Quadrature of {label} is under-resolved (relative residual {residual:.3e}); "
                    "increase grid_points or set STRICT_QUADRATURE=false",
                    operation="quadrature",
                    residual=residual,
                )
            logger.warning("Quadrature of %s: relative residual %.3e above %.1e", label, residual, settings.QUADRATURE_RTOL)
    return QuadratureResult(integral=integral, average=integral / traj.tau, residual=residual, maximum=maximum)
