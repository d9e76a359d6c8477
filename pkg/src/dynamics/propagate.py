from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import numpy.typing as npt

from src.core.config import settings
from src.dynamics.generators import apply_generator, liouvillian
from src.dynamics.types import DynamicsError, GeneratorSpec, Trajectory
from src.operators.types import ComplexMatrix

logger = logging.getLogger(__name__)

MIN_BASE_STEPS = 16


@dataclass(frozen=True, slots=True)
class _Segment:
    start: float
    stop: float
    base_steps: int

    def grid(self, level: int) -> npt.NDArray[np.float64]:
        return np.linspace(self.start, self.stop, self.base_steps * 2**level + 1)


def _segments(gen: GeneratorSpec, tau: float, base_steps: int) -> list[_Segment]:
    cuts = sorted({float(s) for s in gen.switch_times if 0.0 < s < tau})
    edges = [0.0, *cuts, float(tau)]
    return [
        _Segment(a, b, max(2, math.ceil(base_steps * (b - a) / tau)))
        for a, b in zip(edges[:-1], edges[1:])
    ]


def _rk4_polynomial(G: npt.NDArray[np.complex128], h: float) -> npt.NDArray[np.complex128]:
    """One classic RK4 step of dv/dt = G v is exactly v ← (I + hG + (hG)²/2 + (hG)³/6 + (hG)⁴/24) v."""
    hG = h * G
    eye = np.eye(G.shape[0], dtype=complex)
    hG2 = hG @ hG
    return eye + hG + hG2 / 2 + hG2 @ hG / 6 + hG2 @ hG2 / 24


class _Integrator:
    """RK4 over a segmented grid. Each segment is smooth; the grid always contains the segment edges."""

    def __init__(self, gen: GeneratorSpec, initial: ComplexMatrix, segments: list[_Segment]):
        self.gen = gen
        self.initial = initial
        self.segments = segments
        self.n = gen.dim

    def _segment_generator(self, seg: _Segment) -> npt.NDArray[np.complex128]:
        return liouvillian(self.gen, 0.5 * (seg.start + seg.stop))

    def run(self, level: int) -> tuple[list[npt.NDArray[np.float64]], list[npt.NDArray[np.complex128]], list[ComplexMatrix]]:
        """Returns per-segment (times, samples, left-limit derivative at the segment end)."""
        all_times, all_samples, left_limits = [], [], []
        current = self.initial
        for seg in self.segments:
            times = seg.grid(level)
            if self.gen.piecewise_constant:
                samples, left = self._run_linear(seg, times, current)
            else:
                samples, left = self._run_general(seg, times, current)
            if not np.all(np.isfinite(samples)):
                raise DynamicsError("Non-finite values encountered during propagation", operation="propagate")
            all_times.append(times)
            all_samples.append(samples)
            left_limits.append(left)
            current = samples[-1]
        return all_times, all_samples, left_limits

    def _run_linear(self, seg: _Segment, times: npt.NDArray[np.float64], start: ComplexMatrix):
        G = self._segment_generator(seg)
        step = _rk4_polynomial(G, float(times[1] - times[0]))
        out = np.empty((times.size, self.n * self.n), dtype=complex)
        out[0] = start.reshape(-1)
        for k in range(1, times.size):
            out[k] = step @ out[k - 1]
        left = (G @ out[-1]).reshape(self.n, self.n)
        return out.reshape(times.size, self.n, self.n), left

    def _run_general(self, seg: _Segment, times: npt.NDArray[np.float64], start: ComplexMatrix):
        gen = self.gen
        out = np.empty((times.size, self.n, self.n), dtype=complex)
        out[0] = start
        end_left = np.nextafter(seg.stop, -np.inf)
        for k in range(times.size - 1):
            t, h = float(times[k]), float(times[k + 1] - times[k])
            t_end = float(times[k + 1]) if k + 1 < times.size - 1 else end_left
            y = out[k]
            k1 = apply_generator(y, gen, t)
            k2 = apply_generator(y + 0.5 * h * k1, gen, t + 0.5 * h)
            k3 = apply_generator(y + 0.5 * h * k2, gen, t + 0.5 * h)
            k4 = apply_generator(y + h * k3, gen, t_end)
            out[k + 1] = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        left = apply_generator(out[-1], gen, end_left)
        return out, left


def propagate(
    gen: GeneratorSpec,
    initial: npt.ArrayLike,
    tau: float,
    base_steps: Optional[int] = None,
    *,
    min_grid_points: Optional[int] = None,
    tol: Optional[float] = None,
    max_steps: Optional[int] = None,
) -> Trajectory:
    """Integrate gen from ``initial`` over [0, tau] with RK4, doubling the grid until the final sample settles."""
    base_steps = settings.RK4_BASE_STEPS if base_steps is None else int(base_steps)
    tol = settings.RK4_CONVERGENCE_TOL if tol is None else tol
    max_steps = settings.RK4_MAX_STEPS if max_steps is None else max_steps
    if base_steps < MIN_BASE_STEPS:
        raise DynamicsError(f"base_steps must be >= {MIN_BASE_STEPS}, got {base_steps}", operation="propagate")
    if not (math.isfinite(tau) and tau > 0):
        raise DynamicsError(f"tau must be finite and positive, got {tau}", operation="propagate")
    start = np.asarray(initial, dtype=complex)
    if start.shape != (gen.dim, gen.dim):
        raise DynamicsError(f"Initial operator shape {start.shape} != ({gen.dim}, {gen.dim})", operation="propagate")

    segments = _segments(gen, tau, base_steps)
    integrator = _Integrator(gen, start, segments)
    min_points = min_grid_points or 0

    level = 0
    previous = integrator.run(level)
    residual = math.inf
    while True:
        level += 1
        steps = sum(seg.base_steps for seg in segments) * 2**level
        if steps > max_steps:
            raise DynamicsError(
                f"RK4 did not converge within {max_steps} steps (last change {residual:.3e})",
                operation="propagate",
                residual=residual,
            )
        current = integrator.run(level)
        residual = float(np.linalg.norm(current[1][-1][-1] - previous[1][-1][-1]))
        logger.debug("RK4 level %s: %s steps, final-sample change %.3e", level, steps, residual)
        previous = current
        if residual < tol and steps + 1 >= min_points:
            break

    times_parts, sample_parts, left_limits = previous
    logger.info("Propagation of %s converged at %s steps (change %.3e)", gen.name, steps, residual)
    return _assemble(gen, times_parts, sample_parts, left_limits, steps=steps, residual=residual)


def _assemble(gen, times_parts, sample_parts, left_limits, *, steps: int, residual: float) -> Trajectory:
    times = [times_parts[0]]
    samples = [sample_parts[0]]
    break_indices: list[int] = []
    offset = times_parts[0].size - 1
    for t_part, s_part in zip(times_parts[1:], sample_parts[1:]):
        break_indices.append(offset)
        times.append(t_part[1:])
        samples.append(s_part[1:])
        offset += t_part.size - 1
    all_times = np.concatenate(times)
    all_samples = np.concatenate(samples, axis=0)
    derivatives = np.stack([apply_generator(M, gen, float(t)) for M, t in zip(all_samples, all_times)])
    left = np.stack(left_limits[:-1]) if break_indices else None
    return Trajectory(
        times=all_times,
        samples=all_samples,
        derivatives=derivatives,
        source="integrated",
        generator=gen,
        break_indices=tuple(break_indices),
        left_derivatives=left,
        name=gen.name,
        meta={"steps": float(steps), "residual": residual},
    )
