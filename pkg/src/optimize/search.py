from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy.linalg import expm

from src.bounds.qsl import BoundEvaluator, delta_diagonal_basis
from src.bounds.types import BoundError, BoundForm, BoundResult
from src.core.config import settings
from src.dynamics.types import Trajectory
from src.operators.linalg import hermiticity_residual
from src.operators.sampling import haar_unitary, random_anti_hermitian, spawn_seeds
from src.operators.types import ComplexMatrix, WeightVector
from src.optimize.types import OptimizeConfig, OptimizeError, OptimumReport

logger = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DEGENERACY_RTOL = 1e-9
# Relative margin a refined p must gain over the grid optimum.
REFINE_RTOL = 1e-10


def optimize_w(
    traj: Trajectory,
    p: float,
    basis: Optional[npt.ArrayLike] = None,
    form: BoundForm = "integral",
    *,
    evaluator: Optional[BoundEvaluator] = None,
) -> tuple[int, float]:
    """Best 𝟙_j over j = 1..n²; the smallest j wins ties."""
    evaluator = evaluator or BoundEvaluator(traj, basis)
    best_j, best_value = 1, -math.inf
    for j in range(1, evaluator.size + 1):
        value = evaluator.evaluate_indicator(p, j, form).value
        if value > best_value:
            best_j, best_value = j, value
    return best_j, best_value


def _golden_max(fn, lo: float, hi: float, iters: int) -> tuple[float, float]:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def optimize_p(
    traj: Trajectory,
    w: WeightVector,
    basis: Optional[npt.ArrayLike] = None,
    form: BoundForm = "integral",
    p_grid: Optional[Sequence[float]] = None,
    *,
    evaluator: Optional[BoundEvaluator] = None,
    golden_iters: int = 20,
) -> tuple[float, float]:
    """Grid scan over p, then golden-section refinement inside the bracket around the grid argmax."""
    grid = list(p_grid) if p_grid is not None else OptimizeConfig().p_grid
    if not grid:
        raise OptimizeError("p_grid must not be empty", operation="optimize_p")
    evaluator = evaluator or BoundEvaluator(traj, basis)

    def bound_at(p: float) -> float:
        return evaluator.evaluate(p, w, form, diagnostics=False).value

    values = [bound_at(p) for p in grid]
    top = max(values)
    tol = REFINE_RTOL * max(1.0, abs(top))
    # First grid entry within tolerance of the maximum, so flat profiles keep grid[0].
    i = next(k for k, v in enumerate(values) if v >= top - tol)
    best_p, best_value = grid[i], values[i]
    if math.isinf(best_p) or golden_iters <= 0 or top - min(values) <= tol:
        return best_p, best_value

    lo = grid[i - 1] if i > 0 else grid[i]
    hi = grid[i + 1] if i + 1 < len(grid) and math.isfinite(grid[i + 1]) else grid[i]
    if hi <= lo:
        return best_p, best_value
    p_ref, v_ref = _golden_max(bound_at, lo, hi, golden_iters)
    if v_ref > best_value + tol:
        logger.debug("Golden refinement moved p from %s to %.6g (%.12g -> %.12g)", best_p, p_ref, best_value, v_ref)
        best_p, best_value = p_ref, v_ref
    return best_p, best_value


@dataclass
class _Incumbent:
    value: float = -math.inf
    p: float = 1.0
    j: int = 1
    basis: Optional[ComplexMatrix] = None
    tag: str = "canonical"
    result: Optional[BoundResult] = None
    seen: list[float] = field(default_factory=list)

    def offer(self, result: BoundResult, p: float, j: int, basis: ComplexMatrix, tag: str) -> bool:
        self.seen.append(result.value)
        if result.value > self.value:
            self.value, self.p, self.j, self.basis, self.tag, self.result = result.value, p, j, basis, tag, result
            return True
        return False


def basis_candidates(traj: Trajectory, cfg: OptimizeConfig) -> list[tuple[str, ComplexMatrix]]:
    """Canonical basis, the Δ(τ)-diagonalizing basis when Δ is Hermitian, then Haar samples."""
    n = traj.dim
    candidates: list[tuple[str, ComplexMatrix]] = [("canonical", np.eye(n, dtype=complex))]
    if n == 1:
        return candidates
    delta = traj.delta()
    if hermiticity_residual(delta) <= settings.HERMITIAN_TOL * max(1.0, float(np.max(np.abs(delta)))):
        candidates.append(("delta_diag", delta_diagonal_basis(traj)))
    for k, sub_seed in enumerate(spawn_seeds(cfg.seed, cfg.basis_samples)):
        candidates.append((f"haar:{cfg.seed}/{k}", haar_unitary(n, sub_seed)))
    return candidates


def _hillclimb_rng(cfg: OptimizeConfig) -> np.random.Generator:
    return np.random.default_rng(spawn_seeds(cfg.seed, cfg.basis_samples + 1)[-1])


def _climb(
    traj: Trajectory,
    start: ComplexMatrix,
    start_value: float,
    score,
    cfg: OptimizeConfig,
) -> tuple[ComplexMatrix, float, list[tuple[int, float]], int]:
    """U ← U·exp(εK); ε halves after ``stall_limit`` consecutive rejections."""
    rng = _hillclimb_rng(cfg)
    U, value = start, start_value
    history: list[tuple[int, float]] = [(0, value)]
    step, rejections, evaluations = cfg.hillclimb_step, 0, 0
    for iteration in range(1, cfg.hillclimb_iters + 1):
        K = random_anti_hermitian(traj.dim, rng)
        trial = U @ expm(step * K)
        trial_value = score(trial)
        evaluations += 1
        if trial_value > value:
            U, value = trial, trial_value
            history.append((iteration, value))
            rejections = 0
            logger.debug("Hill climb iteration %s accepted %.12g (step %.3g)", iteration, value, step)
        else:
            rejections += 1
            if rejections >= cfg.stall_limit:
                step /= 2.0
                rejections = 0
                if step < cfg.min_step:
                    break
    return U, value, history, evaluations


def optimize_basis(
    traj: Trajectory,
    p: float,
    w: WeightVector,
    form: BoundForm,
    cfg: OptimizeConfig,
) -> tuple[ComplexMatrix, float, list[tuple[int, float]]]:
    """Monte Carlo over bases followed by hill climbing from the best sample."""
    if traj.dim == 1:
        basis = np.eye(1, dtype=complex)
        return basis, BoundEvaluator(traj, basis).evaluate(p, w, form, strict=False).value, [(0, 0.0)]

    def score(U: ComplexMatrix) -> float:
        return BoundEvaluator(traj, U).evaluate(p, w, form, diagnostics=False).value

    best_basis, best_value = None, -math.inf
    for _, U in basis_candidates(traj, cfg):
        value = score(U)
        if value > best_value:
            best_basis, best_value = U, value
    assert best_basis is not None
    basis, value, history, _ = _climb(traj, best_basis, best_value, score, cfg)
    return basis, value, history


def _scan(incumbent: _Incumbent, evaluator: BoundEvaluator, p_grid: Sequence[float], form: BoundForm, tag: str) -> int:
    count = 0
    for p in p_grid:
        for j in range(1, evaluator.size + 1):
            result = evaluator.evaluate_indicator(p, j, form)
            incumbent.offer(result, p, j, evaluator.basis, tag)
            count += 1
    return count


def optimize_full(traj: Trajectory, cfg: Optional[OptimizeConfig] = None) -> OptimumReport:
    """Maximize the bound over (p, 𝟙_j, basis): exact w scan, p grid plus refinement, sampled and climbed bases."""
    cfg = cfg or OptimizeConfig()
    form = cfg.target_form
    incumbent = _Incumbent()
    evaluations = 0

    try:
        for tag, U in basis_candidates(traj, cfg):
            evaluations += _scan(incumbent, BoundEvaluator(traj, U, basis_tag=tag), cfg.p_grid, form, tag)
        logger.info(
            "Basis sampling best %.12g at p=%s, j=%s, basis %s", incumbent.value, incumbent.p, incumbent.j, incumbent.tag
        )

        history: list[tuple[int, float]] = [(0, incumbent.value)]
        if traj.dim > 1 and cfg.hillclimb_iters > 0:
            p_inc, w_inc = incumbent.p, WeightVector.indicator(incumbent.j, traj.dim**2)

            def score(U: ComplexMatrix) -> float:
                result = BoundEvaluator(traj, U).evaluate(p_inc, w_inc, form, diagnostics=False)
                incumbent.seen.append(result.value)
                return result.value

            assert incumbent.basis is not None
            climbed, climbed_value, history, climbs = _climb(traj, incumbent.basis, incumbent.value, score, cfg)
            evaluations += climbs
            if climbed_value > incumbent.value:
                tag = "climbed"
                evaluator = BoundEvaluator(traj, climbed, basis_tag=tag)
                incumbent.offer(evaluator.evaluate_indicator(incumbent.p, incumbent.j, form), incumbent.p, incumbent.j, climbed, tag)
                evaluations += 1 + _scan(incumbent, evaluator, cfg.p_grid, form, tag)

        assert incumbent.basis is not None
        evaluator = BoundEvaluator(traj, incumbent.basis, basis_tag=incumbent.tag)
        w_best = WeightVector.indicator(incumbent.j, evaluator.size)
        p_ref, v_ref = optimize_p(traj, w_best, form=form, p_grid=cfg.p_grid, evaluator=evaluator, golden_iters=cfg.golden_iters)
        evaluations += evaluator.evaluations
        if v_ref > incumbent.value:
            incumbent.offer(evaluator.evaluate(p_ref, w_best, form, strict=False), p_ref, incumbent.j, incumbent.basis, incumbent.tag)
    except BoundError as exc:
        raise OptimizeError(f"Bound evaluation failed during search: {exc.message}", operation="optimize_full", cause=exc) from exc

    final = BoundEvaluator(traj, incumbent.basis, basis_tag=incumbent.tag).evaluate(
        incumbent.p, WeightVector.indicator(incumbent.j, traj.dim**2), form, strict=False
    )
    threshold = incumbent.value - DEGENERACY_RTOL * max(1.0, abs(incumbent.value))
    degenerate = sum(1 for v in incumbent.seen if v >= threshold)
    logger.info(
        "Optimum %.12g at p=%s, j=%s, basis %s after %s evaluations",
        final.value,
        incumbent.p,
        incumbent.j,
        incumbent.tag,
        evaluations,
    )
    return OptimumReport(
        best_value=final.value,
        best_p=incumbent.p,
        best_w_index=incumbent.j,
        best_basis=incumbent.basis,
        best_result=final,
        form=form,
        basis_tag=incumbent.tag,
        history=tuple(history),
        degenerate_optima_count=max(1, degenerate),
        evaluations=evaluations,
    )
