from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional

import numpy as np
import numpy.typing as npt

from src.bounds.quadrature import time_average
from src.bounds.types import BoundError, BoundForm, BoundResult, BoundSpec
from src.core.config import settings
from src.dynamics.types import Trajectory
from src.operators.linalg import hermitian_eig
from src.operators.norms import arrow_norm, check_basis, seminorm_values, vectorize, vectorize_stack
from src.operators.types import OperatorError, WeightVector

logger = logging.getLogger(__name__)


class BoundEvaluator:
    """Evaluates τ_int / τ_sup for one trajectory in one representation basis.

    The basis change of Δ(τ) and of every derivative sample is done once, so
    many (p, w) pairs can be scanned cheaply.
    """

    def __init__(self, traj: Trajectory, basis: Optional[npt.ArrayLike] = None, *, basis_tag: str = "canonical"):
        self.traj = traj
        self.tau = traj.tau
        self.basis_tag = basis_tag
        try:
            self.basis = check_basis(basis, traj.dim)
        except OperatorError as exc:
            raise BoundError(exc.message, operation="qsl_bound", residual=exc.residual, cause=exc) from exc
        self.delta = vectorize(traj.delta(), self.basis, basis_tag=basis_tag)
        self.derivative_moduli = np.abs(vectorize_stack(traj.all_derivatives(), self.basis))
        self.evaluations = 0

    @property
    def size(self) -> int:
        return len(self.delta)

    def evaluate(
        self,
        p: float,
        w: WeightVector,
        form: BoundForm = "integral",
        *,
        diagnostics: bool = True,
        strict: Optional[bool] = None,
    ) -> BoundResult:
        """``strict`` (default ``STRICT_QUADRATURE``) turns an under-resolved time average into a BoundError."""
        strict = settings.STRICT_QUADRATURE if strict is None else strict
        self.evaluations += 1
        try:
            matched = arrow_norm(self.delta, w, p)
        except OperatorError as exc:
            raise BoundError(exc.message, operation="qsl_bound", cause=exc) from exc
        numerator = matched.value
        if numerator == 0.0:
            return BoundResult(
                value=0.0,
                numerator=0.0,
                denominator=0.0,
                wbar=matched,
                form=form,
                p=p,
                tau=self.tau,
                basis_tag=self.basis_tag,
                w_index=w.indicator_index(),
                trivial=True,
            )

        best: Optional[tuple[float, float, float, float, float]] = None
        candidate_values: list[float] = []
        best_index = 0
        for idx, weights_at in enumerate(matched.candidates):
            per_time = seminorm_values(self.derivative_moduli, weights_at, p)
            quad = time_average(
                self.traj,
                per_time,
                label="matched seminorm",
                diagnostics=diagnostics,
                strict=strict and form == "integral",
            )
            if quad.average <= 0.0:
                raise BoundError(
                    "Zero denominator with nonzero numerator: derivatives inconsistent with Δ(τ)",
                    operation="qsl_bound",
                )
            tau_int = numerator / quad.average
            tau_sup = numerator / quad.maximum
            if tau_int < tau_sup - settings.TAU_SLACK * max(1.0, self.tau):
                raise BoundError(
                    f"Integral form {tau_int} fell below supremum form {tau_sup}",
                    operation="qsl_bound",
                    residual=tau_sup - tau_int,
                )
            value = tau_int if form == "integral" else tau_sup
            candidate_values.append(value)
            if best is None or value > best[0]:
                best = (value, quad.average if form == "integral" else quad.maximum, tau_int, tau_sup, quad.residual)
                best_index = idx

        assert best is not None
        value, denominator, tau_int, tau_sup, residual = best
        if diagnostics and value > self.tau + settings.TAU_SLACK:
            logger.warning("Bound %.9g exceeds evolution time %.9g (p=%s, basis=%s)", value, self.tau, p, self.basis_tag)
        wbar = matched
        if best_index:
            wbar = replace(matched, weights_at=matched.candidates[best_index])
        return BoundResult(
            value=value,
            numerator=numerator,
            denominator=denominator,
            wbar=wbar,
            form=form,
            p=p,
            tau=self.tau,
            integral_value=tau_int,
            supremum_value=tau_sup,
            basis_tag=self.basis_tag,
            w_index=w.indicator_index(),
            quadrature_residual=residual,
            candidate_values=tuple(candidate_values),
        )

    def evaluate_indicator(self, p: float, j: int, form: BoundForm = "integral", *, diagnostics: bool = False) -> BoundResult:
        return self.evaluate(p, WeightVector.indicator(j, self.size), form, diagnostics=diagnostics)


def qsl_bound(traj: Trajectory, spec: BoundSpec) -> BoundResult:
    """τ_int or τ_sup of ``traj`` at (p, w, basis)."""
    if spec.w.size != traj.dim**2:
        raise BoundError(f"Weight length {spec.w.size} != n² = {traj.dim ** 2}", operation="qsl_bound")
    evaluator = BoundEvaluator(traj, spec.basis, basis_tag=spec.basis_tag)
    return evaluator.evaluate(spec.p, spec.w, spec.form)


def energy_basis(traj: Trajectory) -> npt.NDArray[np.complex128]:
    """Eigenbasis of H(0), columns ordered by ascending energy."""
    H = np.asarray(traj.generator.hamiltonian(float(traj.times[0])), dtype=complex)
    _, vectors = hermitian_eig(H)
    return np.ascontiguousarray(vectors[:, ::-1])


def delta_diagonal_basis(traj: Trajectory) -> npt.NDArray[np.complex128]:
    """Eigenbasis of the Hermitian part of Δ(τ)."""
    delta = traj.delta()
    _, vectors = hermitian_eig(0.5 * (delta + delta.conj().T))
    return vectors
