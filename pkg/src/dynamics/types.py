from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np
import numpy.typing as npt

from src.core.config import settings
from src.operators.linalg import hermiticity_residual
from src.operators.types import ComplexMatrix

Picture = Literal["schrodinger", "heisenberg"]
TrajectorySource = Literal["analytic", "integrated"]


class DynamicsError(RuntimeError):
    def __init__(
        self,
        message: str,
        *,
        operation: Literal["generator", "lindblad_rhs", "adjoint_rhs", "propagate", "analytic_trajectory", "trajectory"],
        residual: Optional[float] = None,
        cause: Optional[BaseException] = None,
    ):
        super().__init__(message)
        self.message = message
        self.operation = operation
        self.residual = residual
        self.cause = cause


@dataclass(frozen=True, slots=True)
class GeneratorSpec:
    """A GKSL generator: Hamiltonian H(t) in energy units (the commutator carries 1/ħ), jump operators with rates.

    ``piecewise_constant`` declares H constant between consecutive ``switch_times``;
    H(t) at a switch time belongs to the later segment.
    """

    hamiltonian: Callable[[float], ComplexMatrix]
    dim: int
    jump_operators: tuple[tuple[ComplexMatrix, float], ...] = ()
    picture: Picture = "schrodinger"
    hbar: float = 1.0
    switch_times: tuple[float, ...] = ()
    piecewise_constant: bool = False
    name: str = "generator"

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DynamicsError(f"Dimension must be positive, got {self.dim}", operation="generator")
        if not self.hbar > 0:
            raise DynamicsError(f"hbar must be positive, got {self.hbar}", operation="generator")
        for L, rate in self.jump_operators:
            if np.shape(L) != (self.dim, self.dim):
                raise DynamicsError(f"Jump operator shape {np.shape(L)} != ({self.dim}, {self.dim})", operation="generator")
            if not (np.isfinite(rate) and rate >= 0):
                raise DynamicsError(f"Jump rate must be finite and >= 0, got {rate}", operation="generator")
        self.check_hamiltonian(0.0)

    @classmethod
    def constant(
        cls,
        H: npt.ArrayLike,
        jumps: tuple[tuple[npt.ArrayLike, float], ...] = (),
        *,
        picture: Picture = "schrodinger",
        hbar: float = 1.0,
        name: str = "generator",
    ) -> "GeneratorSpec":
        H_arr = np.array(H, dtype=complex)
        H_arr.setflags(write=False)
        return cls(
            hamiltonian=lambda t: H_arr,
            dim=H_arr.shape[0],
            jump_operators=tuple((np.asarray(L, dtype=complex), float(rate)) for L, rate in jumps),
            picture=picture,
            hbar=hbar,
            piecewise_constant=True,
            name=name,
        )

    def check_hamiltonian(self, t: float) -> ComplexMatrix:
        H = np.asarray(self.hamiltonian(t), dtype=complex)
        if H.shape != (self.dim, self.dim):
            raise DynamicsError(f"H({t}) has shape {H.shape}, expected ({self.dim}, {self.dim})", operation="generator")
        residual = hermiticity_residual(H)
        if residual > settings.HERMITIAN_TOL:
            raise DynamicsError(f"H({t}) is not Hermitian", operation="generator", residual=residual)
        return H

    def with_picture(self, picture: Picture) -> "GeneratorSpec":
        return GeneratorSpec(
            hamiltonian=self.hamiltonian,
            dim=self.dim,
            jump_operators=self.jump_operators,
            picture=picture,
            hbar=self.hbar,
            switch_times=self.switch_times,
            piecewise_constant=self.piecewise_constant,
            name=self.name,
        )

    @property
    def is_closed(self) -> bool:
        return all(rate == 0 for _, rate in self.jump_operators)


@dataclass(frozen=True, slots=True)
class TrajectoryPiece:
    """A smooth stretch of a trajectory. ``eval_times`` is where H is sampled (left limit at a switch)."""

    times: npt.NDArray[np.float64]
    samples: npt.NDArray[np.complex128]
    derivatives: npt.NDArray[np.complex128]
    eval_times: npt.NDArray[np.float64]


@dataclass(frozen=True, slots=True)
class Trajectory:
    times: npt.NDArray[np.float64]
    samples: npt.NDArray[np.complex128]
    derivatives: npt.NDArray[np.complex128]
    source: TrajectorySource
    generator: GeneratorSpec
    break_indices: tuple[int, ...] = ()
    left_derivatives: Optional[npt.NDArray[np.complex128]] = None
    name: str = ""
    meta: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise DynamicsError("A trajectory needs at least two time points", operation="trajectory")
        if np.any(np.diff(times) <= 0):
            raise DynamicsError("Trajectory times must be strictly increasing", operation="trajectory")
        if self.samples.shape[0] != times.size or self.derivatives.shape[0] != times.size:
            raise DynamicsError("samples, derivatives and times must have equal length", operation="trajectory")
        if self.break_indices:
            if self.left_derivatives is None or len(self.left_derivatives) != len(self.break_indices):
                raise DynamicsError("Each break index needs a left-limit derivative", operation="trajectory")
            if any(not 0 < b < times.size - 1 for b in self.break_indices):
                raise DynamicsError("Break indices must be interior grid points", operation="trajectory")
        for arr in (times, self.samples, self.derivatives):
            arr.setflags(write=False)

    @property
    def tau(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def dim(self) -> int:
        return int(self.samples.shape[-1])

    @property
    def picture(self) -> Picture:
        return self.generator.picture

    @property
    def initial(self) -> ComplexMatrix:
        return self.samples[0]

    @property
    def final(self) -> ComplexMatrix:
        return self.samples[-1]

    def delta(self) -> ComplexMatrix:
        """Final minus initial operator."""
        return self.samples[-1] - self.samples[0]

    def all_derivatives(self) -> npt.NDArray[np.complex128]:
        """Grid derivatives plus the left limits at switch nodes (used for suprema)."""
        if self.left_derivatives is None or not self.break_indices:
            return self.derivatives
        return np.concatenate([self.derivatives, self.left_derivatives], axis=0)

    def pieces(self) -> list[TrajectoryPiece]:
        edges = [0, *self.break_indices, self.times.size - 1]
        out: list[TrajectoryPiece] = []
        for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
            derivs = np.array(self.derivatives[a : b + 1])
            eval_times = np.array(self.times[a : b + 1])
            if k < len(self.break_indices):
                assert self.left_derivatives is not None
                derivs[-1] = self.left_derivatives[k]
                eval_times[-1] = np.nextafter(eval_times[-1], -np.inf)
            out.append(
                TrajectoryPiece(
                    times=np.array(self.times[a : b + 1]),
                    samples=np.array(self.samples[a : b + 1]),
                    derivatives=derivs,
                    eval_times=eval_times,
                )
            )
        return out

    def hamiltonians(self, eval_times: npt.ArrayLike) -> npt.NDArray[np.complex128]:
        return np.stack([np.asarray(self.generator.hamiltonian(float(t)), dtype=complex) for t in np.asarray(eval_times)])

    def check_states(self) -> None:
        """Trace and Hermiticity of every sample, for density-matrix trajectories."""
        traces = np.real(np.trace(self.samples, axis1=1, axis2=2))
        trace_err = float(np.max(np.abs(traces - 1.0)))
        if trace_err > settings.TRACE_TOL:
            raise DynamicsError("Trajectory samples are not unit trace", operation="trajectory", residual=trace_err)
        herm = float(np.max(np.abs(self.samples - np.conj(np.swapaxes(self.samples, 1, 2)))))
        if herm > settings.TRACE_TOL:
            raise DynamicsError("Trajectory samples are not Hermitian", operation="trajectory", residual=herm)
