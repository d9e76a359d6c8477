"""Closed-form trajectories for the preset systems, plus matrix-exponential references."""

from __future__ import annotations

import logging
import math
from typing import Callable, Mapping, Optional

import numpy as np
import numpy.typing as npt
from scipy.linalg import expm

from src.dynamics.generators import generator_stack
from src.dynamics.types import DynamicsError, GeneratorSpec, Trajectory
from src.operators.linalg import SIGMA_X, SIGMA_Y, SIGMA_Z

logger = logging.getLogger(__name__)

MIN_GRID_POINTS = 64

QUBIT_ENERGIES = np.array([0.0, 1.0])
QUDIT_ENERGIES = np.array([0.0, 1.0, math.pi, 4.0])
QUDIT_POPULATIONS = np.array([0.2, 0.4, 0.3, 0.1])

EMISSION_JUMP = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
PLUS_STATE = np.full((2, 2), 0.5, dtype=complex)
GROUND_STATE = np.array([[1, 0], [0, 0]], dtype=complex)


def _times(t: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.atleast_1d(np.asarray(t, dtype=float))


def _damped_terms(gamma: float, t: npt.NDArray[np.float64]) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """(cos Ωt, sin(Ωt)/Ω) for Ω = sqrt(4 − γ²/4), continued to cosh/sinh past critical damping."""
    disc = 4.0 - gamma**2 / 4.0
    if disc > 0:
        omega = math.sqrt(disc)
        return np.cos(omega * t), t * np.sinc(omega * t / math.pi)
    if disc < 0:
        kappa = math.sqrt(-disc)
        return np.cosh(kappa * t), np.sinh(kappa * t) / kappa
    return np.ones_like(t), t.copy()


# -- generators ------------------------------------------------------------------------------


def spontaneous_emission_generator(gamma: float) -> GeneratorSpec:
    return GeneratorSpec.constant(np.zeros((2, 2)), ((EMISSION_JUMP, gamma),), name="spontaneous_emission")


def dephasing_generator(gamma: float, *, picture: str = "heisenberg") -> GeneratorSpec:
    """H = σx with σz dephasing at rate γ/2."""
    return GeneratorSpec.constant(SIGMA_X, ((SIGMA_Z, gamma / 2.0),), picture=picture, name="dephasing")  # type: ignore[arg-type]


def diagonal_generator(energies: npt.ArrayLike, *, hbar: float = 1.0, name: str = "diagonal") -> GeneratorSpec:
    return GeneratorSpec.constant(np.diag(np.asarray(energies, dtype=complex)), hbar=hbar, name=name)


# -- closed forms ----------------------------------------------------------------------------


def spontaneous_emission_state(gamma: float, t: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    t = _times(t)
    decay = np.exp(-gamma * t)
    out = np.empty((t.size, 2, 2), dtype=complex)
    out[:, 0, 0] = 1.0 - decay / 2.0
    out[:, 1, 1] = decay / 2.0
    out[:, 0, 1] = out[:, 1, 0] = np.exp(-gamma * t / 2.0) / 2.0
    return out


def dephasing_observable(gamma: float, t: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    """σy evolved by the adjoint dephasing generator: a_y σy + a_z σz."""
    t = _times(t)
    envelope = np.exp(-gamma * t / 2.0)
    cos_term, sin_term = _damped_terms(gamma, t)
    a_y = envelope * (cos_term - 0.5 * gamma * sin_term)
    a_z = -2.0 * envelope * sin_term
    return a_y[:, None, None] * SIGMA_Y + a_z[:, None, None] * SIGMA_Z


def coherence_state(gamma: float, t: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    """|0><0| evolved by the dephasing generator: Bloch vector (0, y, z)."""
    t = _times(t)
    envelope = np.exp(-gamma * t / 2.0)
    cos_term, sin_term = _damped_terms(gamma, t)
    z = envelope * (cos_term + 0.5 * gamma * sin_term)
    y = -2.0 * envelope * sin_term
    eye = np.eye(2, dtype=complex)
    return 0.5 * (eye + y[:, None, None] * SIGMA_Y + z[:, None, None] * SIGMA_Z)


def fixed_frequency_dephasing_observable(gamma: float, t: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    """The commonly quoted form with oscillation frequency fixed at 2 (exact only as γ → 0)."""
    t = _times(t)
    envelope = np.exp(-gamma * t / 2.0)
    s, c = np.sin(2 * t), np.cos(2 * t)
    off = 1j * (gamma / 4.0 * s - c)
    out = np.empty((t.size, 2, 2), dtype=complex)
    out[:, 0, 0] = -envelope * s
    out[:, 1, 1] = envelope * s
    out[:, 0, 1] = envelope * off
    out[:, 1, 0] = -envelope * off
    return out


def fixed_frequency_coherence_state(gamma: float, t: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    t = _times(t)
    envelope = np.exp(-gamma * t / 2.0)
    s, c = np.sin(2 * t), np.cos(2 * t)
    diag = envelope * (0.5 * c + gamma / 8.0 * s)
    out = np.empty((t.size, 2, 2), dtype=complex)
    out[:, 0, 0] = 0.5 + diag
    out[:, 1, 1] = 0.5 - diag
    out[:, 0, 1] = 0.5j * envelope * s
    out[:, 1, 0] = -0.5j * envelope * s
    return out


def pure_diagonal_evolution(
    energies: npt.ArrayLike, populations: npt.ArrayLike, t: npt.ArrayLike, *, hbar: float = 1.0
) -> npt.NDArray[np.complex128]:
    """|ψ_t><ψ_t| for ψ_t = Σ sqrt(p_j) e^{−i E_j t/ħ} |E_j>."""
    t = _times(t)
    amplitudes = np.sqrt(np.asarray(populations, dtype=float))
    phases = np.exp(-1j * np.outer(t, np.asarray(energies, dtype=float)) / hbar)
    psi = amplitudes[None, :] * phases
    return psi[:, :, None] * psi.conj()[:, None, :]


def qubit_state(t: npt.ArrayLike, *, hbar: float = 1.0) -> npt.NDArray[np.complex128]:
    return pure_diagonal_evolution(QUBIT_ENERGIES, [0.5, 0.5], t, hbar=hbar)


def qudit4_state(t: npt.ArrayLike, *, hbar: float = 1.0) -> npt.NDArray[np.complex128]:
    return pure_diagonal_evolution(QUDIT_ENERGIES, QUDIT_POPULATIONS, t, hbar=hbar)


def qudit4_fidelity(tau: float, *, hbar: float = 1.0) -> float:
    """|Σ p_j e^{−i E_j τ/ħ}|, the overlap between initial and final qudit states."""
    return float(abs(np.sum(QUDIT_POPULATIONS * np.exp(-1j * QUDIT_ENERGIES * tau / hbar))))


# -- trajectory assembly ---------------------------------------------------------------------


def _gamma(params: Mapping[str, float]) -> float:
    if "gamma" not in params:
        raise DynamicsError("Parameter 'gamma' is required", operation="analytic_trajectory")
    gamma = float(params["gamma"])
    if not (math.isfinite(gamma) and gamma >= 0):
        raise DynamicsError(f"gamma must be finite and >= 0, got {gamma}", operation="analytic_trajectory")
    return gamma


def _closed_form(name: str, params: Mapping[str, float]) -> tuple[Callable[[npt.NDArray[np.float64]], npt.NDArray[np.complex128]], GeneratorSpec]:
    hbar = float(params.get("hbar", 1.0))
    if name == "spontaneous_emission":
        gamma = _gamma(params)
        return (lambda t: spontaneous_emission_state(gamma, t)), spontaneous_emission_generator(gamma)
    if name == "dephasing_observable":
        gamma = _gamma(params)
        return (lambda t: dephasing_observable(gamma, t)), dephasing_generator(gamma, picture="heisenberg")
    if name == "coherence_state":
        gamma = _gamma(params)
        return (lambda t: coherence_state(gamma, t)), dephasing_generator(gamma, picture="schrodinger")
    if name == "qubit_time_independent":
        return (lambda t: qubit_state(t, hbar=hbar)), diagonal_generator(QUBIT_ENERGIES, hbar=hbar, name="qubit")
    if name == "qudit4":
        return (lambda t: qudit4_state(t, hbar=hbar)), diagonal_generator(QUDIT_ENERGIES, hbar=hbar, name="qudit4")
    raise DynamicsError(f"Unknown closed-form trajectory: {name}", operation="analytic_trajectory")


ANALYTIC_NAMES = ("spontaneous_emission", "dephasing_observable", "coherence_state", "qubit_time_independent", "qudit4")


def analytic_trajectory(name: str, params: Mapping[str, float], tau: float, grid_points: int) -> Trajectory:
    if grid_points < MIN_GRID_POINTS:
        raise DynamicsError(f"grid_points must be >= {MIN_GRID_POINTS}, got {grid_points}", operation="analytic_trajectory")
    if not (math.isfinite(tau) and tau > 0):
        raise DynamicsError(f"tau must be finite and positive, got {tau}", operation="analytic_trajectory")
    closed_form, gen = _closed_form(name, params)
    times = np.linspace(0.0, float(tau), int(grid_points))
    samples = closed_form(times)
    derivatives = generator_stack(samples, times, gen)
    logger.debug("Built closed-form %s trajectory on %s points up to %s", name, grid_points, tau)
    return Trajectory(
        times=times,
        samples=samples,
        derivatives=derivatives,
        source="analytic",
        generator=gen,
        name=name,
    )


def piecewise_unitary_reference(
    gen: GeneratorSpec, initial: npt.ArrayLike, times: npt.ArrayLike, *, segment_edges: Optional[npt.ArrayLike] = None
) -> npt.NDArray[np.complex128]:
    """Exact ρ(t) = U(t) ρ0 U(t)† for a closed, piecewise-constant generator, at each requested time."""
    if not gen.is_closed or not gen.piecewise_constant:
        raise DynamicsError("Unitary reference needs a closed piecewise-constant generator", operation="analytic_trajectory")
    times = np.asarray(times, dtype=float)
    edges = sorted({0.0, *map(float, gen.switch_times)} if segment_edges is None else set(map(float, segment_edges)))
    rho0 = np.asarray(initial, dtype=complex)
    out = np.empty((times.size, gen.dim, gen.dim), dtype=complex)
    for k, t in enumerate(times):
        U = np.eye(gen.dim, dtype=complex)
        cursor = 0.0
        for a in edges[1:] + [math.inf]:
            stop = min(a, t)
            if stop > cursor:
                H = np.asarray(gen.hamiltonian(cursor), dtype=complex)
                U = expm(-1j * H * (stop - cursor) / gen.hbar) @ U
                cursor = stop
            if a >= t:
                break
        out[k] = U @ rho0 @ U.conj().T
    return out

