from __future__ import annotations

import logging
import math
from typing import Callable, Dict, Optional

import numpy as np
import numpy.typing as npt

from src.dynamics import analytic
from src.dynamics.propagate import propagate
from src.dynamics.types import DynamicsError, GeneratorSpec, Trajectory
from src.operators.linalg import SIGMA_Z
from src.operators.states import pure_state_projector, purity
from src.operators.types import ComplexMatrix
from src.scenarios.registry import ScenarioRegistry, get_registry
from src.scenarios.types import AnalyticCheck, ScenarioBuild, ScenarioConfig, ScenarioError

logger = logging.getLogger(__name__)

# Largest evolution time up to which the optimized integral bound was reported to saturate for qudit4.
QUDIT_CRITICAL_TAU = 3.43

TRAJECTORY_CHECK_TOL = 1e-7
PURITY_CHECK_TOL = 1e-8
FIDELITY_CHECK_TOL = 1e-7


def spin1_operators() -> tuple[ComplexMatrix, ComplexMatrix, ComplexMatrix]:
    """S_x, S_y, S_z in the basis (|m=+1>, |m=0>, |m=-1>)."""
    r = 1.0 / math.sqrt(2.0)
    Sx = r * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    Sy = r * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    Sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return Sx, Sy, Sz


def nv_generator(params: Dict[str, float], tau: float) -> GeneratorSpec:
    """H0 = D S_z² + γe B0 S_z plus γe B1 S_x before τ/2 and γe B1 S_y from τ/2 on (ħ = 1, rad/ns)."""
    Sx, Sy, Sz = spin1_operators()
    D, gamma_e, B0 = params["D"], params["gamma_e"], params["B0"]
    B1 = nv_drive_field(params)
    H0 = D * Sz @ Sz + gamma_e * B0 * Sz
    first = H0 + gamma_e * B1 * Sx
    second = H0 + gamma_e * B1 * Sy
    half = 0.5 * tau
    for H in (first, second):
        H.setflags(write=False)

    def hamiltonian(t: float) -> ComplexMatrix:
        return first if t < half else second

    return GeneratorSpec(
        hamiltonian=hamiltonian,
        dim=3,
        switch_times=(half,),
        piecewise_constant=True,
        name="nv_center",
    )


def nv_drive_field(params: Dict[str, float]) -> float:
    if "B1" in params:
        return float(params["B1"])
    ratio = float(params["field_ratio"])
    if ratio <= 0:
        raise ScenarioError(f"field_ratio must be positive, got {ratio}", operation="config", scenario="nv_center")
    return float(params["B0"]) / ratio


def _deviation(samples: npt.NDArray[np.complex128], reference: npt.NDArray[np.complex128]) -> float:
    return float(np.max(np.linalg.norm(samples - reference, axis=(1, 2))))


def _closed_form_check(
    gen: GeneratorSpec, initial: ComplexMatrix, tau: float, closed_form: Callable[[npt.NDArray[np.float64]], npt.NDArray[np.complex128]]
) -> AnalyticCheck:
    def evaluate() -> float:
        integrated = propagate(gen, initial, tau)
        return _deviation(integrated.samples, closed_form(integrated.times))

    return AnalyticCheck("integrated_vs_closed_form", TRAJECTORY_CHECK_TOL, evaluate)


def _purity_check(traj: Trajectory) -> AnalyticCheck:
    def evaluate() -> float:
        values = np.array([purity(rho) for rho in traj.samples])
        return float(np.max(np.abs(values - values[0])))

    return AnalyticCheck("purity", PURITY_CHECK_TOL, evaluate)


def _require_positive(params: Dict[str, float], key: str, scenario: str) -> float:
    value = float(params[key])
    if not value > 0:
        raise ScenarioError(f"{key} must be positive, got {value}", operation="config", scenario=scenario)
    return value


def _require_rate(params: Dict[str, float], scenario: str) -> float:
    gamma = float(params["gamma"])
    if gamma < 0:
        raise ScenarioError(f"gamma must be >= 0, got {gamma}", operation="config", scenario=scenario)
    return gamma


def _build_qubit(cfg: ScenarioConfig, params: Dict[str, float], tau: float) -> tuple[Trajectory, list[AnalyticCheck], Optional[ComplexMatrix]]:
    hbar = _require_positive(params, "hbar", cfg.id)
    traj = analytic.analytic_trajectory("qubit_time_independent", {"hbar": hbar}, tau, cfg.grid_points)
    checks = [
        _closed_form_check(traj.generator, traj.initial, tau, lambda t: analytic.qubit_state(t, hbar=hbar)),
        _purity_check(traj),
    ]
    return traj, checks, None


def _build_qudit(cfg: ScenarioConfig, params: Dict[str, float], tau: float):
    hbar = _require_positive(params, "hbar", cfg.id)
    traj = analytic.analytic_trajectory("qudit4", {"hbar": hbar}, tau, cfg.grid_points)

    def fidelity_gap() -> float:
        overlap = math.sqrt(max(0.0, float(np.real(np.trace(traj.initial @ traj.final)))))
        return abs(overlap - analytic.qudit4_fidelity(tau, hbar=hbar))

    checks = [
        _closed_form_check(traj.generator, traj.initial, tau, lambda t: analytic.qudit4_state(t, hbar=hbar)),
        AnalyticCheck("fidelity", FIDELITY_CHECK_TOL, fidelity_gap),
        _purity_check(traj),
    ]
    return traj, checks, None


def _build_spont_emission(cfg: ScenarioConfig, params: Dict[str, float], tau: float):
    gamma = _require_rate(params, cfg.id)
    traj = analytic.analytic_trajectory("spontaneous_emission", {"gamma": gamma}, tau, cfg.grid_points)
    checks = [
        _closed_form_check(traj.generator, traj.initial, tau, lambda t: analytic.spontaneous_emission_state(gamma, t)),
    ]
    return traj, checks, None


def _build_nv_center(cfg: ScenarioConfig, params: Dict[str, float], tau: float):
    for key in ("D", "gamma_e", "B0"):
        if key not in params:
            raise ScenarioError(f"Missing parameter {key}", operation="config", scenario=cfg.id)
    gen = nv_generator(params, tau)
    psi0 = np.array([1.0, 0.0, 0.0], dtype=complex)
    rho0 = pure_state_projector(psi0)
    traj = propagate(gen, rho0, tau, min_grid_points=cfg.grid_points)

    def unitary_gap() -> float:
        reference = analytic.piecewise_unitary_reference(gen, rho0, traj.times)
        return _deviation(traj.samples, reference)

    checks = [AnalyticCheck("integrated_vs_exponential", TRAJECTORY_CHECK_TOL, unitary_gap), _purity_check(traj)]
    return traj, checks, None


def _build_dephasing(cfg: ScenarioConfig, params: Dict[str, float], tau: float):
    gamma = _require_rate(params, cfg.id)
    traj = analytic.analytic_trajectory("dephasing_observable", {"gamma": gamma}, tau, cfg.grid_points)
    checks = [
        _closed_form_check(traj.generator, traj.initial, tau, lambda t: analytic.dephasing_observable(gamma, t)),
    ]
    return traj, checks, traj.initial


def _build_coherence_gen(cfg: ScenarioConfig, params: Dict[str, float], tau: float):
    gamma = _require_rate(params, cfg.id)
    traj = analytic.analytic_trajectory("coherence_state", {"gamma": gamma}, tau, cfg.grid_points)
    checks = [
        _closed_form_check(traj.generator, traj.initial, tau, lambda t: analytic.coherence_state(gamma, t)),
    ]
    return traj, checks, np.array(SIGMA_Z)


_BUILDERS = {
    "qubit_ti": _build_qubit,
    "qudit4": _build_qudit,
    "spont_emission": _build_spont_emission,
    "nv_center": _build_nv_center,
    "dephasing": _build_dephasing,
    "coherence_gen": _build_coherence_gen,
}


def build(cfg: ScenarioConfig, registry: Optional[ScenarioRegistry] = None) -> ScenarioBuild:
    """Trajectory, comparison bounds and analytic checks for one preset system."""
    registry = registry or get_registry()
    preset = registry.get(cfg.id)
    params = registry.resolve_params(cfg)
    tau = float(params["tau"])
    if not (math.isfinite(tau) and tau > 0):
        raise ScenarioError(f"tau must be finite and positive, got {tau}", operation="config", scenario=cfg.id)

    try:
        traj, checks, observable = _BUILDERS[cfg.id](cfg, params, tau)
    except DynamicsError as exc:
        if exc.operation == "propagate":
            raise
        raise ScenarioError(exc.message, operation="build", scenario=cfg.id, cause=exc) from exc
    logger.info("Built scenario %s (tau=%s, %s grid points, source %s)", cfg.id, tau, traj.times.size, traj.source)
    return ScenarioBuild(
        config=cfg,
        params=params,
        trajectory=traj,
        comparisons=tuple(preset.comparisons),
        checks=tuple(checks),
        observable=observable,
    )
