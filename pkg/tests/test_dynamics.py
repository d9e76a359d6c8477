import math

import numpy as np
import pytest

from conftest import random_density, random_hermitian
from src.dynamics import analytic
from src.dynamics.generators import adjoint_rhs, liouvillian, lindblad_rhs
from src.dynamics.propagate import propagate
from src.dynamics.types import DynamicsError, GeneratorSpec, Trajectory
from src.operators.linalg import SIGMA_X, SIGMA_Y, SIGMA_Z
from src.scenarios.builders import nv_generator


def _random_generator(n, rng, *, picture="schrodinger"):
    L = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return GeneratorSpec.constant(random_hermitian(n, rng), ((L, 0.3),), picture=picture)


def test_lindblad_rhs_preserves_trace_and_hermiticity(rng):
    gen = _random_generator(3, rng)
    out = lindblad_rhs(random_density(3, rng), gen, 0.0)
    assert abs(np.trace(out)) < 1e-12
    assert np.allclose(out, out.conj().T)


def test_adjoint_generator_is_dual(rng):
    gen = _random_generator(3, rng)
    rho = random_density(3, rng)
    A = random_hermitian(3, rng)
    lhs = np.trace(A @ lindblad_rhs(rho, gen, 0.0))
    rhs = np.trace(adjoint_rhs(A, gen, 0.0) @ rho)
    assert lhs == pytest.approx(rhs, abs=1e-12)


@pytest.mark.parametrize("picture", ["schrodinger", "heisenberg"])
def test_liouvillian_matches_rhs_on_row_major_vectors(rng, picture):
    gen = _random_generator(3, rng, picture=picture)
    M = random_density(3, rng)
    expected = lindblad_rhs(M, gen, 0.0) if picture == "schrodinger" else adjoint_rhs(M, gen, 0.0)
    assert np.allclose(liouvillian(gen, 0.0) @ M.reshape(-1), expected.reshape(-1))


def test_generator_validation():
    with pytest.raises(DynamicsError):
        GeneratorSpec.constant(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DynamicsError):
        GeneratorSpec.constant(SIGMA_Z, ((SIGMA_X, -1.0),))
    with pytest.raises(DynamicsError):
        GeneratorSpec.constant(SIGMA_Z, hbar=0.0)
    assert GeneratorSpec.constant(SIGMA_Z).is_closed
    assert not GeneratorSpec.constant(SIGMA_Z, ((SIGMA_X, 0.1),)).is_closed


def test_trajectory_validation():
    gen = GeneratorSpec.constant(SIGMA_Z)
    samples = np.stack([np.eye(2) / 2] * 3).astype(complex)
    with pytest.raises(DynamicsError):
        Trajectory(times=np.array([0.0, 0.5, 0.5]), samples=samples, derivatives=samples, source="analytic", generator=gen)
    traj = Trajectory(times=np.array([0.0, 0.5, 1.0]), samples=samples, derivatives=samples, source="analytic", generator=gen)
    assert traj.tau == pytest.approx(1.0)
    assert traj.dim == 2
    assert np.allclose(traj.delta(), 0.0)


@pytest.mark.parametrize("gamma", [0.0, 0.7, 3.0])
def test_spontaneous_emission_closed_form(gamma):
    gen = analytic.spontaneous_emission_generator(gamma)
    traj = propagate(gen, analytic.PLUS_STATE, 2.0)
    reference = analytic.spontaneous_emission_state(gamma, traj.times)
    assert np.max(np.abs(traj.samples - reference)) < 1e-7
    assert traj.source == "integrated"


@pytest.mark.parametrize("gamma", [0.5, 2.0, 5.0])
def test_dephasing_observable_closed_form(gamma):
    gen = analytic.dephasing_generator(gamma, picture="heisenberg")
    traj = propagate(gen, SIGMA_Y, 2.0)
    assert np.max(np.abs(traj.samples - analytic.dephasing_observable(gamma, traj.times))) < 1e-7


@pytest.mark.parametrize("gamma", [1.0, 4.0, 6.0])
def test_coherence_state_closed_form(gamma):
    gen = analytic.dephasing_generator(gamma, picture="schrodinger")
    traj = propagate(gen, analytic.GROUND_STATE, 2.0)
    assert np.max(np.abs(traj.samples - analytic.coherence_state(gamma, traj.times))) < 1e-7


def test_quoted_forms_agree_with_exact_solutions_without_decay():
    t = np.linspace(0.0, 3.0, 31)
    assert np.allclose(analytic.fixed_frequency_dephasing_observable(0.0, t), analytic.dephasing_observable(0.0, t))
    assert np.allclose(analytic.fixed_frequency_coherence_state(0.0, t), analytic.coherence_state(0.0, t))


def test_closed_forms_start_at_initial_operator():
    assert np.allclose(analytic.dephasing_observable(1.3, 0.0)[0], SIGMA_Y)
    assert np.allclose(analytic.coherence_state(1.3, 0.0)[0], analytic.GROUND_STATE)
    assert np.allclose(analytic.spontaneous_emission_state(1.3, 0.0)[0], analytic.PLUS_STATE)


def test_qudit_fidelity_matches_states():
    tau = 2.1
    states = analytic.qudit4_state([0.0, tau])
    overlap = math.sqrt(float(np.real(np.trace(states[0] @ states[1]))))
    assert overlap == pytest.approx(analytic.qudit4_fidelity(tau))


def test_analytic_trajectory_derivatives_follow_generator():
    traj = analytic.analytic_trajectory("spontaneous_emission", {"gamma": 0.8}, 1.0, 129)
    expected = lindblad_rhs(traj.samples[40], traj.generator, float(traj.times[40]))
    assert np.allclose(traj.derivatives[40], expected)
    assert traj.times.size == 129


def test_analytic_trajectory_rejects_bad_input():
    with pytest.raises(DynamicsError):
        analytic.analytic_trajectory("qudit4", {}, 1.0, 10)
    with pytest.raises(DynamicsError):
        analytic.analytic_trajectory("qudit4", {}, -1.0, 129)
    with pytest.raises(DynamicsError):
        analytic.analytic_trajectory("unknown", {}, 1.0, 129)
    with pytest.raises(DynamicsError):
        analytic.analytic_trajectory("spontaneous_emission", {}, 1.0, 129)


def test_propagate_respects_min_grid_points():
    gen = analytic.spontaneous_emission_generator(1.0)
    traj = propagate(gen, analytic.PLUS_STATE, 1.0, min_grid_points=1000)
    assert traj.times.size >= 1000
    assert traj.times.size % 2 == 1


def test_propagate_errors():
    gen = analytic.spontaneous_emission_generator(1.0)
    with pytest.raises(DynamicsError):
        propagate(gen, analytic.PLUS_STATE, 0.0)
    with pytest.raises(DynamicsError):
        propagate(gen, np.eye(3), 1.0)
    with pytest.raises(DynamicsError):
        propagate(gen, analytic.PLUS_STATE, 1.0, base_steps=8)
    with pytest.raises(DynamicsError) as exc:
        propagate(gen, analytic.PLUS_STATE, 1.0, tol=1e-30, max_steps=256)
    assert exc.value.operation == "propagate"
    assert exc.value.residual is not None


def test_piecewise_generator_aligns_grid_to_switch():
    params = {"D": 2 * math.pi * 2.87, "gamma_e": 2 * math.pi * 28.0345, "B0": 0.05, "field_ratio": 10.0}
    tau = 0.4
    gen = nv_generator(params, tau)
    rho0 = np.diag([1.0, 0.0, 0.0]).astype(complex)
    traj = propagate(gen, rho0, tau)
    assert len(traj.break_indices) == 1
    b = traj.break_indices[0]
    assert traj.times[b] == pytest.approx(tau / 2)
    assert traj.left_derivatives is not None
    assert not np.allclose(traj.left_derivatives[0], traj.derivatives[b])
    reference = analytic.piecewise_unitary_reference(gen, rho0, traj.times)
    assert np.max(np.abs(traj.samples - reference)) < 1e-7
    assert traj.all_derivatives().shape[0] == traj.times.size + 1
    pieces = traj.pieces()
    assert len(pieces) == 2
    assert np.allclose(pieces[0].derivatives[-1], traj.left_derivatives[0])


def test_general_rk4_path_for_time_dependent_hamiltonian():
    def hamiltonian(t):
        return math.cos(t) * SIGMA_X

    gen = GeneratorSpec(hamiltonian=hamiltonian, dim=2)
    rho0 = analytic.GROUND_STATE
    traj = propagate(gen, rho0, 1.5)
    # H(t) commutes with itself, so U(t) = exp(-i sin(t) σx).
    s = math.sin(1.5)
    U = math.cos(s) * np.eye(2) - 1j * math.sin(s) * SIGMA_X
    assert np.allclose(traj.final, U @ rho0 @ U.conj().T, atol=1e-7)


def test_unitary_reference_requires_closed_piecewise_generator():
    with pytest.raises(DynamicsError):
        analytic.piecewise_unitary_reference(analytic.spontaneous_emission_generator(1.0), analytic.PLUS_STATE, [0.0, 1.0])
