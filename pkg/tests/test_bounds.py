import math

import numpy as np
import pytest

from conftest import random_density, random_hermitian
from src.bounds.qsl import BoundEvaluator, delta_diagonal_basis, energy_basis, qsl_bound
from src.bounds.quadrature import split_pieces, time_average
from src.bounds.quantumness import (
    coherence,
    eigenprojectors,
    l1_coherence,
    projector_identity_residual,
    quantumness,
    t_c_bound,
    t_q_bound,
)
from src.bounds.reference import dl_bound, mt_bound_closed
from src.bounds.types import BoundError, BoundSpec
from src.core.config import settings
from src.dynamics import analytic
from src.dynamics.propagate import propagate
from src.dynamics.types import GeneratorSpec
from src.operators.linalg import SIGMA_X, SIGMA_Y, SIGMA_Z, stacked_schatten_norms
from src.operators.sampling import haar_unitary
from src.operators.states import energy_stddev_stack, pure_state_projector
from src.operators.types import WeightVector


def _random_open_trajectory(rng, n=3, tau=1.2):
    L = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2 * n)
    gen = GeneratorSpec.constant(random_hermitian(n, rng), ((L, 0.4),))
    return propagate(gen, random_density(n, rng), tau, min_grid_points=257)


def _random_weights(size, rng):
    raw = rng.random(size)
    raw[0] = max(raw[0], 0.1)
    return WeightVector.from_values(raw)


# -- quadrature -------------------------------------------------------------------------------


def test_time_average_of_smooth_integrand(scenario_trajectory):
    traj = scenario_trajectory("spont_emission", gamma=1.0, tau=1.0)
    values = np.exp(-traj.times)
    quad = time_average(traj, values)
    assert quad.integral == pytest.approx(1.0 - math.exp(-1.0), rel=1e-12)
    assert quad.maximum == pytest.approx(1.0)
    assert quad.residual < settings.QUADRATURE_RTOL


def test_time_average_rejects_non_finite(scenario_trajectory):
    traj = scenario_trajectory("spont_emission", grid_points=65, gamma=1.0, tau=1.0)
    values = np.ones(traj.times.size)
    values[3] = np.nan
    with pytest.raises(BoundError):
        time_average(traj, values)


def test_strict_quadrature_raises_on_kinked_integrand(scenario_trajectory):
    traj = scenario_trajectory("qubit_ti", grid_points=65, tau=3.0)
    values = np.abs(np.sin(7.0 * traj.times))
    with pytest.raises(BoundError) as exc:
        time_average(traj, values, strict=True)
    assert exc.value.operation == "quadrature"


def test_qsl_bound_rejects_coarse_grid_by_default(scenario_trajectory):
    traj = scenario_trajectory("dephasing", grid_points=65, gamma=0.1, tau=60.0)
    w = WeightVector.indicator(4, 4)
    assert settings.STRICT_QUADRATURE
    with pytest.raises(BoundError) as exc:
        qsl_bound(traj, BoundSpec(p=2.0, w=w))
    assert exc.value.operation == "quadrature"
    assert exc.value.residual > settings.QUADRATURE_RTOL

    lenient = BoundEvaluator(traj).evaluate(2.0, w, strict=False)
    assert lenient.quadrature_residual > settings.QUADRATURE_RTOL
    assert lenient.value > 0.0
    assert qsl_bound(traj, BoundSpec(p=2.0, w=w, form="supremum")).value == pytest.approx(lenient.supremum_value)


def test_split_pieces_uses_left_limits(scenario_trajectory):
    traj = scenario_trajectory("nv_center", grid_points=129, tau=0.2)
    values = np.concatenate([np.zeros(traj.times.size), np.ones(len(traj.break_indices))])
    pieces = split_pieces(traj, values)
    assert len(pieces) == 2
    assert pieces[0][1][-1] == 1.0
    assert pieces[1][1][0] == 0.0


# -- the weighted-norm bound ------------------------------------------------------------------


@pytest.mark.parametrize("tau", [0.3, 1.0, 2.0, 3.0])
def test_qubit_bound_is_tight_in_delta_basis(scenario_trajectory, tau):
    traj = scenario_trajectory("qubit_ti", tau=tau)
    result = BoundEvaluator(traj, delta_diagonal_basis(traj), basis_tag="delta_diag").evaluate_indicator(1.0, 1)
    assert result.integral_value == pytest.approx(tau, rel=1e-6)
    assert result.supremum_value == pytest.approx(2.0 * math.sin(tau / 2.0), abs=1e-6)
    assert result.basis_tag == "delta_diag"
    assert result.w_index == 1


@pytest.mark.parametrize("gamma", [0.05, 0.5, 1.0, 2.5, 5.0])
def test_spontaneous_emission_closed_forms(scenario_trajectory, gamma):
    traj = scenario_trajectory("spont_emission", gamma=gamma, tau=1.0)
    evaluator = BoundEvaluator(traj, basis_tag="energy")
    sup = evaluator.evaluate_indicator(1.0, 1, "supremum")
    assert sup.value == pytest.approx((1.0 - math.exp(-gamma)) / gamma, abs=1e-8)
    assert evaluator.evaluate_indicator(1.0, 1).value == pytest.approx(1.0, abs=1e-6)


def test_bound_is_valid_for_random_systems(rng):
    for _ in range(10):
        traj = _random_open_trajectory(rng)
        evaluator = BoundEvaluator(traj, haar_unitary(traj.dim, rng), basis_tag="haar")
        for p in (1.0, 2.0, math.inf):
            result = evaluator.evaluate(p, _random_weights(evaluator.size, rng), diagnostics=False)
            assert result.integral_value <= traj.tau * (1 + 1e-6)
            assert result.supremum_value <= result.integral_value + 1e-9


def test_indicator_weights_dominate(rng):
    traj = _random_open_trajectory(rng)
    evaluator = BoundEvaluator(traj)
    best = max(evaluator.evaluate_indicator(2.0, j).value for j in range(1, evaluator.size + 1))
    for _ in range(50):
        assert evaluator.evaluate(2.0, _random_weights(evaluator.size, rng), diagnostics=False).value <= best * (1 + 1e-9)


def test_weight_scaling_leaves_bound_unchanged(rng):
    traj = _random_open_trajectory(rng)
    evaluator = BoundEvaluator(traj)
    w = _random_weights(evaluator.size, rng)
    scaled = evaluator.evaluate(3.0, w.scaled(5.0), diagnostics=False).value
    assert scaled == pytest.approx(evaluator.evaluate(3.0, w, diagnostics=False).value, rel=1e-12)


def test_full_hilbert_schmidt_bound_is_basis_independent(rng):
    traj = _random_open_trajectory(rng)
    n2 = traj.dim**2
    values = [BoundEvaluator(traj).evaluate_indicator(2.0, n2).value]
    values += [BoundEvaluator(traj, haar_unitary(traj.dim, seed)).evaluate_indicator(2.0, n2).value for seed in range(3)]
    assert max(values) == pytest.approx(min(values), rel=1e-8)


def test_first_entry_bound_depends_on_basis(scenario_trajectory):
    traj = scenario_trajectory("qubit_ti", tau=2.0)
    canonical = BoundEvaluator(traj).evaluate_indicator(1.0, 1).value
    rotated = BoundEvaluator(traj, delta_diagonal_basis(traj)).evaluate_indicator(1.0, 1).value
    assert abs(canonical - rotated) > 1e-3


def test_closed_system_energy_identity(scenario_trajectory):
    traj = scenario_trajectory("qudit4", tau=2.0)
    H = np.asarray(traj.generator.hamiltonian(0.0))
    lhs = stacked_schatten_norms(traj.derivatives, "hs")
    rhs = math.sqrt(2.0) * energy_stddev_stack(traj.samples, np.broadcast_to(H, traj.samples.shape))
    assert np.allclose(lhs, rhs, rtol=1e-10)


def test_trivial_bound_when_nothing_moves():
    gen = GeneratorSpec.constant(np.diag([0.0, 1.0]))
    traj = propagate(gen, np.diag([1.0, 0.0]).astype(complex), 1.0)
    result = BoundEvaluator(traj).evaluate_indicator(1.0, 1)
    assert result.trivial
    assert result.value == 0.0


def test_qsl_bound_checks_weight_length(scenario_trajectory):
    traj = scenario_trajectory("qubit_ti", grid_points=129, tau=1.0)
    with pytest.raises(BoundError):
        qsl_bound(traj, BoundSpec(p=1.0, w=WeightVector.indicator(1, 9)))
    result = qsl_bound(traj, BoundSpec(p=2.0, w=WeightVector.indicator(4, 4), form="supremum"))
    assert result.form == "supremum"
    assert result.value == pytest.approx(result.supremum_value)


def test_bound_spec_validation():
    with pytest.raises(BoundError):
        BoundSpec(p=0.5, w=WeightVector.indicator(1, 4))
    with pytest.raises(BoundError):
        BoundSpec(p=1.0, w=WeightVector.indicator(1, 4), basis=np.ones((2, 2)))


def test_degenerate_flag_on_tied_delta(scenario_trajectory):
    traj = scenario_trajectory("spont_emission", gamma=1.0, tau=1.0)
    result = BoundEvaluator(traj).evaluate(1.0, WeightVector.from_values([1.0, 0.5, 0.0, 0.0]))
    assert result.degenerate
    assert len(result.candidate_values) >= 2


def test_energy_basis_is_ascending(scenario_trajectory):
    traj = scenario_trajectory("qudit4", grid_points=129, tau=1.0)
    U = energy_basis(traj)
    H = np.asarray(traj.generator.hamiltonian(0.0))
    energies = np.real(np.diag(U.conj().T @ H @ U))
    assert np.all(np.diff(energies) > 0)


# -- reference bounds -------------------------------------------------------------------------


def test_mt_bound_beyond_pi(scenario_trajectory):
    traj = scenario_trajectory("qubit_ti", tau=4.0 * math.pi / 3.0)
    assert mt_bound_closed(traj) == pytest.approx(2.0 * math.pi / 3.0, abs=1e-6)


def test_mt_bound_counts_left_limits(scenario_trajectory):
    traj = scenario_trajectory("nv_center", grid_points=129, tau=0.3)
    value = mt_bound_closed(traj)
    assert 0.0 < value <= traj.tau + 1e-6


def test_dl_bound_prefers_operator_norm(scenario_trajectory):
    traj = scenario_trajectory("spont_emission", gamma=1.0, tau=1.0)
    result = dl_bound(traj)
    assert result.winning_norm == "op"
    assert result.mt_open == pytest.approx(result.value / math.sqrt(2.0), rel=1e-10)
    assert result.sin2_angle == pytest.approx((1.0 - math.exp(-0.5)) / 2.0, rel=1e-9)
    assert result.value <= traj.tau


def test_reference_bounds_need_density_matrices(scenario_trajectory):
    traj = scenario_trajectory("dephasing", grid_points=129, gamma=1.0, tau=1.0)
    with pytest.raises(BoundError):
        dl_bound(traj)
    with pytest.raises(BoundError):
        mt_bound_closed(traj)


# -- quantumness and coherence ----------------------------------------------------------------


def test_quantumness_of_quoted_observable():
    t = np.linspace(0.0, 2.0, 41)
    values = [quantumness(SIGMA_Y, A) for A in analytic.fixed_frequency_dephasing_observable(1.0, t)]
    assert np.allclose(values, 16.0 * np.exp(-t) * np.sin(2 * t) ** 2, atol=1e-8)


def test_l1_coherence_of_quoted_state():
    t = np.linspace(0.0, 2.0, 41)
    values = [l1_coherence(rho, SIGMA_Z) for rho in analytic.fixed_frequency_coherence_state(1.0, t)]
    assert np.allclose(values, np.exp(-t / 2) * np.abs(np.sin(2 * t)), atol=1e-8)


def test_coherence_of_plus_state():
    plus = pure_state_projector([1.0, 1.0])
    assert coherence(plus, SIGMA_Z) == pytest.approx(0.5)
    assert l1_coherence(plus, SIGMA_Z) == pytest.approx(1.0)
    assert quantumness(SIGMA_Z, SIGMA_X) == pytest.approx(16.0)
    assert coherence(np.eye(2) / 2, SIGMA_Z) == pytest.approx(0.0, abs=1e-12)
    assert quantumness(SIGMA_Z, SIGMA_Z) == 0.0


def test_eigenprojectors_reject_degenerate_observable():
    with pytest.raises(BoundError):
        eigenprojectors(np.eye(2))
    projectors = eigenprojectors(SIGMA_X)
    assert np.allclose(sum(projectors), np.eye(2))
    assert projector_identity_residual(SIGMA_Y, projectors) < 1e-12


def test_t_q_bound_is_valid(scenario_trajectory):
    for tau in (0.3, 1.0, 2.0):
        traj = scenario_trajectory("dephasing", gamma=1.0, tau=tau)
        assert 0.0 < t_q_bound(traj) <= tau * (1 + 1e-6)


def test_t_q_bound_needs_heisenberg_picture(scenario_trajectory):
    with pytest.raises(BoundError):
        t_q_bound(scenario_trajectory("coherence_gen", grid_points=129, gamma=1.0, tau=1.0))


def test_t_c_bound_is_valid(scenario_trajectory):
    for tau in (0.3, 1.0, 2.0):
        traj = scenario_trajectory("coherence_gen", gamma=1.0, tau=tau)
        assert 0.0 <= t_c_bound(traj, SIGMA_Z) <= tau * (1 + 1e-6)
