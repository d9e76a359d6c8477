import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_density, random_hermitian
from src.operators.linalg import (
    SIGMA_X,
    SIGMA_Z,
    anticommutator,
    jacobi_eigh,
    hermitian_eig,
    is_unitary,
    psd_sqrt,
    schatten_norm,
    stacked_schatten_norms,
)
from src.operators.norms import arrow_norm, devectorize, enumerate_matchings, matched_seminorm, tie_blocks, vectorize, vectorize_stack
from src.operators.sampling import haar_unitary, random_anti_hermitian, spawn_rngs, spawn_seeds
from src.operators.states import bures_angle, energy_stddev, fidelity, pure_state_projector, validate_state
from src.operators.types import OperatorError, WeightVector

moduli_4 = arrays(np.float64, (4,), elements=st.floats(min_value=0.0, max_value=10.0))
phases_4 = arrays(np.float64, (4,), elements=st.floats(min_value=-math.pi, max_value=math.pi))
weights_4 = arrays(np.float64, (4,), elements=st.floats(min_value=0.0, max_value=1.0))
finite_p = st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.0])


def _weights(raw: np.ndarray) -> WeightVector:
    raw = raw.copy()
    raw[0] = max(raw[0], 0.05)
    return WeightVector.from_values(raw)


def test_vectorize_lists_entries_row_by_row():
    M = np.arange(9).reshape(3, 3)
    x = vectorize(M)
    assert np.array_equal(x.entries, np.arange(9))
    assert x.basis_tag == "canonical"
    assert np.array_equal(devectorize(x), M)


def test_vectorize_in_rotated_basis(rng):
    U = haar_unitary(3, rng)
    M = random_hermitian(3, rng)
    x = vectorize(M, U, basis_tag="haar")
    assert np.allclose(devectorize(x), U.conj().T @ M @ U)
    assert np.allclose(vectorize_stack(M[None], U)[0], x.entries)


def test_vectorize_rejects_non_unitary_basis():
    with pytest.raises(OperatorError) as exc:
        vectorize(np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]]))
    assert exc.value.operation == "vectorize"
    assert exc.value.residual > 0


def test_devectorize_rejects_non_square_length():
    with pytest.raises(OperatorError):
        devectorize(np.ones(5))


def test_weight_vector_validation():
    with pytest.raises(OperatorError):
        WeightVector(np.array([0.5, 1.0]))
    with pytest.raises(OperatorError):
        WeightVector(np.zeros(3))
    with pytest.raises(OperatorError):
        WeightVector(np.array([1.0, -0.1]))
    w = WeightVector.indicator(2, 4)
    assert np.array_equal(w.entries, [1.0, 1.0, 0.0, 0.0])
    assert w.indicator_index() == 2
    assert WeightVector.from_values([0.2, 1.0, 0.5]).indicator_index() is None
    with pytest.raises(OperatorError):
        WeightVector.indicator(5, 4)


def test_arrow_norm_reduces_to_known_norms():
    x = np.array([3.0, -4.0j, 0.0, 1.0])
    assert arrow_norm(x, WeightVector.indicator(4, 4), 2.0).value == pytest.approx(math.sqrt(26.0))
    assert arrow_norm(x, WeightVector.indicator(1, 4), 1.0).value == pytest.approx(4.0)
    assert arrow_norm(x, WeightVector.indicator(2, 4), 1.0).value == pytest.approx(7.0)
    assert arrow_norm(x, WeightVector.indicator(4, 4), math.inf).value == pytest.approx(4.0)


@hyp_settings(max_examples=60, deadline=None)
@given(moduli=moduli_4, phases=phases_4, raw_w=weights_4, p=finite_p)
def test_arrow_norm_matches_permutation_maximum(moduli, phases, raw_w, p):
    x = moduli * np.exp(1j * phases)
    w = _weights(raw_w)
    brute = max(
        float(np.sum(w.entries * np.abs(x[list(perm)]) ** p) ** (1.0 / p)) for perm in itertools.permutations(range(4))
    )
    assert arrow_norm(x, w, p).value == pytest.approx(brute, rel=1e-12, abs=1e-12)


@hyp_settings(max_examples=60, deadline=None)
@given(a=moduli_4, b=moduli_4, pa=phases_4, pb=phases_4, raw_w=weights_4, p=finite_p)
def test_arrow_norm_triangle_inequality(a, b, pa, pb, raw_w, p):
    x = a * np.exp(1j * pa)
    y = b * np.exp(1j * pb)
    w = _weights(raw_w)
    assert arrow_norm(x + y, w, p).value <= arrow_norm(x, w, p).value + arrow_norm(y, w, p).value + 1e-9


def test_arrow_norm_weight_scaling():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    w = WeightVector.from_values([1.0, 0.7, 0.3, 0.1])
    base = arrow_norm(x, w, 2.0).value
    assert arrow_norm(x, w.scaled(4.0), 2.0).value == pytest.approx(2.0 * base)


def test_matched_seminorm_at_delta_equals_norm():
    x = np.array([0.5, -2.0, 1.0j, 0.1])
    matched = arrow_norm(x, WeightVector.from_values([1.0, 0.6, 0.2, 0.0]), 3.0)
    assert matched_seminorm(x, matched, 3.0) == pytest.approx(matched.value)


def test_ties_with_distinct_weights_are_degenerate():
    x = np.array([1.0, 1.0, 0.5, 0.0])
    matched = arrow_norm(x, WeightVector.from_values([1.0, 0.5, 0.2, 0.0]), 1.0)
    assert matched.degenerate
    assert len(matched.candidates) == 2
    assert tie_blocks(np.array([1.0, 1.0, 0.5, 0.0])) == [(0, 2), (2, 3), (3, 4)]


def test_ties_with_equal_weights_are_not_degenerate():
    x = np.array([1.0, 1.0, 0.5, 0.0])
    matched = arrow_norm(x, WeightVector.indicator(2, 4), 1.0)
    assert not matched.degenerate
    assert len(matched.candidates) == 1


def test_zero_vector_has_zero_norm():
    assert arrow_norm(np.zeros(4), WeightVector.indicator(1, 4), 2.0).value == 0.0


def test_arrow_norm_rejects_bad_p():
    with pytest.raises(OperatorError):
        arrow_norm(np.ones(4), WeightVector.indicator(1, 4), 0.5)


def test_jacobi_agrees_with_lapack(rng):
    for n in (2, 3, 4, 6):
        H = random_hermitian(n, rng)
        values, vectors = jacobi_eigh(H)
        assert np.allclose(np.sort(values), np.linalg.eigvalsh(H), atol=1e-10)
        assert is_unitary(vectors)
        assert np.allclose(vectors @ np.diag(values) @ vectors.conj().T, H, atol=1e-10)


def test_hermitian_eig_orders_descending(rng):
    values, vectors = hermitian_eig(random_hermitian(4, rng), method="jacobi")
    assert np.all(np.diff(values) <= 0)
    with pytest.raises(OperatorError):
        hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_schatten_norms():
    M = np.diag([3.0, -4.0])
    assert schatten_norm(M, "op") == pytest.approx(4.0)
    assert schatten_norm(M, "tr") == pytest.approx(7.0)
    assert schatten_norm(M, "hs") == pytest.approx(5.0)
    stack = np.stack([M, 2 * M])
    assert np.allclose(stacked_schatten_norms(stack, "tr"), [7.0, 14.0])


def test_psd_sqrt(rng):
    rho = random_density(3, rng)
    root = psd_sqrt(rho)
    assert np.allclose(root @ root, rho, atol=1e-12)
    with pytest.raises(OperatorError):
        psd_sqrt(np.diag([1.0, -0.5]))


def test_bures_angle_extremes():
    zero = pure_state_projector([1.0, 0.0])
    one = pure_state_projector([0.0, 1.0])
    plus = pure_state_projector([1.0, 1.0])
    assert bures_angle(zero, zero) == pytest.approx(0.0, abs=1e-7)
    assert bures_angle(zero, one) == pytest.approx(math.pi / 2)
    assert bures_angle(zero, plus) == pytest.approx(math.pi / 4)


def test_fidelity_shortcut_matches_general_formula(rng):
    psi = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    pure = pure_state_projector(psi)
    mixed = random_density(3, rng)
    assert fidelity(pure, mixed, shortcut=True) == pytest.approx(fidelity(pure, mixed, shortcut=False), abs=1e-7)


def test_validate_state_rejects_bad_trace():
    with pytest.raises(OperatorError):
        validate_state(np.eye(2))


def test_energy_stddev_of_plus_state():
    assert energy_stddev(pure_state_projector([1.0, 1.0]), np.diag([0.0, 1.0])) == pytest.approx(0.5)
    assert energy_stddev(pure_state_projector([1.0, 0.0]), SIGMA_X) == pytest.approx(1.0)


def test_haar_unitary_is_unitary_and_seeded():
    U = haar_unitary(4, 7)
    assert is_unitary(U)
    assert np.array_equal(U, haar_unitary(4, 7))
    assert not np.allclose(U, haar_unitary(4, 8))


def test_random_anti_hermitian(rng):
    K = random_anti_hermitian(3, rng)
    assert np.allclose(K, -K.conj().T)
    assert np.linalg.norm(K) == pytest.approx(1.0)


def test_spawn_seeds_is_prefix_stable():
    assert spawn_seeds(0, 5)[:3] == spawn_seeds(0, 3)
    assert spawn_seeds(0, 3) != spawn_seeds(1, 3)


def test_spawn_rngs_follow_sub_seeds():
    first = [g.standard_normal() for g in spawn_rngs(5, 3)]
    second = [g.standard_normal() for g in spawn_rngs(5, 3)]
    assert first == second
    assert len(set(first)) == 3


def test_enumerate_matchings_truncates_above_limit():
    order = np.arange(4, dtype=np.int64)
    weights = np.array([1.0, 0.7, 0.4, 0.1])
    candidates, truncated = enumerate_matchings(order, weights, [(0, 4)], limit=100)
    assert len(candidates) == 24 and not truncated
    candidates, truncated = enumerate_matchings(order, weights, [(0, 4)], limit=5)
    assert truncated
    assert len(candidates) == 1
    assert np.array_equal(candidates[0], weights)


def test_pauli_anticommutator():
    assert np.allclose(anticommutator(SIGMA_X, SIGMA_Z), 0.0)
    assert np.allclose(anticommutator(SIGMA_Z, SIGMA_Z), 2 * np.eye(2))
