from __future__ import annotations

import numpy as np

from src.operators.types import ComplexMatrix, OperatorError


def haar_unitary(n: int, seed: int | np.random.Generator) -> ComplexMatrix:
    """Haar-distributed unitary: QR of a complex Ginibre matrix with the R-diagonal phases divided out."""
    if n < 1:
        raise OperatorError(f"Dimension must be positive, got {n}", operation="haar_unitary")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    phases = np.where(np.abs(diag) > 0, diag / np.abs(diag), 1.0)
    return q * phases[None, :]


def random_anti_hermitian(n: int, rng: np.random.Generator) -> ComplexMatrix:
    """Isotropic tangent direction at the identity of U(n), unit Frobenius norm."""
    K = np.zeros((n, n), dtype=complex)
    upper = np.triu_indices(n, k=1)
    K[upper] = rng.standard_normal(len(upper[0])) + 1j * rng.standard_normal(len(upper[0]))
    K = K - K.conj().T
    K[np.diag_indices(n)] = 1j * rng.standard_normal(n)
    norm = np.linalg.norm(K)
    if norm == 0:
        return K
    return K / norm


def spawn_seeds(seed: int, count: int) -> list[int]:
    """Independent per-task sub-seeds; the list depends only on (seed, count index)."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in spawn_seeds(seed, count)]
