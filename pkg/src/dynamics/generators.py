from __future__ import annotations

import numpy as np
import numpy.typing as npt

from src.dynamics.types import DynamicsError, GeneratorSpec
from src.operators.types import ComplexMatrix


def _checked(M: npt.ArrayLike, gen: GeneratorSpec, operation: str) -> ComplexMatrix:
    arr = np.asarray(M, dtype=complex)
    if arr.shape != (gen.dim, gen.dim):
        raise DynamicsError(
            f"Operator shape {arr.shape} does not match generator dimension {gen.dim}",
            operation=operation,  # type: ignore[arg-type]
        )
    return arr


def _hamiltonian(gen: GeneratorSpec, t: float, operation: str) -> ComplexMatrix:
    H = np.asarray(gen.hamiltonian(t), dtype=complex)
    if H.shape != (gen.dim, gen.dim):
        raise DynamicsError(f"H({t}) has shape {H.shape}", operation=operation)  # type: ignore[arg-type]
    return H


def lindblad_rhs(rho: npt.ArrayLike, gen: GeneratorSpec, t: float) -> ComplexMatrix:
    """−(i/ħ)[H(t), ρ] + Σ γ (L ρ L† − ½{L†L, ρ})."""
    rho = _checked(rho, gen, "lindblad_rhs")
    H = _hamiltonian(gen, t, "lindblad_rhs")
    out = (-1j / gen.hbar) * (H @ rho - rho @ H)
    for L, rate in gen.jump_operators:
        if rate == 0:
            continue
        Ld = L.conj().T
        LdL = Ld @ L
        out = out + rate * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def adjoint_rhs(A: npt.ArrayLike, gen: GeneratorSpec, t: float) -> ComplexMatrix:
    """+(i/ħ)[H(t), A] + Σ γ (L† A L − ½{L†L, A})."""
    A = _checked(A, gen, "adjoint_rhs")
    H = _hamiltonian(gen, t, "adjoint_rhs")
    out = (1j / gen.hbar) * (H @ A - A @ H)
    for L, rate in gen.jump_operators:
        if rate == 0:
            continue
        Ld = L.conj().T
        LdL = Ld @ L
        out = out + rate * (Ld @ A @ L - 0.5 * (LdL @ A + A @ LdL))
    return out


def apply_generator(M: npt.ArrayLike, gen: GeneratorSpec, t: float) -> ComplexMatrix:
    """𝕃 in the Schrödinger picture, 𝕃† in the Heisenberg picture."""
    if gen.picture == "heisenberg":
        return adjoint_rhs(M, gen, t)
    return lindblad_rhs(M, gen, t)


def generator_stack(samples: npt.ArrayLike, times: npt.ArrayLike, gen: GeneratorSpec) -> npt.NDArray[np.complex128]:
    return np.stack([apply_generator(M, gen, float(t)) for M, t in zip(np.asarray(samples), np.asarray(times))])


def liouvillian(gen: GeneratorSpec, t: float) -> npt.NDArray[np.complex128]:
    """Matrix of apply_generator(·, gen, t) acting on row-major vectorized operators.

    Uses vec(A X B) = (A ⊗ Bᵀ) vec(X).
    """
    H = _hamiltonian(gen, t, "adjoint_rhs" if gen.picture == "heisenberg" else "lindblad_rhs")
    eye = np.eye(gen.dim, dtype=complex)
    sign = 1.0 if gen.picture == "heisenberg" else -1.0
    G = sign * (1j / gen.hbar) * (np.kron(H, eye) - np.kron(eye, H.T))
    for L, rate in gen.jump_operators:
        if rate == 0:
            continue
        LdL = L.conj().T @ L
        if gen.picture == "heisenberg":
            jump = np.kron(L.conj().T, L.T)
        else:
            jump = np.kron(L, L.conj())
        G = G + rate * (jump - 0.5 * (np.kron(LdL, eye) + np.kron(eye, LdL.T)))
    return G
