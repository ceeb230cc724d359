"""Shared samplers for the test suite."""

from __future__ import annotations

import numpy as np

from qdiv.channels import random_state, random_unitary

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def commutator_norm(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.linalg.norm(A @ B - B @ A))


def noncommuting_pair(seed: int, dim: int = 2, min_commutator: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Invertible density pair whose commutator has Frobenius norm above the threshold."""
    rng = np.random.default_rng(seed)
    while True:
        rho = random_state(dim, seed=rng).matrix
        sigma = random_state(dim, seed=rng).matrix
        if commutator_norm(rho, sigma) >= min_commutator:
            return rho, sigma


def commuting_pair(seed: int, dim: int = 2) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    U = random_unitary(dim, rng)
    p = rng.dirichlet(np.ones(dim))
    q = rng.dirichlet(np.ones(dim))
    return (U * p) @ U.conj().T, (U * q) @ U.conj().T


def random_psd(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    G = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    return G @ G.conj().T


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (G + G.conj().T) / 2


def min_eig(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((A + A.conj().T) / 2)[0])
