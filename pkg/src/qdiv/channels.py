"""Quantum channels and positive maps in Kraus form.

A :class:`QuantumChannel` stores Kraus operators ``K_i`` (``out x in``) and an
optional transposition pre-step, so it represents either the completely
positive map ``X -> sum K_i X K_i^H`` or the positive map
``X -> sum K_i X^T K_i^H``.  Both families are closed under adjoints and
composition, which covers every map the package needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from qdiv.operators import (
    NumericalInstabilityError,
    OperatorError,
    PsdOperator,
    as_psd,
    spectral_decompose,
    vec,
)

SeedLike = int | np.random.Generator | None


def _rng(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


class QuantumChannel:
    """Linear map in (possibly transpose-composed) Kraus form.

    Parameters
    ----------
    kraus : sequence of ndarray
        Kraus operators of common shape ``(out_dim, in_dim)``.
    pre_transpose : bool, default False
        Apply the transpose before the Kraus sum.  Such maps are positive but
        in general not completely positive.
    """

    def __init__(self, kraus: Sequence[np.ndarray] | np.ndarray, pre_transpose: bool = False):
        K = np.array(kraus, dtype=complex)
        if K.ndim == 2:
            K = K[None]
        if K.ndim != 3 or K.shape[0] == 0:
            raise OperatorError("expected a nonempty list of equally shaped Kraus matrices")
        self.kraus = K
        self.pre_transpose = bool(pre_transpose)

    @property
    def in_dim(self) -> int:
        return self.kraus.shape[2]

    @property
    def out_dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def cp_certified(self) -> bool:
        return not self.pre_transpose

    @property
    def endomorphic(self) -> bool:
        return self.in_dim == self.out_dim

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X.matrix if isinstance(X, PsdOperator) else X, dtype=complex)
        if X.shape != (self.in_dim, self.in_dim):
            raise OperatorError(f"input shape {X.shape} does not match channel input dimension {self.in_dim}")
        if self.pre_transpose:
            X = X.T
        return np.einsum("kij,jl,kml->im", self.kraus, X, self.kraus.conj())

    apply = __call__

    def adjoint(self) -> "QuantumChannel":
        """Hilbert-Schmidt adjoint.

        ``K -> K^H`` for the CP form; for the transpose-composed form the
        adjoint is again transpose-composed with Kraus operators ``K^T``.
        """
        if self.pre_transpose:
            return QuantumChannel(np.transpose(self.kraus, (0, 2, 1)), True)
        return QuantumChannel(np.transpose(self.kraus.conj(), (0, 2, 1)), False)

    def compose(self, other: "QuantumChannel") -> "QuantumChannel":
        """The map ``self o other``."""
        if other.out_dim != self.in_dim:
            raise OperatorError("dimension mismatch in composition")
        L = other.kraus.conj() if self.pre_transpose else other.kraus
        K = np.einsum("aij,bjk->abik", self.kraus, L).reshape(-1, self.out_dim, other.in_dim)
        return QuantumChannel(K, self.pre_transpose != other.pre_transpose)

    @cached_property
    def superoperator(self) -> np.ndarray:
        """Matrix acting on column-stacked ``vec(X)``."""
        S = sum(np.kron(K.conj(), K) for K in self.kraus)
        if self.pre_transpose:
            d = self.in_dim
            perm = np.arange(d * d).reshape(d, d).T.ravel()
            S = S[:, perm]
        return S

    def choi(self) -> np.ndarray:
        """``sum_{ij} |i><j| (x) Phi(|i><j|)``."""
        d = self.in_dim
        blocks = np.zeros((d * self.out_dim, d * self.out_dim), dtype=complex)
        for i in range(d):
            for j in range(d):
                E = np.zeros((d, d))
                E[i, j] = 1.0
                blocks[i * self.out_dim:(i + 1) * self.out_dim, j * self.out_dim:(j + 1) * self.out_dim] = self(E)
        return blocks

    def is_trace_preserving(self, tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.adjoint()(np.eye(self.out_dim)), np.eye(self.in_dim), atol=tol, rtol=0))

    def is_unital(self, tol: float = 1e-9) -> bool:
        return bool(np.allclose(self(np.eye(self.in_dim)), np.eye(self.out_dim), atol=tol, rtol=0))

    def is_bistochastic(self, tol: float = 1e-9) -> bool:
        return self.is_trace_preserving(tol) and self.is_unital(tol)

    def __repr__(self) -> str:
        tag = ", pre_transpose" if self.pre_transpose else ""
        return f"QuantumChannel({self.in_dim}->{self.out_dim}, {len(self.kraus)} Kraus{tag})"


@dataclass(frozen=True)
class ClassicalQuantumChannel:
    """Map from probability vectors to operators, ``delta_i -> outputs[i]``."""

    outputs: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        outs = tuple(as_psd(o).matrix for o in self.outputs)
        if not outs:
            raise OperatorError("classical-quantum channel needs at least one output")
        object.__setattr__(self, "outputs", outs)

    @property
    def k(self) -> int:
        return len(self.outputs)

    @property
    def out_dim(self) -> int:
        return self.outputs[0].shape[0]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.k,):
            raise OperatorError(f"expected a length-{self.k} vector")
        return np.einsum("i,ijk->jk", x, np.array(self.outputs))

    def is_trace_preserving(self, tol: float = 1e-9) -> bool:
        return all(abs(np.trace(o).real - 1) <= tol for o in self.outputs)

    def as_channel(self) -> QuantumChannel:
        """Equivalent quantum channel on diagonal ``k x k`` inputs (off-diagonals are discarded)."""
        kraus = []
        for i, out in enumerate(self.outputs):
            P = PsdOperator(out)
            for lam, v in zip(P.positive_eigenvalues, P.support_basis.T):
                K = np.zeros((self.out_dim, self.k), dtype=complex)
                K[:, i] = np.sqrt(lam) * v
                kraus.append(K)
        return QuantumChannel(kraus)


# constructors ---------------------------------------------------------------


def identity_channel(d: int) -> QuantumChannel:
    return QuantumChannel([np.eye(d)])


def unitary_channel(U: np.ndarray) -> QuantumChannel:
    U = np.asarray(U, dtype=complex)
    if not np.allclose(U.conj().T @ U, np.eye(U.shape[1]), atol=1e-9):
        raise OperatorError("matrix is not an isometry")
    return QuantumChannel([U])


def transpose_map(d: int) -> QuantumChannel:
    """Matrix transposition, positive and trace-preserving but not CP."""
    return QuantumChannel([np.eye(d)], pre_transpose=True)


def pinching_channel(projections: Sequence[np.ndarray], tol: float = 1e-9) -> QuantumChannel:
    """``X -> sum_i P_i X P_i`` for orthogonal projections summing to ``I``."""
    P = [np.asarray(p, dtype=complex) for p in projections]
    d = P[0].shape[0]
    for i, p in enumerate(P):
        if not (np.allclose(p, p.conj().T, atol=tol) and np.allclose(p @ p, p, atol=tol)):
            raise OperatorError(f"element {i} is not an orthogonal projection")
        for q in P[i + 1:]:
            if not np.allclose(p @ q, 0, atol=tol):
                raise OperatorError("projections are not pairwise orthogonal")
    if not np.allclose(sum(P), np.eye(d), atol=tol):
        raise OperatorError("projections do not sum to the identity")
    return QuantumChannel(P)


def diagonal_pinching(d: int) -> QuantumChannel:
    """Pinching onto the diagonal in the standard basis."""
    return pinching_channel([np.diag(np.eye(d)[i]) for i in range(d)])


def random_unitary(d: int, seed: SeedLike = None) -> np.ndarray:
    """Haar unitary via QR with phase-normalized ``R`` diagonal."""
    rng = _rng(seed)
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    phases = np.diag(R) / np.abs(np.diag(R))
    return Q * phases


def random_state(dim: int, rank: int | None = None, seed: SeedLike = None) -> PsdOperator:
    """Wishart-type random density matrix of prescribed rank."""
    rng = _rng(seed)
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise ValueError("rank must lie between 1 and dim")
    G = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    M = G @ G.conj().T
    return PsdOperator(M / np.trace(M).real)


def random_channel(in_dim: int, out_dim: int, env_dim: int, seed: SeedLike = None) -> QuantumChannel:
    """CPTP map from a Haar-random Stinespring isometry ``C^in -> C^out (x) C^env``."""
    if out_dim * env_dim < in_dim:
        raise ValueError("out_dim * env_dim must be at least in_dim")
    V = random_unitary(out_dim * env_dim, seed)[:, :in_dim].reshape(out_dim, env_dim, in_dim)
    return QuantumChannel([V[:, e, :] for e in range(env_dim)])


def random_bistochastic(dim: int, num_unitaries: int, seed: SeedLike = None) -> QuantumChannel:
    """Random convex mixture of Haar unitary conjugations."""
    rng = _rng(seed)
    p = rng.dirichlet(np.ones(num_unitaries))
    return QuantumChannel([np.sqrt(w) * random_unitary(dim, rng) for w in p])


def stochastic_matrix_channel(T: np.ndarray, basis: np.ndarray | None = None) -> QuantumChannel:
    """``X -> sum_x |e_x><e_x| sum_y T_xy <e_y, X e_y>`` for a row-stochastic ``T``.

    The map is unital; it is trace-preserving only if ``T`` is also column-stochastic.
    """
    T = np.asarray(T, dtype=float)
    k = T.shape[0]
    if T.shape != (k, k) or np.any(T < 0) or not np.allclose(T.sum(axis=1), 1, atol=1e-12):
        raise ValueError("T must be a square row-stochastic matrix")
    E = np.eye(k, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    kraus = [
        np.sqrt(T[x, y]) * np.outer(E[:, x], E[:, y].conj())
        for x in range(k)
        for y in range(k)
        if T[x, y] > 0
    ]
    return QuantumChannel(kraus)


@dataclass(frozen=True)
class ClassicalDomain:
    """Index classes on which multiplicative-domain elements are constant."""

    classes: tuple[tuple[int, ...], ...]
    basis: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.classes)

    def matrices(self) -> list[np.ndarray]:
        E = self.basis
        return [sum(np.outer(E[:, y], E[:, y].conj()) for y in c) for c in self.classes]


def classical_mult_domain_predicate(T: np.ndarray, basis: np.ndarray | None = None) -> ClassicalDomain:
    """Multiplicative domain of a stochastic-matrix channel from the pattern of ``T``.

    Indices ``y, z`` are linked when ``T_xy T_xz > 0`` for some ``x``; the
    domain consists of diagonal matrices constant on the linked classes.
    Requires every column of ``T`` to be nonzero.
    """
    T = np.asarray(T, dtype=float)
    k = T.shape[0]
    if np.any(T.sum(axis=0) <= 0):
        raise ValueError("predicate requires every column of T to be nonzero")
    parent = list(range(k))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for row in T:
        idx = np.flatnonzero(row > 0)
        for j in idx[1:]:
            parent[find(j)] = find(idx[0])
    groups: dict[int, list[int]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    E = np.eye(k, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    return ClassicalDomain(tuple(tuple(g) for g in groups.values()), E)


# Petz maps and reverse tests -----------------------------------------------


def petz_pair(phi: QuantumChannel, sigma, tol: float = 1e-9) -> tuple[QuantumChannel, QuantumChannel]:
    """Petz maps ``(Phi_sigma, Phi_sigma^*)`` of a trace-preserving map.

    ``Phi_sigma(X) = Phi(sigma)^{-1/2} Phi(sigma^{1/2} X sigma^{1/2}) Phi(sigma)^{-1/2}``
    with generalized inverses; ``Phi_sigma^*`` is its adjoint and recovers
    ``sigma`` from ``Phi(sigma)``, which is checked on construction.
    """
    sigma = as_psd(sigma)
    if sigma.rank == 0:
        raise OperatorError("reference operator must be nonzero")
    if not phi.is_trace_preserving():
        raise OperatorError("Petz recovery needs a trace-preserving map")
    out = PsdOperator(phi(sigma.matrix))
    left = out.power(-0.5)
    right = sigma.sqrt()
    if phi.pre_transpose:
        right = right.T
    forward = QuantumChannel(np.einsum("ij,kjl,lm->kim", left, phi.kraus, right), phi.pre_transpose)
    backward = forward.adjoint()
    err = np.linalg.norm(backward(out.matrix) - sigma.matrix, 1)
    if err > tol * max(1.0, np.linalg.norm(sigma.matrix, 1)):
        raise NumericalInstabilityError(f"Petz identity violated by {err:.3e}")
    return forward, backward


def minimal_reverse_test(rho, sigma, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray, ClassicalQuantumChannel]:
    """Classical pair ``(a, b)`` and channel ``Phi`` with ``Phi(a) = rho`` and ``Phi(b) = sigma``.

    With ``sigma^{-1/2} rho sigma^{-1/2} = sum_i lambda_i P_i``:
    ``b_i = Tr sigma P_i``, ``a_i = lambda_i b_i`` and
    ``Phi(delta_i) = sigma^{1/2} P_i sigma^{1/2} / b_i``.
    """
    rho, sigma = as_psd(rho), as_psd(sigma)
    if not (rho.is_invertible and sigma.is_invertible):
        raise OperatorError("minimal reverse test needs invertible arguments")
    s_half, s_ihalf = sigma.sqrt(), sigma.power(-0.5)
    sd = spectral_decompose(s_ihalf @ rho.matrix @ s_ihalf)
    b = np.array([np.trace(sigma.matrix @ P).real for P in sd.projectors])
    a = sd.eigenvalues * b
    chan = ClassicalQuantumChannel(tuple(s_half @ P @ s_half / bi for P, bi in zip(sd.projectors, b)))
    scale = max(1.0, rho.trace, sigma.trace)
    if (np.abs(chan(a) - rho.matrix).max() > tol * scale) or (np.abs(chan(b) - sigma.matrix).max() > tol * scale):
        raise NumericalInstabilityError("reverse test reconstruction failed")
    return a, b, chan


def superoperator_apply(S: np.ndarray, X: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(S.shape[0])))
    return S.dot(vec(X)).reshape((d, d), order="F")
