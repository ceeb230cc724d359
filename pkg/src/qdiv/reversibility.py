"""Fixed-point sets, multiplicative domains, block structure of fixed-point
algebras, and the equality-condition batteries for preservation of standard and
maximal f-divergences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from qdiv.channels import ClassicalQuantumChannel, QuantumChannel, SeedLike, _rng, petz_pair
from qdiv.config import DEFAULT_TOLERANCES, Tolerances
from qdiv.extended import INF
from qdiv.fdiv import DivergenceFunction, eta, g_s, maximal_f_div, power, standard_f_div
from qdiv.operators import (
    OperatorError,
    PsdOperator,
    support_perspective,
    as_psd,
    bkm_kernel,
    geometric_mean,
    inverse_sqrt_kernel,
    monotone_metric_form,
    spectral_decompose,
    trace_norm,
    unvec,
    vec,
)


class StructureError(ArithmeticError):
    """A structural decomposition could not be extracted at tolerance."""


# subspaces ------------------------------------------------------------------


def _null_space(M: np.ndarray, threshold: float) -> np.ndarray:
    """Orthonormal columns spanning vectors with singular value below ``threshold``."""
    if M.shape[0] == 0:
        return np.eye(M.shape[1], dtype=complex)
    _, s, Vh = np.linalg.svd(M)
    s_full = np.zeros(M.shape[1])
    s_full[: len(s)] = s
    return Vh.conj().T[:, s_full < threshold]


@dataclass(frozen=True)
class OperatorSubspace:
    """Subspace of ``d x d`` matrices with a Hilbert-Schmidt orthonormal basis.

    Attributes
    ----------
    d : int
    basis : ndarray
        Shape ``(k, d, d)``.
    """

    d: int
    basis: np.ndarray

    @classmethod
    def from_columns(cls, d: int, columns: np.ndarray) -> "OperatorSubspace":
        """Build from orthonormal columns of vectorized matrices."""
        k = columns.shape[1]
        return cls(d, np.array([unvec(columns[:, i], d) for i in range(k)]).reshape(k, d, d))

    @classmethod
    def span(cls, matrices: Iterable[np.ndarray], tol: float = 1e-9) -> "OperatorSubspace":
        mats = [np.asarray(m, dtype=complex) for m in matrices]
        d = mats[0].shape[0]
        M = np.column_stack([vec(m) for m in mats])
        U, s, _ = np.linalg.svd(M, full_matrices=False)
        keep = s > tol * max(1.0, s[0] if len(s) else 1.0)
        return cls.from_columns(d, U[:, keep])

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    @property
    def columns(self) -> np.ndarray:
        return np.column_stack([vec(b) for b in self.basis]) if self.dimension else np.zeros((self.d**2, 0))

    @property
    def projector(self) -> np.ndarray:
        C = self.columns
        return C @ C.conj().T

    def project(self, X: np.ndarray) -> np.ndarray:
        return unvec(self.projector @ vec(X), self.d)

    def residual(self, X: np.ndarray) -> float:
        """Hilbert-Schmidt distance from ``X`` to the subspace."""
        return float(np.linalg.norm(np.asarray(X) - self.project(X)))

    def contains(self, X: np.ndarray, tol: float = 1e-8) -> bool:
        return self.residual(X) <= tol * max(1.0, float(np.linalg.norm(X)))

    def distance(self, other: "OperatorSubspace") -> float:
        """Frobenius distance between the orthogonal projections onto the spans."""
        return float(np.linalg.norm(self.projector - other.projector))

    @property
    def star_closed(self) -> bool:
        return all(self.contains(b.conj().T, 1e-9) for b in self.basis)

    @property
    def unital(self) -> bool:
        return self.contains(np.eye(self.d), 1e-9)

    def closure_residual(self) -> float:
        """Largest distance of a product of basis elements to the span."""
        worst = 0.0
        for a in self.basis:
            for b in self.basis:
                worst = max(worst, self.residual(a @ b))
        return worst

    def is_algebra(self, tol: float = 1e-8) -> bool:
        return self.closure_residual() <= tol


def fixed_point_set(phi: QuantumChannel, threshold: float = 1e-8) -> OperatorSubspace:
    """``{X : Phi(X) = X}`` as the numerical kernel of ``Phi - id``."""
    if not phi.endomorphic:
        raise OperatorError("fixed points need equal input and output dimension")
    d = phi.in_dim
    S = phi.superoperator - np.eye(d * d)
    return OperatorSubspace.from_columns(d, _null_space(S, threshold))


def _random_faithful_state(d: int, rng: np.random.Generator) -> np.ndarray:
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    M = G @ G.conj().T + 0.1 * np.eye(d)
    return M / np.trace(M).real


def _domain_form(phi: QuantumChannel, omega: np.ndarray) -> np.ndarray:
    S = phi.superoperator
    d_in = phi.in_dim
    d_out = phi.out_dim
    w_in = phi.adjoint()(omega)
    I_in, I_out = np.eye(d_in), np.eye(d_out)
    G1 = np.kron(w_in.T, I_in) - S.conj().T @ np.kron(omega.T, I_out) @ S
    G2 = np.kron(I_in, w_in) - S.conj().T @ np.kron(I_out, omega) @ S
    G = G1 + G2
    return (G + G.conj().T) / 2


def multiplicative_domain(
    phi: QuantumChannel,
    omega: np.ndarray | PsdOperator | None = None,
    threshold: float = 1e-8,
    seed: SeedLike = 0,
    cross_check: bool = True,
) -> OperatorSubspace:
    """Multiplicative domain of a unital CP map.

    Computed as the joint kernel of the positive sesquilinear forms
    ``Tr omega (Phi(X^H X) - Phi(X)^H Phi(X))`` and
    ``Tr omega (Phi(X X^H) - Phi(X) Phi(X)^H)``.  The result does not depend
    on the faithful reference ``omega``; with ``cross_check`` a second random
    reference is used to confirm this.
    """
    if not phi.cp_certified:
        raise OperatorError("multiplicative domain needs a completely positive map")
    if not phi.is_unital():
        raise OperatorError("multiplicative domain needs a unital map")
    rng = _rng(seed)
    omega = _random_faithful_state(phi.out_dim, rng) if omega is None else as_psd(omega)
    if isinstance(omega, PsdOperator):
        if not omega.is_invertible:
            raise OperatorError("reference state must be invertible")
        omega = omega.matrix

    def kernel(om: np.ndarray) -> OperatorSubspace:
        G = _domain_form(phi, om)
        w, V = np.linalg.eigh(G)
        cut = threshold * max(1.0, float(np.max(np.abs(w))))
        return OperatorSubspace.from_columns(phi.in_dim, V[:, w < cut])

    M = kernel(omega)
    if cross_check:
        M2 = kernel(_random_faithful_state(phi.out_dim, rng))
        if M.dimension != M2.dimension or M.distance(M2) > 1e-6:
            raise StructureError("multiplicative domain depends on the reference state")
    if not (M.star_closed and M.unital):
        raise StructureError("computed multiplicative domain is not a unital *-subspace")
    return M


# block structure ------------------------------------------------------------


@dataclass(frozen=True)
class AlgebraBlock:
    """One summand ``V (B(C^{d_L}) (x) I_{d_R}) V^H`` of a matrix algebra.

    ``isometry`` maps ``C^{d_L} (x) C^{d_R}`` (row-major tensor index
    ``i * d_R + j``) into the ambient space.  ``omega`` is the fixed state on
    the right factor when the block describes fixed-point states.
    """

    d_L: int
    d_R: int
    isometry: np.ndarray
    omega: np.ndarray | None = None

    def embed(self, X_L: np.ndarray) -> np.ndarray:
        """``V (X_L (x) R) V^H`` with ``R = omega`` if present, else identity."""
        R = np.eye(self.d_R) if self.omega is None else self.omega
        V = self.isometry
        return V @ np.kron(X_L, R) @ V.conj().T


@dataclass(frozen=True)
class AlgebraBlockDecomposition:
    blocks: tuple[AlgebraBlock, ...]
    residual_projector: np.ndarray

    @property
    def shape(self) -> list[tuple[int, int]]:
        return [(b.d_L, b.d_R) for b in self.blocks]

    def reassembled(self) -> OperatorSubspace:
        """Span of ``V_k (E_ab (x) I) V_k^H`` over all blocks."""
        mats = []
        for b in self.blocks:
            for a in range(b.d_L):
                for c in range(b.d_L):
                    E = np.zeros((b.d_L, b.d_L))
                    E[a, c] = 1
                    V = b.isometry
                    mats.append(V @ np.kron(E, np.eye(b.d_R)) @ V.conj().T)
        return OperatorSubspace.span(mats)

    def state(self, parts: Sequence[np.ndarray]) -> np.ndarray:
        """``sum_k V_k (X_k (x) omega_k) V_k^H``."""
        return sum(b.embed(X) for b, X in zip(self.blocks, parts))


def _orth(M: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    return U[:, s > tol * max(1.0, s[0] if len(s) else 1.0)]


def _center(A: OperatorSubspace) -> OperatorSubspace:
    k = A.dimension
    M = np.zeros((k * A.d**2, k), dtype=complex)
    for j, Ej in enumerate(A.basis):
        M[:, j] = np.concatenate([vec(Ej @ Ek - Ek @ Ej) for Ek in A.basis])
    coeffs = _null_space(M, 1e-8)
    cols = np.column_stack([A.columns @ c for c in coeffs.T])
    return OperatorSubspace.from_columns(A.d, _orth(cols))


def algebra_block_structure(
    A: OperatorSubspace, seed: SeedLike = 0, attempts: int = 5, tol: float = 1e-8
) -> AlgebraBlockDecomposition:
    """Wedderburn decomposition of a unital *-subalgebra of ``B(C^d)``.

    The center is ``A`` intersected with its commutant; a generic Hermitian
    central element yields the minimal central projections, and inside each
    central block a generic Hermitian element yields minimal projections and
    matrix units, from which the isometry onto ``C^{d_L} (x) C^{d_R}`` is read off.
    """
    if A.closure_residual() > tol:
        raise StructureError("subspace is not closed under multiplication")
    if not (A.star_closed and A.unital):
        raise StructureError("subspace is not a unital *-algebra")
    rng = _rng(seed)
    d = A.d
    Z = _center(A)
    for _ in range(attempts):
        H = np.einsum("k,kij->ij", rng.standard_normal(Z.dimension) + 1j * rng.standard_normal(Z.dimension), Z.basis)
        H = H + H.conj().T
        sd = spectral_decompose(H, clustering_gap=1e-6)
        if len(sd.eigenvalues) == Z.dimension:
            break
    else:
        raise StructureError("no generic central element found")
    blocks = []
    for Wc in sd.bases:
        P = Wc @ Wc.conj().T
        Ak = OperatorSubspace.span([P @ E @ P for E in A.basis])
        n = int(round(math.sqrt(Ak.dimension)))
        r = Wc.shape[1]
        if n * n != Ak.dimension or r % n:
            raise StructureError("central block is not a full matrix algebra")
        m = r // n
        for _ in range(attempts):
            c = rng.standard_normal(Ak.dimension) + 1j * rng.standard_normal(Ak.dimension)
            Hk = np.einsum("k,kij->ij", c, Ak.basis)
            Hk = Wc.conj().T @ (Hk + Hk.conj().T) @ Wc
            inner = spectral_decompose(Hk, clustering_gap=1e-6)
            if len(inner.eigenvalues) == n and all(x == m for x in inner.multiplicities):
                break
        else:
            raise StructureError("no generic element inside a central block")
        E = [Wc @ B @ B.conj().T @ Wc.conj().T for B in inner.bases]
        w = Wc @ inner.bases[0]
        cols = [w]
        for i in range(1, n):
            cands = [E[i] @ Bm @ E[0] for Bm in Ak.basis]
            X = max(cands, key=np.linalg.norm)
            scale = np.trace(X.conj().T @ X).real / m
            cols.append((X / math.sqrt(scale)) @ w)
        V = np.hstack(cols)
        blocks.append(AlgebraBlock(n, m, V))
    dec = AlgebraBlockDecomposition(tuple(blocks), np.zeros((d, d), dtype=complex))
    if dec.reassembled().distance(A) > tol * max(1.0, math.sqrt(A.dimension)) * 10:
        raise StructureError("reassembled algebra does not match the input")
    return dec


def decompose_fixed_point_states(phi: QuantumChannel, sigma, seed: SeedLike = 0) -> AlgebraBlockDecomposition:
    """Block form of the fixed points of ``Phi_sigma^* o Phi`` on ``supp sigma``.

    The fixed points of ``Phi^* o Phi_sigma`` form an algebra
    ``sum_k B(H_L) (x) I_R``; restricting ``sigma`` to each block factorizes
    it as ``sigma_L (x) omega_k`` and the positive fixed points of
    ``Phi_sigma^* o Phi`` are ``sum_k X_k (x) omega_k``.
    """
    sigma = as_psd(sigma)
    if not (phi.cp_certified and phi.is_trace_preserving()):
        raise OperatorError("decomposition needs a CPTP map")
    W = sigma.support_basis
    sigma0 = W.conj().T @ sigma.matrix @ W
    phi0 = QuantumChannel(phi.kraus @ W)
    forward, _ = petz_pair(phi0, sigma0)
    composite = phi0.adjoint().compose(forward)
    fix = fixed_point_set(composite)
    dec = algebra_block_structure(fix, seed=seed)
    blocks = []
    iso = [W @ b.isometry for b in dec.blocks]
    for i, (b, V) in enumerate(zip(dec.blocks, iso)):
        for V2 in iso[i + 1:]:
            if np.linalg.norm(V.conj().T @ sigma.matrix @ V2) > 1e-7 * max(1.0, sigma.trace):
                raise StructureError("reference state is not block diagonal")
        sk = (V.conj().T @ sigma.matrix @ V).reshape(b.d_L, b.d_R, b.d_L, b.d_R)
        s_L = np.einsum("ijkj->ik", sk)
        s_R = np.einsum("ijil->jl", sk)
        omega = s_R / np.trace(s_R).real
        prod = np.kron(s_L, omega).reshape(sk.shape)
        if np.linalg.norm(sk - prod) > 1e-7 * max(1.0, np.linalg.norm(sk)):
            raise StructureError("reference state does not factorize on a block")
        blocks.append(AlgebraBlock(b.d_L, b.d_R, V, omega))
    residual = np.eye(sigma.dim) - sigma.support
    return AlgebraBlockDecomposition(tuple(blocks), residual)


# equality reports -------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol

    def to_dict(self) -> dict:
        res = "inf" if self.residual == INF else self.residual
        return {"name": self.name, "residual": res, "pass": self.passed, "tol": self.tol}


@dataclass
class EqualityReport:
    """Per-condition residuals and a verdict.

    ``verdict`` is ``"reversible"``, ``"maxdiv-preserving-only"`` or ``"neither"``.
    """

    title: str
    conditions: list[Condition]
    verdict: str
    notes: list[str] = field(default_factory=list)
    consistent: bool | None = None

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def passed(self, name: str) -> bool:
        return self[name].passed

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "verdict": self.verdict,
            "conditions": [c.to_dict() for c in self.conditions],
            "notes": list(self.notes),
            "consistent": self.consistent,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        width = max(len(c.name) for c in self.conditions)
        lines = [f"{self.title}: {self.verdict}"]
        for c in self.conditions:
            mark = "pass" if c.passed else "FAIL"
            lines.append(f"  {c.name:<{width}}  {c.residual:.3e}  (tol {c.tol:.0e})  {mark}")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _verdict(petz_residual: float, quadratic_gap: float, tol: Tolerances) -> str:
    if petz_residual <= tol.operator_tol:
        return "reversible"
    if quadratic_gap <= tol.verdict_tol:
        return "maxdiv-preserving-only"
    return "neither"


def _gap(before: float, after: float) -> float:
    """Scalar gap, relative once the values exceed 1 (ill-conditioned references)."""
    if before == INF and after == INF:
        return 0.0
    if before == INF or after == INF:
        return INF
    return abs(before - after) / max(1.0, abs(before))


def _quadratic(rho: PsdOperator, sigma: PsdOperator) -> float:
    return float(np.trace(rho.matrix @ rho.matrix @ sigma.inv()).real)


def _prepare(phi, rho, sigma) -> tuple[QuantumChannel, PsdOperator, PsdOperator]:
    if isinstance(phi, ClassicalQuantumChannel):
        rho = np.diag(np.asarray(rho, dtype=float)) if np.ndim(rho) == 1 else rho
        sigma = np.diag(np.asarray(sigma, dtype=float)) if np.ndim(sigma) == 1 else sigma
        phi = phi.as_channel()
    rho, sigma = as_psd(rho), as_psd(sigma)
    if rho.dim != phi.in_dim or sigma.dim != phi.in_dim:
        raise OperatorError("state dimension does not match the channel input")
    if not phi.is_trace_preserving():
        raise OperatorError("preservation reports need a trace-preserving map")
    if not rho.supported_in(sigma):
        raise OperatorError("support condition rho^0 <= sigma^0 is violated")
    return phi, rho, sigma


def default_f_list() -> list[DivergenceFunction]:
    return [eta(), power(0.5), g_s(1.0), power(2.0)]


def _petz_residual(phi: QuantumChannel, rho: PsdOperator, sigma: PsdOperator) -> float:
    _, recovery = petz_pair(phi, sigma)
    return trace_norm(recovery(phi(rho.matrix)) - rho.matrix)


def standard_preservation_report(
    phi: QuantumChannel,
    rho,
    sigma,
    f_list: Sequence[DivergenceFunction] | None = None,
    z_list: Sequence[float] = (0.5, 1.0, 1.5, 2.0),
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EqualityReport:
    """Conditions equivalent to reversibility of a 2-positive trace-preserving map.

    Rows: the Petz recovery residual, the ``z = 1/2`` and real-``z``
    operator identities, divergence gaps for ``f_list``, monotone metric gaps
    (invertible densities only) and, for the verdict, the quadratic maximal
    divergence gap.
    """
    phi, rho, sigma = _prepare(phi, rho, sigma)
    f_list = default_f_list() if f_list is None else f_list
    conds: list[Condition] = []
    notes = ["operator identity checked on a real z grid only"]
    petz = _petz_residual(phi, rho, sigma)
    conds.append(Condition("petz recovery", petz, tol.operator_tol))
    out_r, out_s = PsdOperator(phi(rho.matrix)), PsdOperator(phi(sigma.matrix))
    adj = phi.adjoint()
    s0 = sigma.support

    def power_identity(z: float) -> float:
        lhs = s0 @ adj(out_s.power(-z) @ out_r.power(2 * z) @ out_s.power(-z)) @ s0
        rhs = sigma.power(-z) @ rho.power(2 * z) @ sigma.power(-z)
        return trace_norm(lhs - rhs) / max(1.0, trace_norm(rhs))

    conds.append(Condition("ratio identity (z=1/2)", power_identity(0.5), tol.operator_tol))
    for z in z_list:
        conds.append(Condition(f"power identity z={z:g}", power_identity(z), tol.operator_tol))
    for f in f_list:
        g = _gap(standard_f_div(f, rho, sigma), standard_f_div(f, out_r, out_s))
        conds.append(Condition(f"S gap {f.name}", g, tol.verdict_tol))
    is_density = abs(rho.trace - 1) < 1e-9 and abs(sigma.trace - 1) < 1e-9
    if is_density and rho.is_invertible and sigma.is_invertible and out_s.is_invertible:
        X = rho.matrix - sigma.matrix
        for label, kappa in (("metric x^-1/2", inverse_sqrt_kernel), ("metric BKM", bkm_kernel)):
            g = _gap(monotone_metric_form(kappa, sigma, X), monotone_metric_form(kappa, out_s, phi(X)))
            conds.append(Condition(label, g, tol.verdict_tol))
    else:
        notes.append("monotone metric rows skipped (need invertible densities)")
    quad = _gap(_quadratic(rho, sigma), _quadratic(out_r, out_s))
    conds.append(Condition("maximal quadratic gap", quad, tol.verdict_tol))
    return EqualityReport("standard preservation", conds, _verdict(petz, quad, tol), notes)


def maximal_preservation_report(
    phi: QuantumChannel | ClassicalQuantumChannel,
    rho,
    sigma,
    f_list: Sequence[DivergenceFunction] | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> EqualityReport:
    """Conditions equivalent to preservation of the maximal f-divergences.

    For a classical-quantum channel, ``rho`` and ``sigma`` may be given as
    probability vectors.
    """
    phi, rho, sigma = _prepare(phi, rho, sigma)
    f_list = default_f_list() if f_list is None else f_list
    out_r, out_s = PsdOperator(phi(rho.matrix)), PsdOperator(phi(sigma.matrix))
    conds: list[Condition] = []
    quad = _gap(_quadratic(rho, sigma), _quadratic(out_r, out_s))
    conds.append(Condition("(c) quadratic gap", quad, tol.verdict_tol))
    g_res = trace_norm(
        phi(rho.matrix @ sigma.inv() @ rho.matrix) - out_r.matrix @ out_s.inv() @ out_r.matrix
    )
    conds.append(Condition("(g) operator identity", g_res, tol.operator_tol))
    kernels = (
        ("sqrt", np.sqrt, 0.0),
        ("square", np.square, 0.0),
        ("x/(x+1)", lambda x: x / (x + 1), 0.0),
    )
    d_flags = []
    for label, fn, v0 in kernels:
        lhs = support_perspective(fn, v0, out_r, out_s)
        rhs = phi(support_perspective(fn, v0, rho, sigma))
        c = Condition(f"(d) perspective {label}", trace_norm(lhs - rhs), tol.operator_tol)
        d_flags.append(c.passed)
        conds.append(c)
    gm = trace_norm(geometric_mean(out_s, out_r) - phi(geometric_mean(sigma, rho)))
    conds.append(Condition("(f) geometric mean", gm, tol.operator_tol))
    for f in f_list:
        g = _gap(maximal_f_div(f, rho, sigma), maximal_f_div(f, out_r, out_s))
        conds.append(Condition(f"maximal gap {f.name}", g, tol.verdict_tol))
    petz = _petz_residual(phi, rho, sigma)
    conds.append(Condition("petz recovery", petz, tol.operator_tol))
    flags = {conds[0].passed, conds[1].passed, all(d_flags)}
    notes = []
    if len(flags) != 1:
        notes.append("equivalent conditions disagree at tolerance; numerical trouble suspected")
    return EqualityReport("maximal preservation", conds, _verdict(petz, quad, tol), notes, len(flags) == 1)
