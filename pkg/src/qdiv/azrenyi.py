"""Alpha-z Renyi divergences, monotonicity regions and equality conditions.

``q_az``/``d_az`` follow the unnormalized convention (no division by
``Tr rho``).  ``sandwiched_renyi`` is the normalized ``z = alpha`` member and
is what the measured-divergence chain compares against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channels import QuantumChannel, SeedLike, _rng, petz_pair, random_channel, random_state
from .extended import INF, ext
from .operators import PsdOperator, as_psd, hermitian, trace_norm
from .reversibility import (
    Condition,
    EqualityReport,
    StructureError,
    algebra_block_structure,
    fixed_point_set,
)

__all__ = [
    "AzParams",
    "RegionVerdict",
    "q_az",
    "d_az",
    "sandwiched_renyi",
    "fidelity",
    "d_max",
    "monotonicity_region",
    "az_equality_battery",
    "unitary_from_fixed_algebra",
    "fixing_channel",
    "sample_violation",
    "MajorizationResult",
    "ky_fan_majorization",
    "TraceConvexityReport",
    "trace_convexity_unitary_check",
]

_EXACT = 1e-12


@dataclass(frozen=True)
class AzParams:
    alpha: float
    z: float

    def __post_init__(self):
        a, z = float(self.alpha), float(self.z)
        if not (a > 0 and math.isfinite(a)) or a == 1:
            raise ValueError(f"alpha must be positive, finite and != 1, got {self.alpha}")
        if not (z > 0 and math.isfinite(z)):
            raise ValueError(f"z must be positive and finite, got {self.z}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "z", z)


def q_az(params: AzParams, rho, sigma) -> float:
    """``Tr (rho^{a/2z} sigma^{(1-a)/z} rho^{a/2z})^z`` with support conventions.

    Returns ``inf`` when ``alpha > 1`` and ``rho`` is not supported in ``sigma``.
    """
    rho, sigma = as_psd(rho), as_psd(sigma)
    a, z = params.alpha, params.z
    if a > 1 and not rho.supported_in(sigma):
        return INF
    # Tr (A B A)^z = sum of s_i^{2z} for the singular values of B^{1/2} A
    C = sigma.power((1 - a) / (2 * z)) @ rho.power(a / (2 * z))
    s = np.linalg.svd(C, compute_uv=False)
    return float(np.sum(s[s > 0] ** (2 * z)))


def d_az(params: AzParams, rho, sigma) -> float:
    """``(alpha - 1)^{-1} log Q_{alpha,z}`` without normalization by ``Tr rho``."""
    q = q_az(params, rho, sigma)
    if q == INF:
        return INF
    if q <= 0:
        # alpha < 1 with orthogonal supports
        return INF
    return ext(math.log(q) / (params.alpha - 1))


def sandwiched_renyi(alpha: float, rho, sigma, normalized: bool = True) -> float:
    """Sandwiched Renyi divergence ``D*_alpha``; ``alpha = 1`` gives ``S / Tr rho``."""
    rho = as_psd(rho)
    if alpha == 1:
        from .fdiv import relative_entropy

        s = relative_entropy(rho, sigma)
        return INF if s == INF else s / rho.trace
    d = d_az(AzParams(alpha, alpha), rho, sigma)
    if d == INF or not normalized:
        return d
    return ext(d - math.log(rho.trace) / (alpha - 1))


def fidelity(rho, sigma) -> float:
    """``Tr |rho^{1/2} sigma^{1/2}|``."""
    rho, sigma = as_psd(rho), as_psd(sigma)
    return float(np.sum(np.linalg.svd(rho.sqrt() @ sigma.sqrt(), compute_uv=False)))


def d_max(rho, sigma) -> float:
    """Max-relative entropy ``inf{g : rho <= e^g sigma}``."""
    rho, sigma = as_psd(rho), as_psd(sigma)
    if rho.rank == 0:
        raise ValueError("max-relative entropy of the zero operator is -inf")
    if not rho.supported_in(sigma):
        return INF
    si = sigma.power(-0.5)
    top = float(np.linalg.eigvalsh(hermitian(si @ rho.matrix @ si))[-1])
    return ext(math.log(top))


# ---------------------------------------------------------------------------
# monotonicity regions


def _le(x: float, y: float) -> bool:
    return x <= y + _EXACT


def _eq(x: float, y: float) -> bool:
    return abs(x - y) <= _EXACT


@dataclass(frozen=True)
class RegionVerdict:
    """Which published sufficient conditions for monotonicity apply.

    ``general_conditions`` refer to arbitrary channels; ``fixedpoint_conditions``
    to bistochastic maps with the argument named by ``context`` fixed.
    """

    params: AzParams
    context: str
    general_conditions: frozenset[str]
    fixedpoint_conditions: frozenset[str]

    @property
    def monotone_claimed(self) -> bool:
        return bool(self.general_conditions or self.fixedpoint_conditions)

    def to_dict(self) -> dict:
        return {
            "alpha": self.params.alpha,
            "z": self.params.z,
            "context": self.context,
            "general": sorted(self.general_conditions),
            "fixed_point": sorted(self.fixedpoint_conditions),
            "monotone_claimed": self.monotone_claimed,
        }


_CONTEXTS = ("general", "fixed_sigma", "fixed_rho")


def monotonicity_region(params: AzParams, context: str = "general") -> RegionVerdict:
    """Evaluate the known sufficient conditions for ``D_{alpha,z}`` monotonicity.

    Parameters
    ----------
    params : AzParams
    context : {"general", "fixed_sigma", "fixed_rho"}
        ``fixed_sigma`` means the map is bistochastic and fixes ``sigma``;
        ``fixed_rho`` likewise for ``rho``.
    """
    context = context.replace("-", "_")
    if context not in _CONTEXTS:
        raise ValueError(f"context must be one of {_CONTEXTS}, got {context!r}")
    a, z = params.alpha, params.z
    general = set()
    if a < 1 and _le(max(a, 1 - a), z):
        general.add("a")
    if 1 < a and _le(a, 2) and _eq(z, 1):
        general.add("b")
    if 1 < a and _eq(a, z):
        general.add("c")
    if 1 < a and _le(a, 2) and _eq(z, a / 2):
        general.add("d")
    fixed = set()
    if context == "fixed_sigma":
        if _le(a, z) and _le(z, 1):
            fixed.add("i")
        if _le(max(1, a / 2), z) and _le(z, a):
            fixed.add("iii")
    elif context == "fixed_rho":
        if 0 < 1 - a and _le(1 - a, z) and _le(z, 1):
            fixed.add("ii")
        if a > 1 and _le(max(1, a - 1), z):
            fixed.add("iv")
    return RegionVerdict(params, context, frozenset(general), frozenset(fixed))


def fixing_channel(X, num_unitaries: int = 3, seed: SeedLike = None) -> QuantumChannel:
    """Random mixture of unitaries commuting with ``X``; bistochastic and fixes ``X``.

    The unitaries are diagonal in an eigenbasis of ``X`` with random phases.
    """
    rng = _rng(seed)
    _, V = np.linalg.eigh(hermitian(X))
    d = V.shape[0]
    weights = rng.dirichlet(np.ones(num_unitaries))
    kraus = [
        math.sqrt(p) * (V * np.exp(2j * math.pi * rng.random(d))) @ V.conj().T for p in weights
    ]
    return QuantumChannel(np.array(kraus))


def sample_violation(
    params: AzParams, context: str = "general", samples: int = 50, dim: int = 2, seed: SeedLike = 0
) -> float:
    """Largest observed ``D(phi rho || phi sigma) - D(rho || sigma)`` over random triples.

    ``general`` draws Stinespring channels; ``fixed_sigma``/``fixed_rho`` draw
    mixtures of unitaries commuting with the named argument.  Pairs with an
    infinite divergence on both sides are skipped.
    """
    context = context.replace("-", "_")
    if context not in _CONTEXTS:
        raise ValueError(f"context must be one of {_CONTEXTS}, got {context!r}")
    rng = _rng(seed)
    worst = -INF
    for _ in range(samples):
        rho, sigma = random_state(dim, seed=rng), random_state(dim, seed=rng)
        if context == "general":
            phi = random_channel(dim, dim, dim, seed=rng)
        else:
            fixed = sigma if context == "fixed_sigma" else rho
            phi = fixing_channel(fixed.matrix, seed=rng)
        before = d_az(params, rho, sigma)
        after = d_az(params, PsdOperator(phi(rho.matrix)), PsdOperator(phi(sigma.matrix)))
        if before == INF:
            continue
        worst = max(worst, INF if after == INF else after - before)
    return worst


# ---------------------------------------------------------------------------
# equality battery


def unitary_from_fixed_algebra(phi: QuantumChannel, seed: int = 0) -> np.ndarray:
    """Unitary implementing a bistochastic CP map on the algebra ``fix(phi* phi)``.

    On that algebra the map is a trace-preserving *-homomorphism; matrix units
    ``X_i`` and a basis ``w_j`` of the first minimal projection are sent to
    ``phi(X_i) w'_j`` with ``w'_j`` a basis of the range of ``phi(E_1)``.
    """
    if phi.pre_transpose:
        raise StructureError("unitary extraction needs a completely positive map")
    algebra = fixed_point_set(phi.adjoint().compose(phi))
    dec = algebra_block_structure(algebra, seed=seed)
    columns, sources = [], []
    for block in dec.blocks:
        sources.append(block.isometry)
        V, m = block.isometry, block.d_R
        w = V[:, :m]
        E1 = w @ w.conj().T
        img = hermitian(phi(E1))
        vals, vecs = np.linalg.eigh(img)
        w_img = vecs[:, vals > 0.5]
        if w_img.shape[1] != m:
            raise StructureError("image of a minimal projection has the wrong rank")
        for i in range(block.d_L):
            X_i = V[:, i * m : (i + 1) * m] @ w.conj().T
            columns.append(phi(X_i) @ w_img)
    U = np.hstack(columns) @ np.hstack(sources).conj().T
    if U.shape[0] != U.shape[1] or np.max(np.abs(U.conj().T @ U - np.eye(U.shape[1]))) > 1e-7:
        raise StructureError("extracted map is not unitary")
    return U


def _spectrum_distance(X: np.ndarray, Y: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(hermitian(X)) - np.linalg.eigvalsh(hermitian(Y)))))


def _value_gap(before: float, after: float) -> float:
    if before == INF and after == INF:
        return 0.0
    if before == INF or after == INF:
        return INF
    return abs(before - after)


def az_equality_battery(
    phi: QuantumChannel, rho, sigma, params: AzParams, tol: float = 1e-9
) -> EqualityReport:
    """Residuals of the equality conditions (E0)-(E5) for a bistochastic map.

    Rows: (E0) sandwiched preservation, (E1) alpha-z preservation,
    (E2) ``phi* phi`` fixes both, (E3)/(E4) Petz recovery through ``sigma``
    resp. ``rho``, (E5) a common unitary implements ``phi`` on both.
    """
    if not (phi.endomorphic and phi.is_trace_preserving() and phi.is_unital()):
        raise ValueError("equality battery needs a bistochastic map")
    rho, sigma = as_psd(rho), as_psd(sigma)
    a = params.alpha
    r_out, s_out = PsdOperator(phi(rho.matrix)), PsdOperator(phi(sigma.matrix))
    adj = phi.adjoint()
    conds = [
        Condition(
            "(E0) sandwiched preserved",
            _value_gap(d_az(AzParams(a, a), rho, sigma), d_az(AzParams(a, a), r_out, s_out)),
            tol,
        ),
        Condition("(E1) alpha-z preserved", _value_gap(d_az(params, rho, sigma), d_az(params, r_out, s_out)), tol),
    ]
    fix_res = max(
        trace_norm(adj(r_out.matrix) - rho.matrix),
        trace_norm(adj(s_out.matrix) - sigma.matrix),
    )
    conds.append(Condition("(E2) adjoint recovers", fix_res, tol))
    for label, ref in (("(E3) sigma-Petz recovers", sigma), ("(E4) rho-Petz recovers", rho)):
        try:
            _, back = petz_pair(phi, ref)
            res = max(
                trace_norm(back(r_out.matrix) - rho.matrix),
                trace_norm(back(s_out.matrix) - sigma.matrix),
            )
        except (ValueError, ArithmeticError):
            res = INF
        conds.append(Condition(label, res, tol))
    spectral = max(_spectrum_distance(r_out.matrix, rho.matrix), _spectrum_distance(s_out.matrix, sigma.matrix))
    notes = [f"eigenvalue pre-check distance {spectral:.3e}"]
    if spectral > tol or fix_res > math.sqrt(tol):
        res5 = max(spectral, fix_res)
        notes.append("(E5) rejected by the pre-check")
    else:
        try:
            U = unitary_from_fixed_algebra(phi)
            res5 = max(
                trace_norm(r_out.matrix - U @ rho.matrix @ U.conj().T),
                trace_norm(s_out.matrix - U @ sigma.matrix @ U.conj().T),
            )
        except StructureError as exc:
            notes.append(f"(E5) unitary extraction failed: {exc}")
            res5 = INF
    conds.append(Condition("(E5) common unitary", res5, tol))
    verdict = "reversible" if conds[3].passed else "not reversible"
    return EqualityReport(f"alpha-z equality (alpha={a:g}, z={params.z:g})", conds, verdict, notes)


# ---------------------------------------------------------------------------
# majorization


@dataclass(frozen=True)
class MajorizationResult:
    partial_sum_gaps: np.ndarray
    kyfan_residual: float
    passed: bool


def ky_fan_majorization(phi: QuantumChannel, X, tol: float = 1e-9) -> MajorizationResult:
    """Check that the spectrum of ``phi(X)`` is majorized by that of ``X``.

    ``partial_sum_gaps[k-1]`` is the top-``k`` eigenvalue sum of ``X`` minus
    that of ``phi(X)``; each Ky Fan sum is cross-checked against
    ``Tr X P_k`` with ``P_k`` the projection onto the top ``k`` eigenvectors.
    """
    X = hermitian(X)
    Y = hermitian(phi(X))
    gaps, kyfan = [], 0.0
    sums = []
    for M in (X, Y):
        w, V = np.linalg.eigh(M)
        w, V = w[::-1], V[:, ::-1]
        partial = np.cumsum(w)
        for k in range(1, len(w) + 1):
            P = V[:, :k] @ V[:, :k].conj().T
            kyfan = max(kyfan, abs(float(np.real(np.trace(M @ P))) - partial[k - 1]))
        sums.append(partial)
    gaps = sums[0] - sums[1]
    passed = bool(np.all(gaps >= -tol) and abs(gaps[-1]) <= tol)
    return MajorizationResult(gaps, kyfan, passed)


@dataclass(frozen=True)
class TraceConvexityReport:
    trace_gap: float
    square_residual: float
    fixed_residual: float
    spectrum_distance: float
    tol: float

    @property
    def convexity_passed(self) -> bool:
        return self.trace_gap <= self.tol

    @property
    def unitary_equivalent(self) -> bool:
        return max(self.square_residual, self.fixed_residual, self.spectrum_distance) <= self.tol

    @property
    def consistent(self) -> bool:
        """The three equality criteria either all vanish or all fail."""
        small = [r <= self.tol for r in (self.square_residual, self.fixed_residual, self.spectrum_distance)]
        return all(small) or not any(small)


def trace_convexity_unitary_check(
    phi: QuantumChannel,
    X,
    f: Callable[[np.ndarray], np.ndarray] = np.square,
    tol: float = 1e-9,
) -> TraceConvexityReport:
    """Trace inequality ``Tr f(phi(X)) <= Tr f(X)`` and the unitary-equality residuals."""
    X = hermitian(X)
    Y = hermitian(phi(X))
    tf = lambda M: float(np.sum(f(np.linalg.eigvalsh(M))))  # noqa: E731
    return TraceConvexityReport(
        trace_gap=tf(Y) - tf(X),
        square_residual=abs(float(np.real(np.trace(Y @ Y) - np.trace(X @ X)))),
        fixed_residual=trace_norm(phi.adjoint()(Y) - X),
        spectrum_distance=_spectrum_distance(Y, X),
        tol=tol,
    )
