"""Dense Hermitian matrix core.

Spectral decompositions with eigenvalue clustering, functional calculus on
supports, left/right multiplication superoperators, scalar and operator
perspectives, operator connections and monotone metric forms.

Conventions
-----------
* Vectorization is column stacking: ``vec(A X B) = (B^T kron A) vec(X)``.
* Powers and inverses of a positive semidefinite operator act on its
  support only, so ``A^0`` is the support projection and ``A^{-1}`` is the
  generalized inverse.
* Logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Protocol, Sequence

import numpy as np

from qdiv.config import DEFAULT_TOLERANCES, Tolerances
from qdiv.extended import INF, ext_mul

ArrayLike = np.ndarray | Sequence


class OperatorError(ValueError):
    """Invalid operator input (non-Hermitian, not PSD, wrong shape)."""


class PerspectiveUndefinedError(OperatorError):
    """No support/endpoint case of the operator perspective applies."""


class NumericalInstabilityError(ArithmeticError):
    """Two evaluations that must agree do not."""


class ScalarFunction(Protocol):
    """What the perspective and connection routines need from a function."""

    f_at_0: float
    fprime_at_inf: float

    def __call__(self, x: np.ndarray) -> np.ndarray: ...

    def transpose(self) -> "ScalarFunction": ...


def _noise_floor(dim: int, scale: float) -> float:
    return 64.0 * dim * np.finfo(float).eps * scale


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    cols = rows if cols is None else cols
    return np.asarray(v).reshape((rows, cols), order="F")


def hermitian(A: ArrayLike, tol: float | None = None) -> np.ndarray:
    """Validate hermiticity and return the symmetrized matrix ``(A + A^H)/2``.

    Parameters
    ----------
    A : array_like
        Square matrix.
    tol : float, optional
        Relative hermiticity tolerance; defaults to the package setting.
    """
    tol = DEFAULT_TOLERANCES.hermiticity_tol if tol is None else tol
    A = np.array(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise OperatorError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise OperatorError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if np.max(np.abs(A - A.conj().T), initial=0.0) > tol * scale:
        raise OperatorError("matrix is not Hermitian within tolerance")
    return (A + A.conj().T) / 2


def trace_norm(X: np.ndarray) -> float:
    """Schatten 1-norm."""
    return float(np.sum(np.linalg.svd(np.asarray(X), compute_uv=False)))


def hs_inner(X: np.ndarray, Y: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product ``Tr X^H Y``."""
    return complex(np.vdot(np.asarray(X), np.asarray(Y)))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Clustered spectral decomposition ``A = sum_a a P_a``.

    Attributes
    ----------
    eigenvalues : ndarray
        Distinct eigenvalues, strictly decreasing.
    bases : tuple of ndarray
        Orthonormal column bases of the eigenspaces; ``P_a = V_a V_a^H``.
    clustering_gap : float
        Relative gap used to merge eigenvalues.
    """

    eigenvalues: np.ndarray
    bases: tuple[np.ndarray, ...]
    clustering_gap: float

    @property
    def projectors(self) -> list[np.ndarray]:
        return [V @ V.conj().T for V in self.bases]

    @property
    def multiplicities(self) -> list[int]:
        return [V.shape[1] for V in self.bases]

    def reconstruct(self) -> np.ndarray:
        d = self.bases[0].shape[0]
        out = np.zeros((d, d), dtype=complex)
        for a, V in zip(self.eigenvalues, self.bases):
            out += a * (V @ V.conj().T)
        return out


def _cluster(w: np.ndarray, V: np.ndarray, gap: float) -> SpectralDecomposition:
    order = np.argsort(w)[::-1]
    w = w[order]
    V = V[:, order]
    scale = max(float(np.max(np.abs(w), initial=0.0)), np.finfo(float).tiny)
    groups: list[list[int]] = [[0]]
    for i in range(1, len(w)):
        if w[groups[-1][-1]] - w[i] > gap * scale:
            groups.append([i])
        else:
            groups[-1].append(i)
    values = np.array([float(np.mean(w[g])) for g in groups])
    bases = tuple(V[:, g] for g in groups)
    return SpectralDecomposition(values, bases, gap)


def spectral_decompose(
    A: ArrayLike, clustering_gap: float | None = None, tol: Tolerances = DEFAULT_TOLERANCES
) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix with eigenvalue clustering.

    Eigenvalues whose gap is below ``clustering_gap * max|eigenvalue|`` are
    merged into one projector.
    """
    gap = tol.clustering_gap if clustering_gap is None else clustering_gap
    H = hermitian(A, tol.hermiticity_tol)
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh rarely fails on finite input
        raise OperatorError(f"eigensolver failed: {exc}") from exc
    return _cluster(w, V, gap)


class PsdOperator:
    """Validated positive semidefinite matrix with cached spectral data.

    Parameters
    ----------
    matrix : array_like or PsdOperator
        Square Hermitian PSD matrix.
    tol : Tolerances, optional
        Tolerance bundle used for validation and clustering.

    Notes
    -----
    Eigenvalues in ``[-psd_tol * lambda_max, 0)`` are clipped to zero, and
    positive eigenvalues below the floating point noise floor
    (``64 d eps lambda_max``) are treated as zero as well.
    """

    def __init__(self, matrix: ArrayLike | "PsdOperator", tol: Tolerances = DEFAULT_TOLERANCES):
        if isinstance(matrix, PsdOperator):
            matrix = matrix.matrix
        H = hermitian(matrix, tol.hermiticity_tol)
        w, V = np.linalg.eigh(H)
        lam_max = max(float(w[-1]), 0.0)
        if w[0] < -tol.psd_tol * lam_max - np.finfo(float).tiny:
            raise OperatorError(
                f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e}, max {lam_max:.3e})"
            )
        w = np.where(w < _noise_floor(len(w), lam_max), 0.0, w)
        self.matrix = H
        self.tol = tol
        self._w = w
        self._V = V

    # basic data -----------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        """All clipped eigenvalues in ascending order."""
        return self._w

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._V

    @cached_property
    def spectral(self) -> SpectralDecomposition:
        return _cluster(self._w, self._V, self.tol.clustering_gap)

    @property
    def trace(self) -> float:
        return float(np.sum(self._w))

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self._w > 0))

    @property
    def is_invertible(self) -> bool:
        return self.rank == self.dim

    @cached_property
    def support_basis(self) -> np.ndarray:
        """Isometry ``d x r`` onto the support."""
        return self._V[:, self._w > 0]

    @cached_property
    def kernel_basis(self) -> np.ndarray:
        return self._V[:, self._w == 0]

    @property
    def positive_eigenvalues(self) -> np.ndarray:
        return self._w[self._w > 0]

    @cached_property
    def support(self) -> np.ndarray:
        W = self.support_basis
        return W @ W.conj().T

    # functional calculus --------------------------------------------------
    def apply(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """``sum_{a > 0} f(a) P_a``; see :func:`func_calculus`."""
        return func_calculus(f, self)

    def power(self, t: float) -> np.ndarray:
        """Support power ``sum_{a > 0} a^t P_a``; ``t = 0`` is the support projection."""
        if t == 0:
            return self.support
        return func_calculus(lambda x: x**t, self)

    def inv(self) -> np.ndarray:
        return self.power(-1.0)

    def sqrt(self) -> np.ndarray:
        return self.power(0.5)

    def supported_in(self, other: "PsdOperator", tol: float = 1e-7) -> bool:
        """Whether ``self^0 <= other^0``."""
        K = other.kernel_basis
        if K.shape[1] == 0:
            return True
        if self.rank == 0:
            return True
        return float(np.linalg.norm(K.conj().T @ self.support_basis, 2)) <= tol

    def __repr__(self) -> str:
        return f"PsdOperator(dim={self.dim}, rank={self.rank}, trace={self.trace:.6g})"


def as_psd(A: ArrayLike | PsdOperator, tol: Tolerances = DEFAULT_TOLERANCES) -> PsdOperator:
    return A if isinstance(A, PsdOperator) else PsdOperator(A, tol)


def func_calculus(f: Callable[[np.ndarray], np.ndarray], A: ArrayLike | PsdOperator) -> np.ndarray:
    """Apply ``f`` on the support: ``sum_{a > 0} f(a) P_a``.

    The zero eigenvalue contributes nothing.  Raises ``OverflowError`` when
    ``f`` is not finite on a positive eigenvalue.
    """
    A = as_psd(A)
    sd = A.spectral
    out = np.zeros((A.dim, A.dim), dtype=complex)
    pos = sd.eigenvalues > 0
    if not np.any(pos):
        return out
    values = np.asarray(f(sd.eigenvalues[pos]), dtype=float)
    if not np.all(np.isfinite(values)):
        raise OverflowError("function is not finite on the positive spectrum")
    for v, V in zip(values, [b for b, p in zip(sd.bases, pos) if p]):
        out += v * (V @ V.conj().T)
    return out


def support_projection(A: ArrayLike | PsdOperator) -> np.ndarray:
    """Orthogonal projection onto the range of ``A``."""
    return as_psd(A).support


def hermitian_function(f: Callable[[np.ndarray], np.ndarray], H: np.ndarray) -> np.ndarray:
    """``f(H)`` for a Hermitian matrix via eigendecomposition (full spectrum)."""
    w, V = np.linalg.eigh(hermitian(H))
    return (V * np.asarray(f(w))) @ V.conj().T


# superoperators -------------------------------------------------------------


@dataclass(frozen=True)
class Superoperator:
    """Linear map on ``d x d`` matrices in column-stacking convention.

    Attributes
    ----------
    dim : int
    matrix : ndarray
        ``d^2 x d^2`` matrix acting on ``vec(X)``.
    eigen_data : list of (complex, ndarray), optional
        Eigenvalues with eigenprojections, when known from commuting factors.
    """

    dim: int
    matrix: np.ndarray
    eigen_data: tuple | None = None

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(X), self.dim)


def lmul(A: np.ndarray) -> Superoperator:
    """Left multiplication ``X -> A X``."""
    A = np.asarray(A, dtype=complex)
    d = A.shape[0]
    return Superoperator(d, np.kron(np.eye(d), A))


def rmul(B: np.ndarray) -> Superoperator:
    """Right multiplication ``X -> X B``."""
    B = np.asarray(B, dtype=complex)
    d = B.shape[0]
    return Superoperator(d, np.kron(B.T, np.eye(d)))


@dataclass(frozen=True)
class RelativeModular:
    """Joint spectral data of ``L_rho R_{sigma^{-1}}``.

    ``table[i, j] = Tr P_i Q_j`` where ``P_i`` runs over the eigenprojections
    of ``rho`` (eigenvalue ``rho_values[i]``) and ``Q_j`` over those of
    ``sigma``.
    """

    rho_values: np.ndarray
    sigma_values: np.ndarray
    table: np.ndarray
    superoperator: Superoperator

    @property
    def spectrum(self) -> np.ndarray:
        """Distinct ratios ``a / b`` over pairs with ``a, b > 0`` and nonzero overlap."""
        ratios = [
            a / b
            for i, a in enumerate(self.rho_values)
            for j, b in enumerate(self.sigma_values)
            if a > 0 and b > 0 and self.table[i, j] > 1e-14
        ]
        if not ratios:
            return np.array([])
        return _cluster(np.array(ratios), np.eye(len(ratios)), 1e-12).eigenvalues

    @property
    def zero_sector(self) -> dict[str, float]:
        """Overlaps involving the kernel of ``rho`` or of ``sigma``."""
        T = self.table
        a0 = self.rho_values == 0
        b0 = self.sigma_values == 0
        return {
            "rho_kernel_sigma_support": float(T[np.ix_(a0, ~b0)].sum()),
            "rho_support_sigma_kernel": float(T[np.ix_(~a0, b0)].sum()),
            "both_kernels": float(T[np.ix_(a0, b0)].sum()),
        }


def relative_modular(rho: ArrayLike | PsdOperator, sigma: ArrayLike | PsdOperator) -> RelativeModular:
    """Relative modular operator ``L_rho R_{sigma^{-1}}`` with its eigen-table."""
    rho, sigma = as_psd(rho), as_psd(sigma)
    if rho.dim != sigma.dim:
        raise OperatorError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    sr, ss = rho.spectral, sigma.spectral
    table = np.array([[np.linalg.norm(P.conj().T @ Q) ** 2 for Q in ss.bases] for P in sr.bases])
    eigen = tuple(
        (a / b, np.kron((Q @ Q.conj().T).T, P @ P.conj().T))
        for a, P in zip(sr.eigenvalues, sr.bases)
        for b, Q in zip(ss.eigenvalues, ss.bases)
        if a > 0 and b > 0
    )
    M = np.kron(sigma.inv().T, rho.matrix)
    return RelativeModular(sr.eigenvalues, ss.eigenvalues, table, Superoperator(rho.dim, M, eigen))


# perspectives ---------------------------------------------------------------


def scalar_perspective(f: ScalarFunction, x: float, y: float) -> float:
    """Perspective ``P_f(x, y) = y f(x / y)`` extended to the boundary.

    ``P_f(0, y) = y f(0+)``, ``P_f(x, 0) = x f'(+inf)``, ``P_f(0, 0) = 0``,
    with ``0 * inf = 0``.
    """
    if x < 0 or y < 0:
        raise ValueError("perspective arguments must be nonnegative")
    if x > 0 and y > 0:
        return float(y * f(np.array([x / y]))[0])
    if x == 0:
        return ext_mul(y, f.f_at_0)
    return ext_mul(x, f.fprime_at_inf)


def support_perspective(
    g: Callable[[np.ndarray], np.ndarray], g0: float, A: PsdOperator, B: PsdOperator
) -> np.ndarray:
    """``B^{1/2} g(B^{-1/2} A B^{-1/2}) B^{1/2}`` computed on ``supp B``.

    Zero eigenvalues of the compressed middle operator take the value ``g0``.
    """
    W = B.support_basis
    d = B.dim
    if W.shape[1] == 0:
        return np.zeros((d, d), dtype=complex)
    b_half = np.sqrt(B.positive_eigenvalues)
    Wb = W * (1.0 / b_half)
    X = Wb.conj().T @ A.matrix @ Wb
    X = (X + X.conj().T) / 2
    w, U = np.linalg.eigh(X)
    floor = _noise_floor(len(w), max(float(w[-1]), 0.0)) + 1e-12 * max(float(w[-1]), 0.0)
    zero = w <= floor
    vals = np.empty_like(w)
    if np.any(zero):
        if not math.isfinite(g0):
            raise PerspectiveUndefinedError("function is infinite at 0 on a zero eigenvalue")
        vals[zero] = g0
    if np.any(~zero):
        vals[~zero] = np.asarray(g(w[~zero]), dtype=float)
    G = (U * vals) @ U.conj().T
    Wh = W * b_half
    out = Wh @ G @ Wh.conj().T
    return (out + out.conj().T) / 2


def parallel_sum(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Parallel sum ``A : B = A (A + B)^+ B`` of PSD matrices."""
    S = PsdOperator(np.asarray(A) + np.asarray(B))
    out = np.asarray(A) @ S.inv() @ np.asarray(B)
    return (out + out.conj().T) / 2


def operator_perspective(f: ScalarFunction, A: ArrayLike | PsdOperator, B: ArrayLike | PsdOperator) -> np.ndarray:
    """Operator perspective ``P_f(A, B) = B^{1/2} f(B^{-1/2} A B^{-1/2}) B^{1/2}``.

    Extended to non-invertible arguments by the case analysis

    1. ``A^0 = B^0``, or ``f(0+) < inf`` and ``A^0 <= B^0``: support calculus on ``supp B``;
    2. ``f'(+inf) < inf`` and ``B^0 <= A^0``: the transpose formula ``P_{f~}(B, A)``;
    3. both endpoints finite: ``f(0+) B + f'(+inf) A - B tau_{h_f} A`` with
       ``h_f = f(0+) + f'(+inf) x - f``.

    Raises
    ------
    PerspectiveUndefinedError
        When none of the cases applies.
    """
    A, B = as_psd(A), as_psd(B)
    if A.dim != B.dim:
        raise OperatorError(f"dimension mismatch: {A.dim} vs {B.dim}")
    f0, finf = f.f_at_0, f.fprime_at_inf
    a_in_b = A.supported_in(B)
    b_in_a = B.supported_in(A)
    if a_in_b and (b_in_a or math.isfinite(f0)):
        return support_perspective(f, f0, A, B)
    if b_in_a and math.isfinite(finf):
        ft = f.transpose()
        return support_perspective(ft, ft.f_at_0, B, A)
    if math.isfinite(f0) and math.isfinite(finf):
        h = _EndpointComplement(f)
        return f0 * B.matrix + finf * A.matrix - operator_connection(h, B, A)
    failed = []
    if not a_in_b:
        failed.append("A^0 <= B^0 fails")
    if not b_in_a:
        failed.append("B^0 <= A^0 fails")
    raise PerspectiveUndefinedError(
        f"perspective undefined: {', '.join(failed)}; f(0+)={f0}, f'(+inf)={finf}"
    )


class _EndpointComplement:
    """``h_f(x) = f(0+) + f'(+inf) x - f(x)``, a nonnegative operator monotone function."""

    def __init__(self, f: ScalarFunction):
        self.f = f
        self.f_at_0 = 0.0
        self.fprime_at_inf = 0.0
        atoms = getattr(f, "nu_atoms", None)
        self.connection_atoms = None if atoms is None else (0.0, 0.0, tuple(atoms))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.f.f_at_0 + self.f.fprime_at_inf * x - self.f(x)

    def transpose(self) -> "_Transposed":
        return _Transposed(self)


class _Transposed:
    def __init__(self, h):
        self.h = h
        self.f_at_0 = h.fprime_at_inf
        self.fprime_at_inf = h.f_at_0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x * self.h(1.0 / x)

    def transpose(self):
        return self.h


class PowerMean:
    """``h(x) = x^alpha`` for ``0 <= alpha <= 1``, the weighted geometric mean kernel."""

    def __init__(self, alpha: float):
        if not 0 <= alpha <= 1:
            raise ValueError("geometric mean weight must lie in [0, 1]")
        self.alpha = alpha
        self.f_at_0 = 1.0 if alpha == 0 else 0.0
        self.fprime_at_inf = 1.0 if alpha == 1 else 0.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) ** self.alpha

    def transpose(self) -> "PowerMean":
        return PowerMean(1.0 - self.alpha)


def operator_connection(
    h: ScalarFunction,
    A: ArrayLike | PsdOperator,
    B: ArrayLike | PsdOperator,
    check_eps: Sequence[float] = (1e-7, 1e-9),
    rel_tol: float = 1e-5,
) -> np.ndarray:
    """Kubo-Ando connection ``A tau_h B = P_h(B, A)`` for PSD arguments.

    Closed forms are used whenever available: the parallel-sum
    representation if ``h`` carries ``connection_atoms = (a, b, [(s, w), ...])``
    meaning ``h(x) = a + b x + sum w x (1 + s) / (x + s)``, and support
    calculus when one support contains the other.  Otherwise the value is
    evaluated at two regularizations ``A + eps I`` and accepted only if they
    agree to ``rel_tol``.
    """
    A, B = as_psd(A), as_psd(B)
    if A.dim != B.dim:
        raise OperatorError(f"dimension mismatch: {A.dim} vs {B.dim}")
    if not math.isfinite(h.f_at_0):
        raise ValueError("connection kernel must have a finite value at 0")
    atoms = getattr(h, "connection_atoms", None)
    if atoms is not None:
        a, b, terms = atoms
        out = a * A.matrix + b * B.matrix
        for s, w in terms:
            out = out + w * (1 + s) / s * parallel_sum(s * A.matrix, B.matrix)
        return out
    if B.supported_in(A):
        return support_perspective(h, h.f_at_0, B, A)
    if A.supported_in(B):
        ht = h.transpose()
        return support_perspective(ht, ht.f_at_0, A, B)
    d = A.dim
    vals = []
    for eps in check_eps:
        Ae = PsdOperator(A.matrix + eps * np.eye(d))
        Be = PsdOperator(B.matrix + eps * np.eye(d))
        vals.append(support_perspective(h, h.f_at_0, Be, Ae))
    scale = max(np.linalg.norm(vals[-1]), 1e-300)
    if np.linalg.norm(vals[0] - vals[-1]) > rel_tol * scale:
        raise NumericalInstabilityError(
            "regularized connection values disagree; supports are unrelated and the limit is ill-conditioned"
        )
    return vals[-1]


def geometric_mean(A: ArrayLike | PsdOperator, B: ArrayLike | PsdOperator, alpha: float = 0.5) -> np.ndarray:
    """Weighted geometric mean ``A #_alpha B = A^{1/2} (A^{-1/2} B A^{-1/2})^alpha A^{1/2}``."""
    return operator_connection(PowerMean(alpha), A, B)


def monotone_metric_form(
    kappa: Callable[[np.ndarray], np.ndarray], sigma: ArrayLike | PsdOperator, X: np.ndarray
) -> float:
    """Quadratic form ``<X, Omega_sigma^kappa(X)>`` with ``Omega = R_{sigma^{-1}} kappa(L_sigma R_{sigma^{-1}})``.

    In the eigenbasis ``{e_j}`` of ``sigma`` the form is
    ``sum_{j,k} kappa(s_j / s_k) / s_k |<e_j, X e_k>|^2``.
    """
    sigma = as_psd(sigma)
    if not sigma.is_invertible:
        raise OperatorError("monotone metric requires an invertible reference operator")
    s = sigma.eigenvalues
    V = sigma.eigenvectors
    Xt = V.conj().T @ np.asarray(X, dtype=complex) @ V
    ratio = s[:, None] / s[None, :]
    K = np.asarray(kappa(ratio.ravel()), dtype=float).reshape(ratio.shape)
    if np.any(K <= 0) or not np.all(np.isfinite(K)):
        raise ValueError("kappa must be positive and finite on the ratio spectrum")
    return float(np.sum(K / s[None, :] * np.abs(Xt) ** 2))


def bkm_kernel(x: np.ndarray) -> np.ndarray:
    """``log(x) / (x - 1)`` with value 1 at ``x = 1``."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    away = np.abs(x - 1) > 1e-8
    out[away] = np.log(x[away]) / (x[away] - 1)
    near = ~away
    out[near] = 1 - (x[near] - 1) / 2 + (x[near] - 1) ** 2 / 3
    return out


def inverse_sqrt_kernel(x: np.ndarray) -> np.ndarray:
    """``x^{-1/2}``."""
    return np.asarray(x, dtype=float) ** -0.5
