"""Divergence functions and the standard, maximal and sandwich-type f-divergences.

A :class:`DivergenceFunction` bundles a convex function on ``(0, inf)`` with its
endpoint limits ``f(0+)`` and ``f'(+inf) = lim f(x)/x`` and, when known, an
atomic integral representation.  Divergence values are extended reals: plain
floats with ``math.inf`` as the exact ``+inf``.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from qdiv.extended import INF, ext, ext_mul, ext_sum
from qdiv.operators import (
    OperatorError,
    PsdOperator,
    as_psd,
    operator_perspective,
    relative_modular,
    scalar_perspective,
)


class NotOperatorConvexError(TypeError):
    """The maximal f-divergence is only defined for operator convex functions."""


@dataclass(frozen=True)
class Representation:
    """Atomic integral representation of an operator convex function.

    ``kind`` selects the formula; ``coefficients`` and ``atoms = ((s, w), ...)``
    fill it in:

    * ``"lambda"``: ``f(1) + f'(1)(x-1) + c (x-1)^2 + sum w (x-1)^2 / (x+s)``,
      coefficients ``(f(1), f'(1), c)``;
    * ``"mu"``: ``f(0+) + a x + b x^2 + sum w (x/(1+s) - x/(x+s))``,
      coefficients ``(f(0+), a, b)``;
    * ``"nu"``: ``f(0+) + f'(+inf) x - sum w x (1+s) / (x+s)``,
      coefficients ``(f(0+), f'(+inf))``.
    """

    kind: str
    coefficients: tuple[float, ...]
    atoms: tuple[tuple[float, float], ...] = ()

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "lambda":
            f1, fp1, c = self.coefficients
            out = f1 + fp1 * (x - 1) + c * (x - 1) ** 2
            for s, w in self.atoms:
                out = out + w * (x - 1) ** 2 / (x + s)
        elif self.kind == "mu":
            f0, a, b = self.coefficients
            out = f0 + a * x + b * x**2
            for s, w in self.atoms:
                out = out + w * (x / (1 + s) - x / (x + s))
        elif self.kind == "nu":
            f0, finf = self.coefficients
            out = f0 + finf * x
            for s, w in self.atoms:
                out = out - w * x * (1 + s) / (x + s)
        else:
            raise ValueError(f"unknown representation kind {self.kind!r}")
        return out


@dataclass(frozen=True)
class DivergenceFunction:
    """Convex function on ``(0, inf)`` with endpoint data.

    Attributes
    ----------
    name : str
        Human-readable identifier, also the CLI spec string where applicable.
    func : callable
        Vectorized evaluation on positive reals.
    f_at_0 : float
        ``f(0+)``, possibly ``inf``.
    fprime_at_inf : float
        ``lim_{x -> inf} f(x) / x``, possibly ``inf``.
    operator_convex, strictly_convex : bool
    second_derivative_at_1 : float or None
        Exact ``f''(1)``.
    representation : Representation or None
    nu_atoms : tuple or None
        Atoms of ``h_f = f(0+) + f'(+inf) x - f`` as ``((s, w), ...)`` with
        ``h_f(x) = sum w x (1+s)/(x+s)``; present only when both endpoints are
        finite and the measure is atomic.
    support_size : float or None
        Number of atoms of the representing measure; ``inf`` for a continuous
        measure, ``None`` if not operator convex.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    f_at_0: float
    fprime_at_inf: float
    operator_convex: bool
    strictly_convex: bool
    second_derivative_at_1: float | None = None
    representation: Representation | None = field(default=None, repr=False)
    nu_atoms: tuple[tuple[float, float], ...] | None = field(default=None, repr=False)
    support_size: float | None = None
    derivative: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def deriv(self, x) -> np.ndarray:
        """``f'(x)``; central differences only when no analytic derivative is stored."""
        x = np.asarray(x, dtype=float)
        if self.derivative is not None:
            return np.asarray(self.derivative(x), dtype=float)
        h = 1e-6 * np.maximum(x, 1e-3)
        return (self(x + h) - self(x - h)) / (2 * h)

    @property
    def value_at_1(self) -> float:
        return float(self(np.array([1.0]))[0])

    def transpose(self) -> "DivergenceFunction":
        """Transpose ``f~(y) = y f(1/y)``; endpoints are swapped."""
        return transpose_function(self)

    def shifted(self, constant: float) -> "DivergenceFunction":
        """``f + constant``; endpoints at infinity and ``f''`` are unchanged."""
        rep = self.representation
        if rep is not None:
            coeffs = list(rep.coefficients)
            coeffs[0] += constant
            rep = replace(rep, coefficients=tuple(coeffs))
        func = self.func
        return replace(
            self,
            name=f"{self.name}{constant:+g}",
            func=lambda x: func(x) + constant,
            f_at_0=self.f_at_0 + constant,
            representation=rep,
        )

    def normalized(self) -> "DivergenceFunction":
        """``f - f(1)``, so that the normalized function vanishes at 1."""
        c = self.value_at_1
        return self if c == 0 else self.shifted(-c)


def _xlogx(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def eta() -> DivergenceFunction:
    """``x log x``."""
    return DivergenceFunction(
        "eta", _xlogx, 0.0, INF, True, True, 1.0, support_size=INF, derivative=lambda x: np.log(x) + 1
    )


def power_sign(alpha: float) -> float:
    """``s(alpha) = -1`` on ``(0, 1)`` and ``+1`` otherwise."""
    return -1.0 if 0 < alpha < 1 else 1.0


def power(alpha: float) -> DivergenceFunction:
    """``s(alpha) x^alpha``; operator convex for ``0 < alpha <= 2``."""
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError("power exponent must be positive")
    s = power_sign(alpha)
    finf = 0.0 if alpha < 1 else (1.0 if alpha == 1 else INF)
    op_convex = alpha <= 2
    rep = None
    size: float | None = INF if op_convex else None
    if alpha == 1:
        rep, size = Representation("mu", (0.0, 1.0, 0.0)), 0
    elif alpha == 2:
        rep, size = Representation("mu", (0.0, 0.0, 1.0)), 0
    return DivergenceFunction(
        f"power:{alpha:g}",
        lambda x: s * np.asarray(x, dtype=float) ** alpha,
        0.0,
        finf,
        op_convex,
        alpha != 1,
        s * alpha * (alpha - 1),
        rep,
        support_size=size,
        derivative=lambda x: s * alpha * np.asarray(x, dtype=float) ** (alpha - 1),
    )


def f_s(s: float) -> DivergenceFunction:
    """``-x / (x + s)``."""
    s = _positive(s, "s")
    return DivergenceFunction(
        f"fs:{s:g}",
        lambda x: -np.asarray(x, dtype=float) / (np.asarray(x, dtype=float) + s),
        0.0,
        0.0,
        True,
        True,
        2 * s / (1 + s) ** 3,
        Representation("mu", (0.0, -1 / (1 + s), 0.0), ((s, 1.0),)),
        ((s, 1 / (1 + s)),),
        support_size=1,
        derivative=lambda x: -s / (np.asarray(x, dtype=float) + s) ** 2,
    )


def g_s(s: float) -> DivergenceFunction:
    """``(x - 1)^2 / (x + s)``."""
    s = _positive(s, "s")
    return DivergenceFunction(
        f"gs:{s:g}",
        lambda x: (np.asarray(x, dtype=float) - 1) ** 2 / (np.asarray(x, dtype=float) + s),
        1 / s,
        1.0,
        True,
        True,
        2 / (1 + s),
        Representation("lambda", (0.0, 0.0, 0.0), ((s, 1.0),)),
        ((s, (1 + s) / s),),
        support_size=1,
        derivative=lambda x: (x - 1) * (x + 2 * s + 1) / (x + s) ** 2,
    )


def quad() -> DivergenceFunction:
    """``x^2``."""
    return DivergenceFunction(
        "quad",
        lambda x: np.asarray(x, dtype=float) ** 2,
        0.0,
        INF,
        True,
        True,
        2.0,
        Representation("mu", (0.0, 0.0, 1.0)),
        support_size=0,
        derivative=lambda x: 2 * np.asarray(x, dtype=float),
    )


def f_delta(delta: float) -> DivergenceFunction:
    """``1 - x + delta (1 - x)^2``."""
    delta = _positive(delta, "delta")
    return DivergenceFunction(
        f"fdelta:{delta:g}",
        lambda x: 1 - np.asarray(x, dtype=float) + delta * (1 - np.asarray(x, dtype=float)) ** 2,
        1 + delta,
        INF,
        True,
        True,
        2 * delta,
        Representation("mu", (1 + delta, -1 - 2 * delta, delta)),
        support_size=0,
        derivative=lambda x: -1 - 2 * delta * (1 - np.asarray(x, dtype=float)),
    )


def mu_atoms(
    atoms: Sequence[tuple[float, float]], f0: float = 0.0, a: float = 0.0, b: float = 0.0
) -> DivergenceFunction:
    """Function with a finite atomic measure in the ``(f(0+), a, b, mu)`` representation."""
    atoms = tuple((float(s), float(w)) for s, w in atoms)
    for s, w in atoms:
        if s <= 0 or w < 0:
            raise ValueError("atoms need s > 0 and w >= 0")
    if b < 0:
        raise ValueError("quadratic coefficient must be nonnegative")
    rep = Representation("mu", (float(f0), float(a), float(b)), atoms)
    if b > 0:
        finf, nu = INF, None
    else:
        finf = a + sum(w / (1 + s) for s, w in atoms)
        nu = tuple((s, w / (1 + s)) for s, w in atoms)
    fpp = 2 * b + sum(2 * w * s / (1 + s) ** 3 for s, w in atoms)
    nonzero = [(s, w) for s, w in atoms if w > 0]

    def derivative(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return a + 2 * b * x + sum(w * (1 / (1 + s) - s / (x + s) ** 2) for s, w in atoms)

    return DivergenceFunction(
        f"mu-atoms:{list(atoms)}",
        rep,
        float(f0),
        finf,
        True,
        b > 0 or bool(nonzero),
        fpp,
        rep,
        nu,
        support_size=len(nonzero),
        derivative=derivative,
    )


def transpose_function(f: DivergenceFunction) -> DivergenceFunction:
    """Transpose ``f~(y) = y f(1/y)`` with swapped endpoints."""
    func = f.func

    def transposed(y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return y * np.asarray(func(1.0 / y), dtype=float)

    def transposed_derivative(y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return f(1.0 / y) - f.deriv(1.0 / y) / y

    nu = None if f.nu_atoms is None else tuple((1 / s, w) for s, w in f.nu_atoms)
    name = f.name[:-1] if f.name.endswith("~") else f.name + "~"
    return DivergenceFunction(
        name,
        transposed,
        f.fprime_at_inf,
        f.f_at_0,
        f.operator_convex,
        f.strictly_convex,
        f.second_derivative_at_1,
        None,
        nu,
        f.support_size,
        transposed_derivative,
    )


def _positive(value: float, label: str) -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{label} must be positive, got {value}")
    return value


_BUILDERS = {
    "eta": (eta, 0),
    "power": (power, 1),
    "fs": (f_s, 1),
    "gs": (g_s, 1),
    "quad": (quad, 0),
    "fdelta": (f_delta, 1),
}


def build_function(spec: str | DivergenceFunction, *params: float) -> DivergenceFunction:
    """Build a divergence function from an identifier.

    Parameters
    ----------
    spec : str
        One of ``eta``, ``power:alpha``, ``fs:s``, ``gs:s``, ``quad``,
        ``fdelta:delta``, ``mu-atoms:[(s, w), ...]``.  Parameters may also be
        passed positionally, e.g. ``build_function("power", 0.5)``.

    Examples
    --------
    >>> build_function("power:0.5").f_at_0
    0.0
    """
    if isinstance(spec, DivergenceFunction):
        return spec
    spec = spec.strip()
    head, _, tail = spec.partition(":")
    head = head.strip().lower()
    if head == "mu-atoms":
        try:
            atoms = ast.literal_eval(tail.strip())
        except (ValueError, SyntaxError) as exc:
            raise ValueError(f"cannot parse atom list {tail!r}") from exc
        return mu_atoms(atoms)
    if head not in _BUILDERS:
        raise ValueError(f"unknown function {head!r}")
    builder, arity = _BUILDERS[head]
    args = list(params)
    if tail:
        try:
            args = [float(t) for t in tail.split(",")]
        except ValueError as exc:
            raise ValueError(f"bad parameter in {spec!r}") from exc
    if len(args) != arity:
        raise ValueError(f"{head} expects {arity} parameter(s), got {len(args)}")
    return builder(*args)


# divergences ----------------------------------------------------------------


def _pair(rho, sigma) -> tuple[PsdOperator, PsdOperator]:
    rho, sigma = as_psd(rho), as_psd(sigma)
    if rho.dim != sigma.dim:
        raise OperatorError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    return rho, sigma


def infinite_by_support(f: DivergenceFunction, rho: PsdOperator, sigma: PsdOperator) -> bool:
    """Support dichotomy shared by the standard and maximal divergences."""
    if f.f_at_0 == INF and not sigma.supported_in(rho):
        return True
    if f.fprime_at_inf == INF and not rho.supported_in(sigma):
        return True
    return False


def standard_f_div(f: DivergenceFunction | str, rho, sigma) -> float:
    """Standard (Petz-type) quantum f-divergence.

    ``sum_{a,b>0} b f(a/b) Tr P_a Q_b + f(0+) Tr (I - rho^0) sigma
    + f'(+inf) Tr rho (I - sigma^0)`` with ``0 * inf = 0``.
    """
    f = build_function(f)
    rho, sigma = _pair(rho, sigma)
    if infinite_by_support(f, rho, sigma):
        return INF
    rm = relative_modular(rho, sigma)
    total = 0.0
    for i, a in enumerate(rm.rho_values):
        if a <= 0:
            continue
        for j, b in enumerate(rm.sigma_values):
            if b <= 0:
                continue
            total += b * float(f(np.array([a / b]))[0]) * rm.table[i, j]
    terms = [total]
    if math.isfinite(f.f_at_0):
        off_rho = float(np.real(np.trace(sigma.matrix)) - np.real(np.trace(rho.support @ sigma.matrix)))
        terms.append(ext_mul(max(off_rho, 0.0), f.f_at_0))
    if math.isfinite(f.fprime_at_inf):
        off_sigma = float(np.real(np.trace(rho.matrix)) - np.real(np.trace(rho.matrix @ sigma.support)))
        terms.append(ext_mul(max(off_sigma, 0.0), f.fprime_at_inf))
    return ext_sum(terms)


def maximal_f_div(f: DivergenceFunction | str, rho, sigma) -> float:
    """Maximal f-divergence ``Tr P_f(rho, sigma)``.

    Raises
    ------
    NotOperatorConvexError
        If ``f`` is not flagged operator convex.
    """
    f = build_function(f)
    if not f.operator_convex:
        raise NotOperatorConvexError(f"{f.name} is not operator convex")
    rho, sigma = _pair(rho, sigma)
    if infinite_by_support(f, rho, sigma):
        return INF
    return ext(float(np.real(np.trace(operator_perspective(f, rho, sigma)))))


def tilde_f_div(f: DivergenceFunction | str, rho, sigma) -> float:
    """``Tr sigma f(rho^{1/2} sigma^{-1} rho^{1/2})`` for invertible arguments.

    This quantity is not monotone under channels; it exists to exhibit that.
    """
    f = build_function(f)
    rho, sigma = _pair(rho, sigma)
    if not (rho.is_invertible and sigma.is_invertible):
        raise OperatorError("tilde divergence needs invertible arguments")
    r = rho.sqrt()
    M = PsdOperator(r @ sigma.inv() @ r)
    return float(np.real(np.trace(sigma.matrix @ M.apply(f))))


def relative_entropy(rho, sigma) -> float:
    """Umegaki relative entropy ``Tr rho (log rho - log sigma)``."""
    return standard_f_div(eta(), rho, sigma)


def bs_relative_entropy(rho, sigma) -> float:
    """Belavkin-Staszewski relative entropy (maximal divergence of ``x log x``)."""
    return maximal_f_div(eta(), rho, sigma)


def renyi_from_quasi(alpha: float, quasi: float, trace_rho: float) -> float:
    """``(alpha - 1)^{-1} [log(s(alpha) quasi) - log trace_rho]`` with limit conventions."""
    if quasi == INF:
        return INF
    if trace_rho <= 0:
        raise ValueError("Renyi divergence needs a nonzero first argument")
    q = power_sign(alpha) * quasi
    if q <= 0:
        # only possible for alpha < 1 with orthogonal supports
        return INF
    return ext((math.log(q) - math.log(trace_rho)) / (alpha - 1))


def renyi_alpha(alpha: float, rho, sigma) -> float:
    """Normalized Petz-type Renyi divergence; ``alpha = 1`` gives ``S / Tr rho``."""
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    rho, sigma = _pair(rho, sigma)
    if alpha == 1:
        s = relative_entropy(rho, sigma)
        return INF if s == INF else s / rho.trace
    return renyi_from_quasi(alpha, standard_f_div(power(alpha), rho, sigma), rho.trace)


def classical_f_div(f: DivergenceFunction | str, p, q) -> float:
    """Classical f-divergence ``sum_x P_f(p_x, q_x)``."""
    f = build_function(f)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    if np.any(p < -1e-12) or np.any(q < -1e-12):
        raise ValueError("classical inputs must be nonnegative")
    p, q = np.clip(p, 0, None), np.clip(q, 0, None)
    return ext_sum(scalar_perspective(f, float(x), float(y)) for x, y in zip(p, q))
