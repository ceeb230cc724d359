"""Qubit closed forms and deterministic reproductions of explicit constructions.

Each ``reproduce_example`` id rebuilds a small, fully specified instance and
checks its headline facts.  Nothing here uses randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .azrenyi import AzParams, az_equality_battery, d_az, d_max, fidelity
from .channels import (
    QuantumChannel,
    classical_mult_domain_predicate,
    diagonal_pinching,
    petz_pair,
    pinching_channel,
    stochastic_matrix_channel,
)
from .fdiv import (
    eta,
    f_delta,
    maximal_f_div,
    power,
    relative_entropy,
    standard_f_div,
    tilde_f_div,
)
from .operators import PsdOperator, trace_norm
from .reversibility import (
    fixed_point_set,
    maximal_preservation_report,
    multiplicative_domain,
    standard_preservation_report,
)

__all__ = [
    "BlochVector",
    "SingularBlochError",
    "bloch_s_gs",
    "bloch_maxdiv_gs",
    "strict_gap_predicate",
    "Check",
    "Report",
    "EXAMPLE_IDS",
    "reproduce_example",
    "qutrit_pinching_instance",
]

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class SingularBlochError(ValueError):
    """The second Bloch vector lies on the sphere, so the closed form is undefined."""


@dataclass(frozen=True)
class BlochVector:
    """Real 3-vector ``w`` with ``|w| <= 1`` describing ``(I + w . sigma) / 2``."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if w.shape != (3,):
            raise ValueError("a Bloch vector has three components")
        if np.linalg.norm(w) > 1 + 1e-12:
            raise ValueError(f"Bloch vector norm {np.linalg.norm(w):.6g} exceeds 1")
        object.__setattr__(self, "w", w)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.w))

    def density(self) -> np.ndarray:
        return 0.5 * (np.eye(2) + sum(c * P for c, P in zip(self.w, PAULI)))

    @classmethod
    def from_density(cls, rho: np.ndarray) -> "BlochVector":
        rho = np.asarray(rho, dtype=complex)
        if abs(np.trace(rho) - 1) > 1e-9:
            raise ValueError("Bloch vectors describe unit-trace qubit states")
        return cls(np.array([np.real(np.trace(rho @ P)) for P in PAULI]))


def _vectors(w, x, s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    w = w if isinstance(w, BlochVector) else BlochVector(w)
    x = x if isinstance(x, BlochVector) else BlochVector(x)
    if not s > 0:
        raise ValueError("s must be positive")
    if x.norm >= 1 - 1e-12:
        raise SingularBlochError("second state must be invertible (|x| < 1)")
    return w.w, x.w, w.w - s * x.w, w.w + s * x.w


def bloch_s_gs(w, x, s: float) -> float:
    """Standard ``g_s``-divergence of two qubit states from their Bloch vectors."""
    wv, xv, u, v = _vectors(w, x, s)
    y = wv - xv
    M = ((1 + s) ** 2 - u @ u) * np.eye(3) + np.outer(u, u) - np.outer(v, v)
    try:
        return float((1 + s) * y @ np.linalg.solve(M, y))
    except np.linalg.LinAlgError as exc:
        raise SingularBlochError("closed-form kernel is singular") from exc


def bloch_maxdiv_gs(w, x, s: float) -> float:
    """Maximal ``g_s``-divergence of two qubit states from their Bloch vectors."""
    wv, xv, _, v = _vectors(w, x, s)
    y = wv - xv
    return float((1 + s) / ((1 + s) ** 2 - v @ v) * (y @ y))


def strict_gap_predicate(w, x, s: float) -> tuple[float, bool]:
    """Left side of ``|u|^2 + |v|^2 - 2 (1-s)/(1+s) u.v < 4s`` and whether it holds."""
    _, _, u, v = _vectors(w, x, s)
    lhs = float(u @ u + v @ v - 2 * (1 - s) / (1 + s) * (u @ v))
    return lhs, lhs < 4 * s


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        val = self.value
        if val is not None and math.isinf(val):
            val = "inf"
        return {"name": self.name, "pass": self.passed, "value": val, "detail": self.detail}


@dataclass
class Report:
    example: str
    title: str
    checks: list[Check] = field(default_factory=list)
    verdict: str = ""

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, value: float | None = None, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), None if value is None else float(value), detail))

    def to_dict(self) -> dict:
        return {
            "example": self.example,
            "title": self.title,
            "verdict": self.verdict,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }

    def table(self) -> str:
        lines = [f"[{self.example}] {self.title}: {'PASS' if self.passed else 'FAIL'}"]
        if self.verdict:
            lines.append(f"  verdict: {self.verdict}")
        for c in self.checks:
            val = "" if c.value is None else f"  {c.value:.6g}"
            extra = f"  ({c.detail})" if c.detail else ""
            lines.append(f"  {'ok  ' if c.passed else 'FAIL'} {c.name}{val}{extra}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# individual constructions


def qutrit_pinching_instance() -> tuple[QuantumChannel, np.ndarray, np.ndarray]:
    """Qutrit pinching with a rank-one first state and a tuned second state.

    ``psi = (1, 1, 0)``, ``sigma = b1 |x1><x1| + b2 |x2><x2| + |x3><x3|`` with
    ``b1 = 1/3``, ``b2 = 3/11``; the map pinches onto ``C^2 (+) 0`` and its complement.
    """
    psi = np.array([1.0, 1.0, 0.0])
    x1 = np.array([1.0, 1.0, 1.0]) / math.sqrt(3)
    x2 = np.array([1.0, 0.0, -1.0]) / math.sqrt(2)
    x3 = np.array([1.0, -2.0, 1.0]) / math.sqrt(6)
    b1, b2 = 1 / 3, 3 / 11
    sigma = b1 * np.outer(x1, x1) + b2 * np.outer(x2, x2) + np.outer(x3, x3)
    rho = np.outer(psi, psi)
    P = np.diag([1.0, 1.0, 0.0])
    phi = pinching_channel([P, np.eye(3) - P])
    return phi, rho.astype(complex), sigma.astype(complex)


def _qutrit_pinching() -> Report:
    rep = Report("ex4.8", "qutrit pinching: maximal divergences preserved, map not reversible")
    phi, rho, sigma = qutrit_pinching_instance()
    psi = np.array([1.0, 1.0, 0.0])
    P = np.diag([1.0, 1.0, 0.0])
    n_full = float(psi @ np.real(PsdOperator(sigma).inv()) @ psi)
    n_comp = float(psi @ np.real(PsdOperator(P @ sigma @ P).inv()) @ psi)
    rep.add("|sigma^-1/2 psi|^2 = 6", abs(n_full - 6) <= 1e-9, n_full)
    rep.add("|(P sigma P)^-1/2 psi|^2 = 6", abs(n_comp - 6) <= 1e-9, n_comp)
    r_out, s_out = phi(rho), phi(sigma)
    q_in = float(np.real(np.trace(rho @ rho @ PsdOperator(sigma).inv())))
    q_out = float(np.real(np.trace(r_out @ r_out @ PsdOperator(s_out).inv())))
    rep.add("quadratic trace preserved", abs(q_in - q_out) <= 1e-9, q_in - q_out)
    _, back = petz_pair(phi, sigma)
    petz = trace_norm(back(r_out) - rho)
    rep.add("Petz recovery fails", petz > 1e-3, petz)
    s_gap = relative_entropy(rho, sigma) - relative_entropy(r_out, s_out)
    rep.add("relative entropy strictly decreases", s_gap > 1e-6, s_gap)
    m_gap = maximal_f_div(eta(), rho, sigma) - maximal_f_div(eta(), r_out, s_out)
    rep.add("maximal relative entropy preserved", abs(m_gap) <= 1e-9, m_gap)
    std = standard_preservation_report(phi, rho, sigma)
    mx = maximal_preservation_report(phi, rho, sigma)
    max_rows_ok = all(c.passed for c in mx.conditions if c.name != "petz recovery")
    rep.add("maximal battery passes", max_rows_ok and bool(mx.consistent))
    rep.add("standard battery fails", std.verdict != "reversible", std["petz recovery"].residual, std.verdict)
    # the Petz map itself: its multiplicative domain sits strictly between the scalars and B(C^3)
    forward, _ = petz_pair(phi, sigma)
    mult = multiplicative_domain(forward)
    fix = fixed_point_set(forward)
    s_inv = PsdOperator(sigma).power(-0.5)
    ratio = s_inv @ rho @ s_inv
    rep.add(
        "scalars < M(Phi_sigma) < B(C^3)",
        1 < mult.dimension < 9,
        mult.dimension,
        f"fixed-point dimension {fix.dimension}",
    )
    rep.add(
        "sigma^-1/2 rho sigma^-1/2 in M(Phi_sigma) but not fixed",
        mult.contains(ratio, 1e-7) and not fix.contains(ratio, 1e-3),
        fix.residual(ratio),
    )
    rep.verdict = "maximal-preserved, not reversible" if rep.passed else "reproduction failed"
    return rep


def _ratio_type(t: float = 0.3, eps: float = 1e-3, delta: float = 1e-3) -> Report:
    rep = Report("appC", "ratio-type divergence is neither increasing nor decreasing under channels")
    f = f_delta(delta)
    rho0 = np.full((2, 2), 0.5)
    rho = (rho0 + eps * np.eye(2)) / (1 + 2 * eps)
    sigma = np.diag([t, 1 - t]).astype(complex)
    pinch = diagonal_pinching(2)
    before = tilde_f_div(f, rho, sigma)
    after = tilde_f_div(f, pinch(rho), pinch(sigma))
    rep.add("increase under diagonal pinching", after > before, after - before)
    limit = 1 - 1 / (4 * t * (1 - t))
    rep.add("value near its small-parameter limit", abs(before - limit) < 0.05, before, f"limit {limit:.6g}")
    # commuting inputs through a bistochastic stochastic matrix: the classical inequality is strict
    T = np.array([[0.8, 0.2], [0.2, 0.8]])
    mix = stochastic_matrix_channel(T)
    r_c, s_c = np.diag([0.7, 0.3]).astype(complex), np.diag([0.4, 0.6]).astype(complex)
    dec = tilde_f_div(f, r_c, s_c) - tilde_f_div(f, mix(r_c), mix(s_c))
    rep.add("strict decrease on commuting inputs", dec > 1e-6, dec)
    conform = max(
        abs(tilde_f_div(f, a, b) - standard_f_div(f, a, b))
        for a, b in ((r_c, s_c), (pinch(rho), sigma), (mix(r_c), mix(s_c)))
    )
    rep.add("agrees with the standard divergence on commuting inputs", conform <= 1e-12, conform)
    rep.verdict = "neither monotone increasing nor decreasing" if rep.passed else "reproduction failed"
    return rep


def _quartic_discontinuity() -> Report:
    rep = Report("appD", "discontinuity of the standard divergence for x^4")
    rho = np.diag([1.0, 0.0]).astype(complex)
    K = np.diag([0.0, 1.0]).astype(complex)
    L = np.full((2, 2), 0.5, dtype=complex)
    quartic = power(4)
    rep.add("x^4 is not operator convex", not quartic.operator_convex)
    eps = [1e-2, 1e-3, 1e-4, 1e-5]
    vals = [standard_f_div(quartic, rho + e * K, rho + e * L) for e in eps]
    ratios = [b / a for a, b in zip(vals, vals[1:])]
    rep.add("growth >= 8x per decade", all(r >= 8 for r in ratios), min(ratios), f"values {', '.join(f'{v:.4g}' for v in vals)}")
    base = standard_f_div(quartic, rho, rho)
    rep.add("limit point value is finite", math.isfinite(base), base)
    square = [standard_f_div(power(2), rho + e * K, rho + e * L) for e in eps]
    drift = abs(square[-1] - standard_f_div(power(2), rho, rho))
    rep.add("operator convex x^2 converges", drift < 1e-4, drift)
    rep.verdict = "diverges" if rep.passed else "reproduction failed"
    return rep


def fidelity_pinching_instance(theta: float = math.pi / 5, a: float = 0.7, b: float = 0.3):
    """Diagonal pinching, ``rho = diag(1, 0)`` and a rotated ``diag(a, b)``."""
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    sigma = (R @ np.diag([a, b]) @ R.T).astype(complex)
    rho = np.diag([1.0, 0.0]).astype(complex)
    return diagonal_pinching(2), rho, sigma


def _fidelity_pinching(theta: float = math.pi / 5, a: float = 0.7, b: float = 0.3) -> Report:
    rep = Report("sec6-fid", "fidelity preserved under pinching that fixes the first state, map not reversible")
    phi, rho, sigma = fidelity_pinching_instance(theta, a, b)
    r_out, s_out = phi(rho), phi(sigma)
    rep.add("first state fixed", trace_norm(r_out - rho) <= 1e-12)
    f_gap = fidelity(rho, sigma) - fidelity(r_out, s_out)
    rep.add("fidelity preserved", abs(f_gap) <= 1e-9, f_gap)
    s_gap = relative_entropy(rho, sigma) - relative_entropy(r_out, s_out)
    rep.add("relative entropy strictly decreases", s_gap > 1e-4, s_gap)
    closed = -math.log(a) * math.cos(theta) ** 2 - math.log(b) * math.sin(theta) ** 2
    rep.add("relative entropy closed form", abs(relative_entropy(rho, sigma) - closed) <= 1e-9)
    _, back = petz_pair(phi, sigma)
    petz = trace_norm(back(r_out) - rho)
    rep.add("Petz recovery fails", petz > 1e-3, petz)
    c2 = a * math.cos(theta) ** 2 + b * math.sin(theta) ** 2
    for alpha in (0.3, 0.5, 0.7):
        params = AzParams(alpha, 1 - alpha)
        want = math.log(c2 ** (1 - alpha)) / (alpha - 1)
        err = max(abs(d_az(params, rho, sigma) - want), abs(d_az(params, r_out, s_out) - want))
        rep.add(f"alpha-z value at z=1-alpha, alpha={alpha}", err <= 1e-9, err)
        battery = az_equality_battery(phi, rho, sigma, params)
        e1 = battery["(E1) alpha-z preserved"]
        e3 = battery["(E3) sigma-Petz recovers"]
        rep.add(f"(E1) holds, (E3) fails at alpha={alpha}", e1.passed and e3.residual > 1e-3, e3.residual)
    rep.verdict = "preservation without reversibility" if rep.passed else "reproduction failed"
    return rep


def _dmax_pinching() -> Report:
    rep = Report("sec6-dmax", "max-relative entropy preserved by pinching, map not reversible")
    mu = (0.5, 0.25, 0.25)
    lam, a, b, c = 0.9, 0.05, 0.05, 0.03
    sigma = np.diag(mu).astype(complex)
    rho = np.array([[lam, 0, 0], [0, a, c], [0, c, b]], dtype=complex)
    phi = diagonal_pinching(3)
    r_out, s_out = phi(rho), phi(sigma)
    rep.add("second state fixed", trace_norm(s_out - sigma) <= 1e-12)
    gap = d_max(rho, sigma) - d_max(r_out, s_out)
    rep.add("max-relative entropy preserved", abs(gap) <= 1e-9, gap, f"value {d_max(rho, sigma):.6g}")
    q_in = float(np.real(np.trace(rho @ rho @ np.linalg.inv(sigma))))
    q_out = float(np.real(np.trace(r_out @ r_out @ np.linalg.inv(s_out))))
    rep.add("quadratic trace strictly decreases", q_in - q_out > 1e-4, q_in - q_out)
    expected = c**2 * (1 / mu[1] + 1 / mu[2])
    rep.add("quadratic gap closed form", abs(q_in - q_out - expected) <= 1e-12, expected)
    rep.verdict = "preservation without reversibility" if rep.passed else "reproduction failed"
    return rep


def _partial_mixer() -> Report:
    rep = Report("appB", "stochastic-matrix channel with scalar multiplicative domain")
    T = np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.25, 0.25, 0.25, 0.25],
            [0.25, 0.25, 0.25, 0.25],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    phi = stochastic_matrix_channel(T)
    rep.add("unital", phi.is_unital())
    rep.add("not trace-preserving", not phi.is_trace_preserving())
    mult = multiplicative_domain(phi)
    rep.add("multiplicative domain is scalar", mult.dimension == 1, mult.dimension)
    rep.add("classical predicate gives one class", len(classical_mult_domain_predicate(T).classes) == 1)
    fix = fixed_point_set(phi)
    rep.add("fixed-point dimension >= 2", fix.dimension >= 2, fix.dimension)
    A = np.diag([1.0, 2.0, 2.0, 3.0]).astype(complex)
    rep.add("A fixed", np.max(np.abs(phi(A) - A)) <= 1e-12)
    sq = float(np.max(np.abs(phi(A @ A) - A @ A)))
    rep.add("A^2 not fixed", sq > 1e-2, sq)
    rep.add("fixed points do not form an algebra", not fix.is_algebra())
    rep.add(
        "multiplicative domain strictly inside fixed points",
        fix.contains(np.eye(4)) and mult.dimension < fix.dimension,
    )
    rep.verdict = "multiplicative domain strictly inside fixed points" if rep.passed else "reproduction failed"
    return rep


_BUILDERS = {
    "ex4.8": _qutrit_pinching,
    "appC": _ratio_type,
    "appD": _quartic_discontinuity,
    "sec6-fid": _fidelity_pinching,
    "sec6-dmax": _dmax_pinching,
    "appB": _partial_mixer,
}
EXAMPLE_IDS = tuple(_BUILDERS)


def reproduce_example(example: str) -> Report | list[Report]:
    """Run one reproduction by id, or all of them for ``"all"``."""
    if example == "all":
        return [fn() for fn in _BUILDERS.values()]
    try:
        return _BUILDERS[example]()
    except KeyError:
        raise ValueError(f"unknown example {example!r}; choose from {', '.join(EXAMPLE_IDS)} or 'all'") from None
