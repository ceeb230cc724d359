"""Numerical tolerances shared across the package."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass(frozen=True)
class Tolerances:
    """Tolerance bundle.

    Parameters
    ----------
    hermiticity_tol : float
        Allowed ``||A - A^H||_inf`` relative to ``max(1, ||A||_inf)``.
    psd_tol : float
        Negative eigenvalues down to ``-psd_tol * lambda_max`` are clipped to zero.
    clustering_gap : float
        Eigenvalues closer than ``clustering_gap * lambda_max`` share one projector.
    verdict_tol : float
        Absolute tolerance on scalar gaps in equality reports.
    operator_tol : float
        Trace-norm tolerance on operator residuals in equality reports.
    """

    hermiticity_tol: float = 1e-9
    psd_tol: float = 1e-10
    clustering_gap: float = 1e-8
    verdict_tol: float = 1e-9
    operator_tol: float = 1e-8

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                raise ValueError(f"{f.name} must be positive, got {value!r}")


DEFAULT_TOLERANCES = Tolerances()
