"""Values in the half-line-extended reals ``(-inf, +inf]``.

Divergence values are plain Python floats where ``math.inf`` is the exact
``+inf`` marker.  The helpers below enforce the conventions ``0 * inf = 0``
and reject ``-inf`` and NaN.
"""

from __future__ import annotations

import math

INF = math.inf


class ExtendedRealError(ArithmeticError):
    """Raised when a value leaves ``(-inf, +inf]``."""


def ext(value: float) -> float:
    """Validate and return ``value`` as an extended real."""
    value = float(value)
    if math.isnan(value) or value == -math.inf:
        raise ExtendedRealError(f"value {value!r} is not in (-inf, +inf]")
    return value


def ext_mul(coef: float, value: float) -> float:
    """Product with the convention ``0 * inf = 0``."""
    coef = float(coef)
    value = float(value)
    if coef == 0.0 or value == 0.0:
        return 0.0
    return ext(coef * value)


def ext_sum(values) -> float:
    """Sum of extended reals; any ``+inf`` term makes the sum ``+inf``."""
    total = 0.0
    for v in values:
        v = ext(v)
        if v == INF:
            return INF
        total += v
    return total


def is_inf(value: float) -> bool:
    return value == INF
