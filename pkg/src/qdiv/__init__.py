"""Finite-dimensional quantum f-divergences, recovery maps and reversibility checks."""

from qdiv.config import Tolerances, DEFAULT_TOLERANCES
from qdiv.extended import INF
from qdiv.operators import PsdOperator, spectral_decompose
from qdiv.fdiv import (
    DivergenceFunction,
    build_function,
    standard_f_div,
    maximal_f_div,
    relative_entropy,
    bs_relative_entropy,
    renyi_alpha,
)
from qdiv.channels import QuantumChannel, ClassicalQuantumChannel, petz_pair
from qdiv.azrenyi import AzParams, d_az, sandwiched_renyi
from qdiv.measured import measured_renyi

__all__ = [
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "INF",
    "PsdOperator",
    "spectral_decompose",
    "DivergenceFunction",
    "build_function",
    "standard_f_div",
    "maximal_f_div",
    "relative_entropy",
    "bs_relative_entropy",
    "renyi_alpha",
    "QuantumChannel",
    "ClassicalQuantumChannel",
    "petz_pair",
    "AzParams",
    "d_az",
    "sandwiched_renyi",
    "measured_renyi",
]

__version__ = "0.1.0"
