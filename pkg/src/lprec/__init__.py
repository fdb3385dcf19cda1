"""Simulated low-precision training: float formats, FMAC operators, optimizers, bounds."""

from lprec.errors import ConfigError, FormatOverflowError, LprecError, NonFiniteError
from lprec.floatsim import (
    BF16,
    FP16,
    FP32,
    FloatFormat,
    RngStream,
    RoundingMode,
    machine_epsilon,
    parse_format,
    round_nearest,
    round_stochastic,
    round_to,
)

__version__ = "0.1.0"

__all__ = [
    "BF16",
    "FP16",
    "FP32",
    "ConfigError",
    "FloatFormat",
    "FormatOverflowError",
    "LprecError",
    "NonFiniteError",
    "RngStream",
    "RoundingMode",
    "machine_epsilon",
    "parse_format",
    "round_nearest",
    "round_stochastic",
    "round_to",
]
