"""Exception types raised across the simulator."""

from __future__ import annotations


class LprecError(Exception):
    """Base class for simulator errors."""


class FormatOverflowError(LprecError, OverflowError):
    """A value lies outside the finite range of the target format."""


class NonFiniteError(LprecError, ArithmeticError):
    """An operator produced (or was fed) inf or NaN."""


class ConfigError(LprecError, ValueError):
    """Invalid format string, hyperparameter, or experiment configuration."""
