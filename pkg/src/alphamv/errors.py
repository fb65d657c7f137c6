"""Exception and warning types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """A configuration file could not be parsed."""


class ValidationError(ValueError):
    """A model invariant was violated.

    Carries a short machine-readable ``tag`` (e.g. ``"eta<=theta"``) so that
    batch tooling can report which invariant failed without parsing prose.
    """

    def __init__(self, tag: str, message: str):
        super().__init__(message)
        self.tag = tag


class NumericalError(RuntimeError):
    """A numerical procedure failed (bracket expansion, unbounded demand, ...)."""


class SaturationWarning(RuntimeWarning):
    """An exponent was clipped at the configured saturation bound."""
