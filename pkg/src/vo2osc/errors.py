"""Shared exception types."""


class ConfigError(Exception):
    """Invalid configuration (unknown key, bad value, inconsistent setup)."""


class SolverError(Exception):
    """Numerical solver failure (non-convergence, exhausted iterations)."""
