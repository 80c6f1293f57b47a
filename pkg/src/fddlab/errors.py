"""Shared exception types."""


class FddlabError(Exception):
    """Base class for all library-specific errors."""


class ConfigError(FddlabError, ValueError):
    """Inconsistent or out-of-range configuration."""


class FormatError(FddlabError, ValueError):
    """Corrupt, truncated, or mismatched artifact file."""


class NumericError(FddlabError, RuntimeError):
    """Numerical failure beyond the configured tolerances."""


class UnsupportedModelError(FddlabError, ValueError):
    """Model lacks the structure required by the requested operation."""
