"""Exception types raised across the package."""

from __future__ import annotations


class MissLogitError(Exception):
    """Base class for package errors."""


class ConditioningError(MissLogitError):
    """Observed-block covariance could not be factorized, even after jitter."""


class CholeskyError(MissLogitError):
    """A covariance matrix is not positive semi-definite within jitter."""


class DegenerateFitError(MissLogitError):
    """A model has no interior optimum or not enough data to be fitted."""


class UnsupportedPredictionError(MissLogitError):
    """A fitted predictor cannot produce a probability for some input row."""


class TransformDomainError(MissLogitError, ValueError):
    """Inverse feature transform evaluated outside the transform's image."""


class ConfigError(MissLogitError, ValueError):
    """Malformed experiment or method configuration."""


class ImputationError(MissLogitError):
    """An imputation model cannot be built, e.g. for a column with no observed values."""
