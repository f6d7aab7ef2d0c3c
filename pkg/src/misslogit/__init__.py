"""Logistic prediction with missing covariates: data generators, Bayes oracles,
estimators and evaluation metrics."""

__version__ = "0.1.0"
