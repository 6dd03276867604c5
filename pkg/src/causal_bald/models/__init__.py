"""Bayesian outcome models exposing per-point epistemic moments."""

from ..errors import NotFittedError
from .ensemble import EnsembleModel, EnsembleSettings, fit_ensemble
from .gp import GpHyperparameters, GpModel, default_hyper_grid, fit_gp, sample_bivariate_tau
from .summary import PosteriorSummary, summary_from_samples


def predict_summary(model, query_covariates) -> PosteriorSummary:
    if model is None:
        raise NotFittedError("model has not been fitted")
    return model.predict_summary(query_covariates)


def sample_tau(model, query_covariates, n_samples: int, rng=None):
    """CATE posterior samples, ``(points, samples)``.

    GP models draw ``n_samples`` from the bivariate arm posterior; ensembles
    return one column per member and ignore ``n_samples``.
    """
    if model is None:
        raise NotFittedError("model has not been fitted")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    return model.sample_tau(query_covariates, n_samples, rng)


__all__ = [
    "EnsembleModel",
    "EnsembleSettings",
    "GpHyperparameters",
    "GpModel",
    "PosteriorSummary",
    "default_hyper_grid",
    "fit_ensemble",
    "fit_gp",
    "predict_summary",
    "sample_bivariate_tau",
    "sample_tau",
    "summary_from_samples",
]
