"""Logistic propensity model fitted by penalized IRLS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ObservationalDataset, sigmoid
from .errors import DegenerateTreatmentError


@dataclass(frozen=True)
class PropensityModel:
    weights: np.ndarray
    bias: float
    floor: float = 1e-3
    n_iter: int = 0
    objective_path: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0 < self.floor < 0.5:
            raise ValueError("floor must lie in (0, 0.5)")
        if not np.all(np.isfinite(self.weights)) or not np.isfinite(self.bias):
            raise ValueError("weights must be finite")

    def treated_probability(self, covariates) -> np.ndarray:
        """Clamped estimate of P(T = 1 | x)."""
        x = np.asarray(covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.weights.shape[0] == 1 else x[None, :]
        p = sigmoid(x @ self.weights + self.bias)
        return np.clip(p, self.floor, 1.0 - self.floor)


def _penalized_nll(w, b, x, t, lam):
    z = x @ w + b
    # log(1 + e^z) - t z, computed stably
    return float(np.sum(np.logaddexp(0.0, z) - t * z) + 0.5 * lam * w @ w)


def fit_propensity(
    pool: ObservationalDataset,
    *,
    l2: float = 1e-4,
    floor: float = 1e-3,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> PropensityModel:
    """Fit ``P(T=1|x) = sigmoid(w.x + b)`` on the pool by Newton/IRLS.

    The ridge ``l2`` applies to ``w`` only.  Each Newton step is halved until
    the penalized negative log-likelihood does not increase, so the objective
    path is monotone.  Iteration stops once the largest parameter update is
    below ``tol`` or after ``max_iter`` steps.
    """
    t = pool.treatments.astype(float)
    if t.min() == t.max():
        raise DegenerateTreatmentError("pool contains a single treatment value")
    x = pool.covariates
    n, d = x.shape
    design = np.column_stack([x, np.ones(n)])
    penalty = np.full(d + 1, l2)
    penalty[-1] = 0.0
    beta = np.zeros(d + 1)
    path = [_penalized_nll(beta[:-1], beta[-1], x, t, l2)]
    it = 0
    for it in range(1, max_iter + 1):
        p = sigmoid(design @ beta)
        w = np.maximum(p * (1.0 - p), 1e-12)
        grad = design.T @ (t - p) - penalty * beta
        hess = (design * w[:, None]).T @ design + np.diag(penalty)
        step = np.linalg.solve(hess + 1e-12 * np.eye(d + 1), grad)
        scale = 1.0
        while True:
            cand = beta + scale * step
            obj = _penalized_nll(cand[:-1], cand[-1], x, t, l2)
            if obj <= path[-1] or scale < 1e-10:
                break
            scale *= 0.5
        if obj > path[-1]:
            # no descent left at machine precision
            break
        update = np.max(np.abs(cand - beta))
        beta = cand
        path.append(obj)
        if update < tol:
            break
    return PropensityModel(beta[:-1].copy(), float(beta[-1]), floor, it, tuple(path))


def predict_pi(model: PropensityModel, covariates, t) -> np.ndarray:
    """Clamped propensity of receiving treatment ``t`` (scalar or per-row vector)."""
    t = np.asarray(t)
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("t must be 0 or 1")
    p1 = model.treated_probability(covariates)
    return np.where(t == 1, p1, 1.0 - p1)
