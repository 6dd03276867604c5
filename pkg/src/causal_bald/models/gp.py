"""Exact Gaussian-process outcome model over (covariates, treatment).

The treatment flag is appended to the covariates as one more real input with
its own lengthscale, so the two arms share a kernel and
``Cov(mu(x, 0), mu(x, 1))`` is non-zero and learned from data.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from ..data import ObservationalDataset
from ..errors import NumericError
from .summary import PosteriorSummary

JITTER_LEVELS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
_CHUNK = 4096


@dataclass(frozen=True)
class GpHyperparameters:
    """Kernel hyperparameters in standardized-outcome units.

    ``lengthscales`` has one entry per covariate followed by the treatment
    lengthscale.
    """

    lengthscales: tuple[float, ...]
    signal_var: float
    noise_var: float

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        if len(ls) < 2 or not all(v > 0 and np.isfinite(v) for v in ls):
            raise ValueError("need positive lengthscales for >= 1 covariate plus treatment")
        if not self.signal_var > 0:
            raise ValueError("signal_var must be > 0")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be > 0")
        object.__setattr__(self, "lengthscales", ls)

    @property
    def treatment_lengthscale(self) -> float:
        return self.lengthscales[-1]


def default_hyper_grid(n_features: int) -> list[GpHyperparameters]:
    """Grid over covariate lengthscale, treatment lengthscale, signal and noise-to-signal ratio.

    Covariate lengthscales scale with ``sqrt(n_features)``.  Noise variances
    are laid out as ratios of the signal variance so that :func:`fit_gp` can
    share one factorization across all signal levels.
    """
    root_d = np.sqrt(n_features)
    grid = []
    for lx, lt, s2, ratio in itertools.product(
        (0.3, 0.45, 0.7, 1.0, 1.5, 2.2),
        (0.3, 0.7, 1.5, 4.0),
        (0.5, 1.0, 2.0, 4.0, 8.0),
        (0.01, 0.03, 0.1, 0.3),
    ):
        grid.append(GpHyperparameters((lx * root_d,) * n_features + (lt,), s2, ratio * s2))
    return grid


def se_kernel(a: np.ndarray, b: np.ndarray, lengthscales, signal_var: float) -> np.ndarray:
    """Anisotropic squared-exponential kernel matrix between the rows of ``a`` and ``b``."""
    ls = np.asarray(lengthscales, dtype=float)
    a = a / ls
    b = b / ls
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return signal_var * np.exp(-0.5 * np.maximum(sq, 0.0))


def augment(covariates: np.ndarray, treatments) -> np.ndarray:
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    t = np.broadcast_to(np.asarray(treatments, dtype=float), (x.shape[0],))
    return np.column_stack([x, t])


def robust_cholesky(k: np.ndarray, scale: float = 1.0) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``k``, adding ``scale * jitter`` on failure.

    Returns the factor and the jitter used.  Raises :class:`NumericError` when
    even the largest jitter level leaves ``k`` indefinite.
    """
    eye = np.eye(k.shape[0])
    for jitter in JITTER_LEVELS:
        try:
            return np.linalg.cholesky(k + (scale * jitter) * eye), scale * jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericError(f"matrix not positive definite after jitter {JITTER_LEVELS[-1]:g}")


class GpModel:
    """A Gaussian process conditioned on labeled (x, t, y) triples.

    Outcomes are standardized with ``y_mean`` / ``y_scale`` before conditioning
    and predictions are mapped back to the original units.  A model with no
    training points is the prior.
    """

    def __init__(
        self,
        hyper: GpHyperparameters,
        inputs: np.ndarray,
        targets: np.ndarray,
        y_mean: float = 0.0,
        y_scale: float = 1.0,
        *,
        gram: np.ndarray | None = None,
    ):
        self.hyper = hyper
        self.inputs = np.asarray(inputs, dtype=float).reshape(-1, len(hyper.lengthscales))
        self.targets = np.asarray(targets, dtype=float).reshape(-1)
        self.y_mean = float(y_mean)
        self.y_scale = float(y_scale)
        n = self.inputs.shape[0]
        if n:
            if gram is None:
                gram = se_kernel(self.inputs, self.inputs, hyper.lengthscales, hyper.signal_var)
            else:
                gram = np.array(gram, dtype=float)
            gram[np.diag_indices(n)] += hyper.noise_var
            self.chol, self.jitter = robust_cholesky(gram, hyper.signal_var + hyper.noise_var)
            self.alpha = solve_triangular(
                self.chol.T, solve_triangular(self.chol, self.targets, lower=True), lower=False
            )
        else:
            self.chol = np.zeros((0, 0))
            self.jitter = 0.0
            self.alpha = np.zeros(0)

    @classmethod
    def prior(cls, hyper: GpHyperparameters, y_mean: float = 0.0, y_scale: float = 1.0) -> "GpModel":
        return cls(hyper, np.zeros((0, len(hyper.lengthscales))), np.zeros(0), y_mean, y_scale)

    @property
    def n_train(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.hyper.lengthscales) - 1

    def log_marginal_likelihood(self) -> float:
        """Exact log evidence of the standardized targets."""
        n = self.n_train
        return float(
            -0.5 * self.targets @ self.alpha
            - np.log(np.diag(self.chol)).sum()
            - 0.5 * n * np.log(2.0 * np.pi)
        )

    def _block(self, covariates: np.ndarray) -> tuple[np.ndarray, ...]:
        h = self.hyper
        a0 = augment(covariates, 0.0)
        a1 = augment(covariates, 1.0)
        m = a0.shape[0]
        prior_cov = h.signal_var * np.exp(-0.5 / h.treatment_lengthscale**2)
        if self.n_train == 0:
            zeros = np.zeros(m)
            return zeros, zeros.copy(), np.full(m, h.signal_var), np.full(m, h.signal_var), np.full(m, prior_cov)
        k0 = se_kernel(a0, self.inputs, h.lengthscales, h.signal_var)
        k1 = se_kernel(a1, self.inputs, h.lengthscales, h.signal_var)
        v0 = solve_triangular(self.chol, k0.T, lower=True)
        v1 = solve_triangular(self.chol, k1.T, lower=True)
        return (
            k0 @ self.alpha,
            k1 @ self.alpha,
            h.signal_var - np.einsum("ij,ij->j", v0, v0),
            h.signal_var - np.einsum("ij,ij->j", v1, v1),
            prior_cov - np.einsum("ij,ij->j", v0, v1),
        )

    def predict_summary(self, covariates) -> PosteriorSummary:
        """Joint epistemic posterior of ``[mu(x, 0), mu(x, 1)]`` for each row of ``covariates``."""
        x = np.asarray(covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} covariates, got {x.shape[1]}")
        parts = [self._block(x[i : i + _CHUNK]) for i in range(0, x.shape[0], _CHUNK)]
        m0, m1, v0, v1, c = (np.concatenate(p) for p in zip(*parts))
        s, s2 = self.y_scale, self.y_scale**2
        return PosteriorSummary.from_moments(self.y_mean + s * m0, self.y_mean + s * m1, s2 * v0, s2 * v1, s2 * c)

    def sample_tau(self, covariates, n_samples: int, rng=None) -> np.ndarray:
        """Draw CATE samples, shape ``(points, n_samples)``, from the bivariate arm posterior."""
        if n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        return sample_bivariate_tau(self.predict_summary(covariates), n_samples, rng)

    def save(self, path) -> None:
        """Write an ``.npz`` checkpoint.

        Arrays: ``lengthscales``, ``signal_var``, ``noise_var``, ``inputs``
        (covariates with the treatment as last column), ``targets``
        (standardized outcomes), ``y_mean``, ``y_scale``, ``chol``, ``alpha``
        and ``jitter``.  :meth:`load` restores the stored factorization
        verbatim, so predictions reproduce bit for bit.
        """
        np.savez(
            Path(path),
            lengthscales=np.asarray(self.hyper.lengthscales),
            signal_var=self.hyper.signal_var,
            noise_var=self.hyper.noise_var,
            inputs=self.inputs,
            targets=self.targets,
            y_mean=self.y_mean,
            y_scale=self.y_scale,
            chol=self.chol,
            alpha=self.alpha,
            jitter=self.jitter,
        )

    @classmethod
    def load(cls, path) -> "GpModel":
        with np.load(Path(path)) as z:
            hyper = GpHyperparameters(tuple(z["lengthscales"]), float(z["signal_var"]), float(z["noise_var"]))
            model = cls.__new__(cls)
            model.hyper = hyper
            model.inputs = z["inputs"]
            model.targets = z["targets"]
            model.y_mean = float(z["y_mean"])
            model.y_scale = float(z["y_scale"])
            model.chol = z["chol"]
            model.alpha = z["alpha"]
            model.jitter = float(z["jitter"])
        return model


def sample_bivariate_tau(summary: PosteriorSummary, n_samples: int, rng=None) -> np.ndarray:
    """Sample ``mu1 - mu0`` from per-point 2x2 Gaussian blocks via a jittered Cholesky."""
    rng = np.random.default_rng(rng)
    v0, v1, c = summary.mu0_var, summary.mu1_var, summary.cov01
    scale = np.maximum(np.maximum(v0, v1), 1e-300)
    bad = np.ones(len(summary), dtype=bool)
    l11 = np.zeros(len(summary))
    l21 = np.zeros(len(summary))
    l22 = np.zeros(len(summary))
    for jitter in JITTER_LEVELS:
        a = v0[bad] + jitter * scale[bad]
        d = v1[bad] + jitter * scale[bad]
        with np.errstate(divide="ignore", invalid="ignore"):
            r11 = np.sqrt(a)
            r21 = np.where(r11 > 0, c[bad] / r11, 0.0)
            rem = d - r21**2
        ok = (a >= 0) & (rem >= 0) & ((a > 0) | (c[bad] == 0))
        idx = np.flatnonzero(bad)[ok]
        l11[idx], l21[idx], l22[idx] = r11[ok], r21[ok], np.sqrt(rem[ok])
        bad[idx] = False
        if not bad.any():
            break
    if bad.any():
        raise NumericError(f"{int(bad.sum())} posterior 2x2 blocks are not positive semi-definite")
    z = rng.standard_normal((2, len(summary), n_samples))
    mu0 = summary.mu0_mean[:, None] + l11[:, None] * z[0]
    mu1 = summary.mu1_mean[:, None] + l21[:, None] * z[0] + l22[:, None] * z[1]
    return mu1 - mu0


def _standardize(y: np.ndarray, standardize: bool) -> tuple[float, float]:
    if not standardize:
        return 0.0, 1.0
    sd = float(y.std())
    return float(y.mean()), sd if sd > 0 else 1.0


def condition_gp(
    covariates, treatments, outcomes, hyper: GpHyperparameters, *, standardize: bool = True
) -> GpModel:
    y = np.asarray(outcomes, dtype=float)
    mean, scale = _standardize(y, standardize)
    return GpModel(hyper, augment(covariates, treatments), (y - mean) / scale, mean, scale)


class _DistanceCache:
    """Pairwise squared distances reused across grid candidates.

    Candidates whose covariate lengthscales are all equal reuse one
    covariate-distance matrix; others fall back to a full kernel evaluation.
    """

    def __init__(self, inputs: np.ndarray):
        self.inputs = inputs
        x, t = inputs[:, :-1], inputs[:, -1]
        self.dx = np.maximum(
            (x * x).sum(1)[:, None] + (x * x).sum(1)[None, :] - 2.0 * x @ x.T, 0.0
        )
        self.dt = (t[:, None] - t[None, :]) ** 2

    def gram(self, hyper: GpHyperparameters) -> np.ndarray:
        ls = hyper.lengthscales
        if all(v == ls[0] for v in ls[:-1]):
            return hyper.signal_var * np.exp(-0.5 * (self.dx / ls[0] ** 2 + self.dt / ls[-1] ** 2))
        return se_kernel(self.inputs, self.inputs, ls, hyper.signal_var)


def fit_gp(
    train: ObservationalDataset,
    hyper_grid: Iterable[GpHyperparameters] | None = None,
    *,
    standardize: bool = True,
) -> GpModel:
    """Condition a GP on ``train``, choosing hyperparameters by exact evidence over a grid.

    A training set containing a single treatment arm is accepted; the other
    arm is then informed only through the treatment lengthscale.
    """
    if train is None or len(train) == 0:
        raise ValueError("cannot fit a GP to an empty training set")
    grid: Sequence[GpHyperparameters] = (
        list(hyper_grid) if hyper_grid is not None else default_hyper_grid(train.n_features)
    )
    if not grid:
        raise ValueError("hyper_grid is empty")
    inputs = augment(train.covariates, train.treatments)
    mean, scale = _standardize(train.outcomes, standardize)
    targets = (train.outcomes - mean) / scale
    n = len(targets)
    cache = _DistanceCache(inputs)
    # K + s I = signal * (R + ratio I): one factorization per (lengthscales, ratio)
    factored: dict[tuple, tuple[float, float]] = {}
    best, best_lml = None, -np.inf
    for hyper in grid:
        if len(hyper.lengthscales) != train.n_features + 1:
            raise ValueError("hyperparameter lengthscales do not match the covariate dimension")
        ratio = hyper.noise_var / hyper.signal_var
        key = (hyper.lengthscales, ratio)
        if key not in factored:
            corr = cache.gram(GpHyperparameters(hyper.lengthscales, 1.0, ratio))
            corr[np.diag_indices(n)] += ratio
            chol, _ = robust_cholesky(corr, 1.0 + ratio)
            w = solve_triangular(chol, targets, lower=True)
            factored[key] = (float(w @ w), float(np.log(np.diag(chol)).sum()))
        quad, half_logdet = factored[key]
        s2 = hyper.signal_var
        lml = -0.5 * quad / s2 - 0.5 * n * np.log(s2) - half_logdet - 0.5 * n * np.log(2.0 * np.pi)
        if lml > best_lml:
            best, best_lml = hyper, lml
    if best is not None:
        best = GpModel(best, inputs, targets, mean, scale, gram=cache.gram(best))
    if best is None:
        raise NumericError("no hyperparameter candidate produced a finite marginal likelihood")
    return best
