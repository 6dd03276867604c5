from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PosteriorSummary:
    """Epistemic moments of ``(mu(x, 0), mu(x, 1))`` for a batch of query points.

    All fields are arrays of equal length.  Variances are of the *expected*
    outcome and never include observation noise.  Build instances with
    :meth:`from_moments` so the CATE fields stay consistent with the arms.
    """

    mu0_mean: np.ndarray
    mu1_mean: np.ndarray
    mu0_var: np.ndarray
    mu1_var: np.ndarray
    cov01: np.ndarray
    tau_mean: np.ndarray
    tau_var: np.ndarray

    @classmethod
    def from_moments(cls, mu0_mean, mu1_mean, mu0_var, mu1_var, cov01) -> "PosteriorSummary":
        arrs = [np.atleast_1d(np.asarray(a, dtype=float)) for a in (mu0_mean, mu1_mean, mu0_var, mu1_var, cov01)]
        m0, m1, v0, v1, c = np.broadcast_arrays(*arrs)
        v0 = np.maximum(v0, 0.0)
        v1 = np.maximum(v1, 0.0)
        # keep the 2x2 block PSD after round-off
        bound = np.sqrt(v0 * v1)
        c = np.clip(c, -bound, bound)
        tau_var = np.maximum(v0 + v1 - 2.0 * c, 0.0)
        return cls(m0.copy(), m1.copy(), v0.copy(), v1.copy(), c.copy(), m1 - m0, tau_var)

    def __len__(self) -> int:
        return self.tau_mean.shape[0]

    def __getitem__(self, idx) -> "PosteriorSummary":
        return PosteriorSummary(*(np.atleast_1d(getattr(self, f)[idx]) for f in self.__dataclass_fields__))

    def arm_var(self, t) -> np.ndarray:
        """Variance of the arm selected per point by ``t`` (0/1 scalar or vector)."""
        t = _check_arm(t)
        return np.where(t == 1, self.mu1_var, self.mu0_var)

    def arm_mean(self, t) -> np.ndarray:
        t = _check_arm(t)
        return np.where(t == 1, self.mu1_mean, self.mu0_mean)


def _check_arm(t) -> np.ndarray:
    t = np.asarray(t)
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("treatment must be 0 or 1")
    return t


def summary_from_samples(mu0_samples, mu1_samples) -> PosteriorSummary:
    """Population (1/M) moments over posterior samples along axis 0."""
    mu0 = np.asarray(mu0_samples, dtype=float)
    mu1 = np.asarray(mu1_samples, dtype=float)
    if mu0.shape != mu1.shape or mu0.shape[0] < 1:
        raise ValueError("need matching non-empty sample arrays")
    d0 = mu0 - mu0.mean(0)
    d1 = mu1 - mu1.mean(0)
    return PosteriorSummary.from_moments(
        mu0.mean(0), mu1.mean(0), (d0 * d0).mean(0), (d1 * d1).mean(0), (d0 * d1).mean(0)
    )
