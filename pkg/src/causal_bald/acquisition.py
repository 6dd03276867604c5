"""Acquisition scores for treatment-effect active learning and softmax batch selection.

All scoring functions are vectorized: pass a :class:`PosteriorSummary` over
many pool points together with per-point factual treatments and get one score
per point back.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .models.summary import PosteriorSummary

VAR_FLOOR = 1e-12
GAMMA_FLOOR = 1e-7


class AcquisitionKind(str, enum.Enum):
    Random = "random"
    Propensity = "propensity"
    TauBald = "tau_bald"
    MuBald = "mu_bald"
    MuPiBald = "mu_pi_bald"
    RhoBald = "rho_bald"
    MuRhoBald = "mu_rho_bald"
    GammaSType = "gamma_stype"

    @classmethod
    def parse(cls, value) -> "AcquisitionKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip()
        for kind in cls:
            if key in (kind.value, kind.name) or key.lower() == kind.name.lower():
                return kind
        raise ValueError(f"unknown acquisition kind {value!r}; choose from {[k.value for k in cls]}")

    @property
    def needs_posterior(self) -> bool:
        return self not in (AcquisitionKind.Random, AcquisitionKind.Propensity)

    @property
    def needs_propensity(self) -> bool:
        return self in (AcquisitionKind.Propensity, AcquisitionKind.MuPiBald)


@dataclass(frozen=True)
class AcquisitionScoreVector:
    scores: np.ndarray
    kind: AcquisitionKind
    floor: float = VAR_FLOOR

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        if s.ndim != 1:
            raise ValueError("scores must be a vector")
        if not np.all(np.isfinite(s)):
            raise ValueError(f"{self.kind.value} produced non-finite scores")
        object.__setattr__(self, "scores", s)

    def __len__(self) -> int:
        return self.scores.shape[0]


def _arms(s: PosteriorSummary, t):
    t = np.asarray(t)
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("treatment must be 0 or 1")
    treated = t == 1
    v_f = np.where(treated, s.mu1_var, s.mu0_var)
    v_c = np.where(treated, s.mu0_var, s.mu1_var)
    return v_f, v_c, s.cov01


def score_propensity(pi_factual):
    """Probability of the counterfactual arm, ``1 - pi_t(x)``."""
    return 1.0 - np.asarray(pi_factual, dtype=float)


def score_tau_bald(s: PosteriorSummary):
    return s.tau_var


def score_mu_bald(s: PosteriorSummary, t):
    v_f, _, _ = _arms(s, t)
    return v_f


def score_mu_pi_bald(s: PosteriorSummary, t, pi_factual):
    v_f, _, _ = _arms(s, t)
    return score_propensity(pi_factual) * v_f


def score_rho_bald(s: PosteriorSummary, t, floor: float = VAR_FLOOR):
    """Information about the CATE carried by the factual outcome.

    ``0.5 * log((v_f - 2 cov) / v_c + 1)``, which equals
    ``0.5 * log(tau_var / v_c)``.  ``v_c`` and the log argument are floored.
    The score turns negative when the arms are strongly positively correlated.
    """
    if not floor > 0:
        raise ValueError("floor must be > 0")
    v_f, v_c, c = _arms(s, t)
    ratio = (v_f - 2.0 * c) / np.maximum(v_c, floor) + 1.0
    return 0.5 * np.log(np.maximum(ratio, floor))


def mu_rho(v_f, tau_var, v_c, floor: float = VAR_FLOOR):
    return v_f * tau_var / np.maximum(v_c, floor)


def score_mu_rho_bald(s: PosteriorSummary, t, floor: float = VAR_FLOOR):
    """Factual-arm variance times the CATE-to-counterfactual variance ratio."""
    if not floor > 0:
        raise ValueError("floor must be > 0")
    v_f, v_c, _ = _arms(s, t)
    return mu_rho(v_f, s.tau_var, v_c, floor)


def bernoulli_entropy(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log(p) + (1.0 - p) * np.log1p(-p))
    return np.where((p <= 0) | (p >= 1), 0.0, h)


def bernoulli_mutual_information(gammas, floor: float = GAMMA_FLOOR):
    """``H(mean gamma) - mean H(gamma)`` over the last axis, clamped below at ``floor``."""
    g = np.asarray(gammas, dtype=float)
    mi = bernoulli_entropy(g.mean(-1)) - bernoulli_entropy(g).mean(-1)
    return np.maximum(mi, floor)


def sign_error_rates(tau_samples, tau_var=None, stabilizer: float = GAMMA_FLOOR):
    """Per-sample probability of getting the CATE sign wrong, ``Phi(-|tau_s| / sd)``.

    ``tau_var`` is the per-point CATE variance shared by every sample; when
    omitted the population variance of the samples is used.
    """
    tau = np.asarray(tau_samples, dtype=float)
    if tau.shape[-1] < 2:
        raise ValueError("need at least 2 samples")
    var = tau.var(-1) if tau_var is None else np.asarray(tau_var, dtype=float)
    sd = np.sqrt(var + stabilizer)
    return ndtr(-np.abs(tau) / np.expand_dims(sd, -1))


def score_gamma_stype(tau_samples, tau_var=None):
    """Mutual information between the sign-error indicator and the model parameters."""
    return bernoulli_mutual_information(sign_error_rates(tau_samples, tau_var))


def compute_scores(
    kind,
    *,
    summary: PosteriorSummary | None = None,
    treatments=None,
    pi_factual=None,
    tau_samples=None,
    n_candidates: int | None = None,
    floor: float = VAR_FLOOR,
) -> AcquisitionScoreVector:
    """Dispatch to the scoring rule for ``kind`` and wrap the result."""
    kind = AcquisitionKind.parse(kind)
    if kind is AcquisitionKind.Random:
        n = n_candidates if n_candidates is not None else len(summary if summary is not None else treatments)
        return AcquisitionScoreVector(np.zeros(n), kind, floor)

    def need(value, name):
        if value is None:
            raise ValueError(f"{kind.value} requires {name}")
        return value

    if kind is AcquisitionKind.Propensity:
        scores = score_propensity(need(pi_factual, "pi_factual"))
    elif kind is AcquisitionKind.TauBald:
        scores = score_tau_bald(need(summary, "summary"))
    elif kind is AcquisitionKind.MuBald:
        scores = score_mu_bald(need(summary, "summary"), need(treatments, "treatments"))
    elif kind is AcquisitionKind.MuPiBald:
        scores = score_mu_pi_bald(
            need(summary, "summary"), need(treatments, "treatments"), need(pi_factual, "pi_factual")
        )
    elif kind is AcquisitionKind.RhoBald:
        scores = score_rho_bald(need(summary, "summary"), need(treatments, "treatments"), floor)
    elif kind is AcquisitionKind.MuRhoBald:
        scores = score_mu_rho_bald(need(summary, "summary"), need(treatments, "treatments"), floor)
    else:
        summary = need(summary, "summary")
        scores = score_gamma_stype(need(tau_samples, "tau_samples"), summary.tau_var)
    return AcquisitionScoreVector(np.asarray(scores, dtype=float), kind, floor)


def select_batch_softmax(scores: AcquisitionScoreVector, b: int, temperature: float = 1.0, rng=None) -> np.ndarray:
    """Draw ``b`` distinct candidates with probability proportional to ``exp(score / temperature)``.

    Uses the Gumbel-top-b trick, which is equivalent to sequential softmax
    sampling without replacement.  Random scores get uniform weights.  Returns
    candidate positions in order of selection.
    """
    n = len(scores)
    if not 0 <= b <= n:
        raise ValueError(f"cannot select {b} of {n} candidates")
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    rng = np.random.default_rng(rng)
    gumbel = rng.gumbel(size=n)
    if scores.kind is AcquisitionKind.Random:
        keys = gumbel
    else:
        keys = scores.scores / temperature + gumbel
    # stable sort so exact ties resolve by position
    return np.argsort(-keys, kind="stable")[:b]


def select_top_k(scores: AcquisitionScoreVector, b: int) -> np.ndarray:
    n = len(scores)
    if not 0 <= b <= n:
        raise ValueError(f"cannot select {b} of {n} candidates")
    return np.argsort(-scores.scores, kind="stable")[:b]
