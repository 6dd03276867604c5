"""Pool-based active learning loop: warm-up, fit, score, select, reveal, evaluate."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .acquisition import AcquisitionKind, compute_scores, select_batch_softmax
from .data import ObservationalDataset
from .errors import ConfigError, DoubleAcquisitionError
from .evaluation import pehe
from .models import EnsembleSettings, fit_ensemble, fit_gp
from .propensity import fit_propensity, predict_pi

MODEL_KINDS = ("gp", "ensemble")


@dataclass(frozen=True)
class LoopConfig:
    warm_up_size: int = 10
    acquisition_size: int = 10
    acquisition_steps: int = 30
    temperature: float = 1.0
    model: str = "gp"
    acquisition: AcquisitionKind = AcquisitionKind.Random
    seed: int = 0
    gamma_samples: int = 100
    record_wall_time: bool = False

    def __post_init__(self):
        object.__setattr__(self, "acquisition", AcquisitionKind.parse(self.acquisition))
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.warm_up_size < 1 or self.acquisition_size < 1 or self.acquisition_steps < 0:
            raise ConfigError("warm_up_size and acquisition_size must be >= 1, acquisition_steps >= 0")
        if not self.temperature > 0:
            raise ConfigError("temperature must be > 0")
        if self.gamma_samples < 2:
            raise ConfigError("gamma_samples must be >= 2")

    @property
    def budget(self) -> int:
        return self.warm_up_size + self.acquisition_size * self.acquisition_steps

    def validate_pool(self, pool_size: int) -> None:
        if self.budget > pool_size:
            raise ConfigError(
                f"labeling budget {self.budget} (warm-up {self.warm_up_size} + "
                f"{self.acquisition_steps} x {self.acquisition_size}) exceeds pool size {pool_size}"
            )

    def snapshot(self) -> dict[str, Any]:
        d = asdict(self)
        d["acquisition"] = self.acquisition.value
        return d


@dataclass(frozen=True)
class TrajectoryStep:
    step: int
    n_train: int
    pehe: float
    wall_ms: float
    selected: tuple[int, ...]


@dataclass
class Trajectory:
    steps: list[TrajectoryStep] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def pehe(self) -> np.ndarray:
        return np.array([s.pehe for s in self.steps])

    @property
    def n_train(self) -> np.ndarray:
        return np.array([s.n_train for s in self.steps])

    def labeled_indices(self) -> np.ndarray:
        return np.concatenate([np.asarray(s.selected, dtype=np.int64) for s in self.steps])


@dataclass(frozen=True)
class LabeledRecords:
    """Factual (x, t, y) triples handed to a model.  No potential-outcome surfaces."""

    covariates: np.ndarray
    treatments: np.ndarray
    outcomes: np.ndarray

    def as_dataset(self) -> ObservationalDataset:
        return ObservationalDataset(self.covariates, self.treatments, self.outcomes)


class LabelOracle:
    """Reveals factual outcomes of pool units on request, each unit at most once."""

    def __init__(self, pool: ObservationalDataset):
        self._pool = pool
        self._labeled = np.zeros(len(pool), dtype=bool)
        self._order: list[int] = []

    @property
    def labeled_mask(self) -> np.ndarray:
        return self._labeled.copy()

    @property
    def unlabeled_indices(self) -> np.ndarray:
        return np.flatnonzero(~self._labeled)

    def reveal(self, indices) -> LabeledRecords:
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= len(self._pool)):
            raise IndexError("pool index out of range")
        if len(np.unique(idx)) != idx.size:
            raise DoubleAcquisitionError("index requested twice in one batch")
        twice = idx[self._labeled[idx]]
        if twice.size:
            raise DoubleAcquisitionError(f"pool indices already labeled: {twice.tolist()}")
        self._labeled[idx] = True
        self._order.extend(idx.tolist())
        return self._records(idx)

    def training_set(self) -> LabeledRecords:
        return self._records(np.asarray(self._order, dtype=np.int64))

    def _records(self, idx: np.ndarray) -> LabeledRecords:
        p = self._pool
        return LabeledRecords(p.covariates[idx].copy(), p.treatments[idx].copy(), p.outcomes[idx].copy())


def reveal_outcomes(oracle: LabelOracle, indices) -> LabeledRecords:
    return oracle.reveal(indices)


def _strip(ds: ObservationalDataset) -> ObservationalDataset:
    return ObservationalDataset(ds.covariates, ds.treatments, ds.outcomes, source=ds.source)


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


def run_experiment(
    pool: ObservationalDataset,
    valid: ObservationalDataset,
    test: ObservationalDataset,
    config: LoopConfig,
    *,
    hyper_grid=None,
    ensemble: EnsembleSettings | None = None,
) -> Trajectory:
    """Run one active-learning trajectory.

    Row ``k`` of the result holds the PEHE of the model fitted on the warm-up
    set plus ``k`` acquired batches, and the pool indices added just before
    that fit (the warm-up indices for row 0).
    """
    config.validate_pool(len(pool))
    if not test.has_surfaces:
        raise ConfigError("test split needs ground-truth surfaces for PEHE")
    if pool.n_features != test.n_features or pool.n_features != valid.n_features:
        raise ConfigError("pool, valid and test splits disagree on covariate dimension")
    kind = config.acquisition
    ensemble = ensemble or EnsembleSettings()
    # the model path only ever sees factual data
    valid_view = _strip(valid)
    pool_x, pool_t = pool.covariates, pool.treatments
    propensity = fit_propensity(_strip(pool)) if kind.needs_propensity else None

    oracle = LabelOracle(pool)
    warm = _rng(config.seed, 0).choice(len(pool), size=config.warm_up_size, replace=False)
    oracle.reveal(warm)
    selected = [int(i) for i in warm]
    traj = Trajectory(metadata={"config": config.snapshot(), "seed": config.seed})
    if config.model == "ensemble":
        traj.metadata["ensemble"] = {k: v for k, v in asdict(ensemble).items() if k != "member_seeds"}
        # gamma uses one tau draw per member, so gamma_samples has no effect
        traj.metadata["ensemble"]["tau_samples"] = "one per member"

    for step in range(config.acquisition_steps + 1):
        t0 = time.perf_counter()
        train = oracle.training_set().as_dataset()
        if config.model == "gp":
            model = fit_gp(train, hyper_grid)
        else:
            model = fit_ensemble(train, valid_view, EnsembleSettings(**{**asdict(ensemble), "seed": config.seed * 1000 + step}))
        err = pehe(model.predict_summary(test.covariates).tau_mean, test.tau_true)
        elapsed = (time.perf_counter() - t0) * 1e3
        traj.steps.append(
            TrajectoryStep(step, len(train), float(err), round(elapsed, 3) if config.record_wall_time else 0.0, tuple(selected))
        )
        if step == config.acquisition_steps:
            break

        candidates = oracle.unlabeled_indices
        cand_t = pool_t[candidates]
        summary = tau_samples = pi_f = None
        if kind.needs_posterior:
            summary = model.predict_summary(pool_x[candidates])
        if kind.needs_propensity:
            pi_f = predict_pi(propensity, pool_x[candidates], cand_t)
        if kind is AcquisitionKind.GammaSType:
            tau_samples = model.sample_tau(pool_x[candidates], config.gamma_samples, _rng(config.seed, 2, step))
        scores = compute_scores(
            kind, summary=summary, treatments=cand_t, pi_factual=pi_f,
            tau_samples=tau_samples, n_candidates=len(candidates),
        )
        pick = select_batch_softmax(scores, config.acquisition_size, config.temperature, _rng(config.seed, 1, step))
        chosen = candidates[pick]
        oracle.reveal(chosen)
        selected = [int(i) for i in chosen]
    return traj
