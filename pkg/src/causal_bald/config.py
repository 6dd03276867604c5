"""Experiment configuration files.

The format is flat ``key = value`` text, one entry per line; ``#`` starts a
comment.  Recognized keys::

    data_source         synthetic | phi_surrogate | ihdp
    data_path           IHDP csv (required for ihdp)
    model               gp | ensemble
    acquisition         random | propensity | tau_bald | mu_bald | mu_pi_bald |
                        rho_bald | mu_rho_bald | gamma_stype
    warm_up_size, acquisition_size, acquisition_steps
    temperature         softmax temperature for batch selection
    seeds               comma-separated integers
    out_dir             output directory (CAUSAL_BALD_OUT overrides, --out wins)
    n_pool, n_valid, n_test, noise_sd      simulated data sizes / noise
    gamma_samples       posterior draws per point for gamma_stype (GP only)
    record_wall_time    true | false; false writes wall_ms = 0 so reruns are byte-identical
    ensemble_members, ensemble_epochs

Loop sizes and split sizes default to the per-dataset values in
:data:`DATASET_DEFAULTS` when omitted.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .acquisition import AcquisitionKind
from .data import (
    SOURCES,
    PhiSurrogateConfig,
    SyntheticConfig,
    generate_phi_surrogate,
    generate_synthetic,
    load_ihdp,
)
from .errors import ConfigError
from .loop import MODEL_KINDS, LoopConfig
from .models import EnsembleSettings

OUT_ENV = "CAUSAL_BALD_OUT"

DATASET_DEFAULTS = {
    "synthetic": dict(warm_up_size=10, acquisition_size=10, acquisition_steps=30, n_pool=10_000, n_valid=1_000, n_test=1_000),
    "ihdp": dict(warm_up_size=100, acquisition_size=10, acquisition_steps=38, n_pool=471, n_valid=201, n_test=75),
    "phi_surrogate": dict(warm_up_size=250, acquisition_size=50, acquisition_steps=55, n_pool=35_000, n_valid=15_000, n_test=10_000),
}


@dataclass(frozen=True)
class ExperimentConfig:
    data_source: str = "synthetic"
    data_path: str | None = None
    model: str = "gp"
    acquisition: AcquisitionKind = AcquisitionKind.Random
    warm_up_size: int | None = None
    acquisition_size: int | None = None
    acquisition_steps: int | None = None
    temperature: float = 1.0
    seeds: tuple[int, ...] = (0,)
    out_dir: str = "runs"
    n_pool: int | None = None
    n_valid: int | None = None
    n_test: int | None = None
    noise_sd: float = 1.0
    gamma_samples: int = 100
    record_wall_time: bool = False
    ensemble_members: int = 5
    ensemble_epochs: int = 200

    def __post_init__(self):
        if self.data_source not in SOURCES:
            raise ConfigError(f"data_source must be one of {SOURCES}, got {self.data_source!r}")
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        try:
            object.__setattr__(self, "acquisition", AcquisitionKind.parse(self.acquisition))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigError("seed list must be non-empty")
        if len(set(seeds)) != len(seeds):
            raise ConfigError(f"seed list has duplicates: {list(seeds)}")
        object.__setattr__(self, "seeds", seeds)
        if self.data_source == "ihdp" and not self.data_path:
            raise ConfigError("data_source ihdp needs data_path")
        for name, value in DATASET_DEFAULTS[self.data_source].items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)

    def loop_config(self, seed: int) -> LoopConfig:
        return LoopConfig(
            warm_up_size=self.warm_up_size,
            acquisition_size=self.acquisition_size,
            acquisition_steps=self.acquisition_steps,
            temperature=self.temperature,
            model=self.model,
            acquisition=self.acquisition,
            seed=seed,
            gamma_samples=self.gamma_samples,
            record_wall_time=self.record_wall_time,
        )

    def ensemble_settings(self) -> EnsembleSettings:
        return EnsembleSettings(n_members=self.ensemble_members, epochs=self.ensemble_epochs)

    def validate_budget(self) -> None:
        """Check the labeling budget against the pool size without generating data."""
        self.loop_config(self.seeds[0]).validate_pool(self.n_pool)

    def datasets(self, seed: int):
        if self.data_source == "synthetic":
            return generate_synthetic(SyntheticConfig(self.n_pool, self.n_valid, self.n_test, seed, self.noise_sd))
        if self.data_source == "phi_surrogate":
            return generate_phi_surrogate(PhiSurrogateConfig(self.n_pool, self.n_valid, self.n_test, seed, self.noise_sd))
        return load_ihdp(self.data_path, seed, pool_size=self.n_pool, valid_size=self.n_valid)

    def output_dir(self, override: str | None = None) -> Path:
        return Path(override or os.environ.get(OUT_ENV) or self.out_dir)

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: str):
    kind = str(_TYPES[key])
    try:
        if key == "seeds":
            return tuple(int(s) for s in raw.split(",") if s.strip())
        if key == "record_wall_time":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
