"""Observational datasets: the synthetic SCM, the phi-manifold surrogate and IHDP.

Every generator returns a ``{"pool", "valid", "test"}`` mapping of
:class:`ObservationalDataset`.  The three splits of one realization use the
seeds ``seed``, ``seed + 1`` and ``seed + 2`` so that realizations started from
consecutive seeds never share a split stream.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import IhdpFormatError, IhdpSchemaError

Source = Literal["synthetic", "phi_surrogate", "ihdp"]
SOURCES = ("synthetic", "phi_surrogate", "ihdp")

IHDP_COLUMNS = ("treatment", "y_factual", "y_cfactual", "mu0", "mu1") + tuple(
    f"x{i}" for i in range(1, 26)
)
IHDP_ROWS = 747
IHDP_POOL_SIZE = 471
IHDP_VALID_SIZE = 201


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ObservationalDataset:
    """Covariates, factual treatments and outcomes for ``n`` units.

    ``mu0_true`` / ``mu1_true`` carry the noiseless potential-outcome surfaces
    when the data are simulated.  They exist for evaluation only and are never
    handed to a model.
    """

    covariates: np.ndarray
    treatments: np.ndarray
    outcomes: np.ndarray
    mu0_true: np.ndarray | None = None
    mu1_true: np.ndarray | None = None
    source: Source = "synthetic"

    def __post_init__(self):
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValueError("covariates must be a matrix")
        n, d = x.shape
        if n == 0 or d == 0:
            raise ValueError("dataset needs n > 0 and d >= 1")
        t = np.asarray(self.treatments)
        if t.shape != (n,) or not np.all((t == 0) | (t == 1)):
            raise ValueError("treatments must be a binary vector of length n")
        y = np.asarray(self.outcomes, dtype=float)
        if y.shape != (n,):
            raise ValueError("outcomes must have length n")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("covariates and outcomes must be finite")
        if (self.mu0_true is None) != (self.mu1_true is None):
            raise ValueError("mu0_true and mu1_true must be given together")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        object.__setattr__(self, "covariates", _frozen(x))
        object.__setattr__(self, "treatments", _frozen(t, dtype=np.int64))
        object.__setattr__(self, "outcomes", _frozen(y))
        if self.mu0_true is not None:
            for name in ("mu0_true", "mu1_true"):
                mu = np.asarray(getattr(self, name), dtype=float)
                if mu.shape != (n,) or not np.all(np.isfinite(mu)):
                    raise ValueError(f"{name} must be a finite vector of length n")
                object.__setattr__(self, name, _frozen(mu))

    def __len__(self) -> int:
        return self.covariates.shape[0]

    @property
    def n_features(self) -> int:
        return self.covariates.shape[1]

    @property
    def has_surfaces(self) -> bool:
        return self.mu0_true is not None

    @property
    def tau_true(self) -> np.ndarray:
        if not self.has_surfaces:
            raise ValueError("dataset carries no ground-truth surfaces")
        return self.mu1_true - self.mu0_true

    def subset(self, indices) -> "ObservationalDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return ObservationalDataset(
            covariates=self.covariates[idx],
            treatments=self.treatments[idx],
            outcomes=self.outcomes[idx],
            mu0_true=None if self.mu0_true is None else self.mu0_true[idx],
            mu1_true=None if self.mu1_true is None else self.mu1_true[idx],
            source=self.source,
        )


@dataclass(frozen=True)
class SyntheticConfig:
    n_pool: int = 10_000
    n_valid: int = 1_000
    n_test: int = 1_000
    seed: int = 0
    noise_sd: float = 1.0

    def __post_init__(self):
        if min(self.n_pool, self.n_valid, self.n_test) <= 0:
            raise ValueError("split sizes must be positive")
        if not self.noise_sd >= 0:
            raise ValueError("noise_sd must be >= 0")


@dataclass(frozen=True)
class PhiSurrogateConfig:
    n_pool: int = 35_000
    n_valid: int = 15_000
    n_test: int = 10_000
    seed: int = 0
    noise_sd: float = 1.0
    n_classes: int = 10
    clip_bound: float = 1.4

    def __post_init__(self):
        if min(self.n_pool, self.n_valid, self.n_test) <= 0:
            raise ValueError("split sizes must be positive")
        if not self.noise_sd >= 0:
            raise ValueError("noise_sd must be >= 0")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if not self.clip_bound > 0:
            raise ValueError("clip_bound must be > 0")


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def noiseless_surface(x, t):
    """Expected outcome of the synthetic SCM for covariate ``x`` under treatment ``t``."""
    t = np.asarray(t)
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("t must be 0 or 1")
    x = np.asarray(x, dtype=float)
    s = 2.0 * t - 1.0
    out = s * x + s - 2.0 * np.sin(2.0 * s * x) + 2.0 * (1.0 + 0.5 * x)
    return out if out.ndim else float(out)


def true_cate(x):
    return noiseless_surface(x, 1) - noiseless_surface(x, 0)


def _scm_split(latent: np.ndarray, rng: np.random.Generator, noise_sd: float):
    t = rng.binomial(1, sigmoid(2.0 * latent + 0.5))
    mu0 = noiseless_surface(latent, np.zeros_like(t))
    mu1 = noiseless_surface(latent, np.ones_like(t))
    y = np.where(t == 1, mu1, mu0) + noise_sd * rng.standard_normal(latent.shape[0])
    return t, y, mu0, mu1


def generate_synthetic(config: SyntheticConfig) -> dict[str, ObservationalDataset]:
    sizes = {"pool": config.n_pool, "valid": config.n_valid, "test": config.n_test}
    splits = {}
    for offset, (name, n) in enumerate(sizes.items()):
        rng = np.random.default_rng(config.seed + offset)
        x = rng.standard_normal(n)
        t, y, mu0, mu1 = _scm_split(x, rng, config.noise_sd)
        splits[name] = ObservationalDataset(x[:, None], t, y, mu0, mu1, "synthetic")
    return splits


def phi_from_intensity(c, z, n_classes: int = 10, clip_bound: float = 1.4):
    """Map a class label and standardized intensity onto the 1-d confounder manifold.

    Each class owns the segment ``[-2 + 4c/K, -2 + 4(c+1)/K]`` and the clipped
    intensity is mapped linearly onto it.
    """
    c = np.asarray(c, dtype=float)
    z = np.clip(np.asarray(z, dtype=float), -clip_bound, clip_bound)
    lo = -2.0 + (4.0 / n_classes) * c
    hi = -2.0 + (4.0 / n_classes) * (c + 1.0)
    return (z + clip_bound) * (hi - lo) / (2.0 * clip_bound) + lo


def generate_phi_surrogate(config: PhiSurrogateConfig) -> dict[str, ObservationalDataset]:
    sizes = {"pool": config.n_pool, "valid": config.n_valid, "test": config.n_test}
    k = config.n_classes
    splits = {}
    for offset, (name, n) in enumerate(sizes.items()):
        rng = np.random.default_rng(config.seed + offset)
        c = rng.integers(0, k, size=n)
        z = np.clip(rng.standard_normal(n), -config.clip_bound, config.clip_bound)
        phi = phi_from_intensity(c, z, k, config.clip_bound)
        t, y, mu0, mu1 = _scm_split(phi, rng, config.noise_sd)
        covariates = np.column_stack([np.eye(k)[c], z])
        splits[name] = ObservationalDataset(covariates, t, y, mu0, mu1, "phi_surrogate")
    return splits


def load_ihdp(
    path,
    realization_seed: int,
    *,
    expected_rows: int | None = IHDP_ROWS,
    pool_size: int = IHDP_POOL_SIZE,
    valid_size: int = IHDP_VALID_SIZE,
) -> dict[str, ObservationalDataset]:
    """Read one IHDP response-surface realization and split it.

    The file is comma separated with header
    ``treatment,y_factual,y_cfactual,mu0,mu1,x1,...,x25``.  Splits are a
    permutation drawn from ``realization_seed``: ``pool_size`` units, then
    ``valid_size``, then the remainder as test.
    """
    path = Path(path)
    ncol = len(IHDP_COLUMNS)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IhdpSchemaError("file is empty", row=0) from None
        if len(header) != ncol:
            raise IhdpSchemaError(f"header has {len(header)} columns, expected {ncol}", row=0)
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != ncol:
                raise IhdpFormatError(f"expected {ncol} fields, found {len(row)}", row=i)
            values = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise IhdpFormatError(f"cannot parse {cell!r} as a number", row=i, column=j) from None
                if not np.isfinite(v):
                    raise IhdpFormatError("non-finite value", row=i, column=j)
                values.append(v)
            if values[0] not in (0.0, 1.0):
                raise IhdpFormatError("treatment must be 0 or 1", row=i, column=0)
            rows.append(values)
    if expected_rows is not None and len(rows) != expected_rows:
        raise IhdpFormatError(f"found {len(rows)} data rows, expected {expected_rows}", row=len(rows))
    if pool_size + valid_size >= len(rows):
        raise IhdpSchemaError(f"{len(rows)} rows cannot hold pool {pool_size} + valid {valid_size} + test")

    table = np.asarray(rows)
    full = ObservationalDataset(
        covariates=table[:, 5:],
        treatments=table[:, 0].astype(np.int64),
        outcomes=table[:, 1],
        mu0_true=table[:, 3],
        mu1_true=table[:, 4],
        source="ihdp",
    )
    order = np.random.default_rng(realization_seed).permutation(len(rows))
    return {
        "pool": full.subset(order[:pool_size]),
        "valid": full.subset(order[pool_size : pool_size + valid_size]),
        "test": full.subset(order[pool_size + valid_size :]),
    }


def save_dataset(ds: ObservationalDataset, path) -> None:
    """Write a dataset as CSV: ``treatment,outcome[,mu0,mu1],x1..xd``."""
    cols = ["treatment", "outcome"]
    data = [ds.treatments.astype(float), ds.outcomes]
    if ds.has_surfaces:
        cols += ["mu0", "mu1"]
        data += [ds.mu0_true, ds.mu1_true]
    cols += [f"x{i}" for i in range(1, ds.n_features + 1)]
    table = np.column_stack(data + [ds.covariates])
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# source={ds.source}\n")
        fh.write(",".join(cols) + "\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_dataset(path) -> ObservationalDataset:
    with Path(path).open() as fh:
        first = fh.readline().strip()
        source = first.split("=", 1)[1] if first.startswith("# source=") else "synthetic"
        header = (fh.readline() if first.startswith("#") else first).strip().split(",")
        table = np.loadtxt(fh, delimiter=",", ndmin=2)
    has_mu = "mu0" in header
    start = 4 if has_mu else 2
    return ObservationalDataset(
        covariates=table[:, start:],
        treatments=table[:, 0].astype(np.int64),
        outcomes=table[:, 1],
        mu0_true=table[:, 2] if has_mu else None,
        mu1_true=table[:, 3] if has_mu else None,
        source=source,
    )
