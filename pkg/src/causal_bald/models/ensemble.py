"""Deep ensemble of two-headed outcome regressors.

Each member is a shared trunk over the covariates feeding one linear-output
head per treatment arm; only the factual head receives gradient for a unit.
Members differ in initialization seed and minibatch order, and their spread
is the epistemic posterior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data import ObservationalDataset
from ..errors import ConfigError, NotFittedError, TrainingDivergenceError
from .summary import PosteriorSummary, summary_from_samples


@dataclass(frozen=True)
class EnsembleSettings:
    n_members: int = 5
    hidden: int = 64
    depth: int = 2
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    patience: int = 20
    seed: int = 0
    member_seeds: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_members < 2:
            raise ConfigError("an ensemble needs at least 2 members to define a variance")
        if self.member_seeds is not None and len(self.member_seeds) != self.n_members:
            raise ConfigError("member_seeds must have one entry per member")
        if min(self.hidden, self.depth, self.epochs, self.batch_size, self.patience) < 1:
            raise ConfigError("hidden, depth, epochs, batch_size and patience must be >= 1")

    def seeds(self) -> tuple[int, ...]:
        if self.member_seeds is not None:
            return tuple(self.member_seeds)
        return tuple(self.seed * 1000 + m for m in range(self.n_members))


def _torch():
    import torch

    return torch


def _build_member(n_features: int, settings: EnsembleSettings):
    torch = _torch()
    nn = torch.nn

    class TwoHeadNet(nn.Module):
        def __init__(self):
            super().__init__()
            layers, width = [], n_features
            for _ in range(settings.depth):
                layers += [nn.Linear(width, settings.hidden), nn.ELU()]
                width = settings.hidden
            self.trunk = nn.Sequential(*layers)
            self.heads = nn.ModuleList(
                nn.Sequential(nn.Linear(width, settings.hidden), nn.ELU(), nn.Linear(settings.hidden, 1))
                for _ in range(2)
            )

        def forward(self, x):
            phi = self.trunk(x)
            return torch.cat([h(phi) for h in self.heads], dim=1)

    return TwoHeadNet()


@dataclass
class EnsembleModel:
    """Fitted ensemble.  ``members`` is ``None`` until :func:`fit_ensemble` runs."""

    settings: EnsembleSettings
    n_features: int
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    members: list | None = None
    best_epochs: list[int] = field(default_factory=list)

    def _require_fitted(self):
        if self.members is None:
            raise NotFittedError("ensemble has not been fitted")

    def member_predictions(self, covariates) -> np.ndarray:
        """Per-member expected outcomes, shape ``(M, points, 2)`` in outcome units."""
        self._require_fitted()
        torch = _torch()
        x = np.asarray(covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        xt = torch.as_tensor((x - self.x_mean) / self.x_scale, dtype=torch.float64)
        with torch.no_grad():
            out = np.stack([m(xt).numpy() for m in self.members])
        return self.y_mean + self.y_scale * out

    def predict_summary(self, covariates) -> PosteriorSummary:
        preds = self.member_predictions(covariates)
        return summary_from_samples(preds[..., 0], preds[..., 1])

    def sample_tau(self, covariates, n_samples: int | None = None, rng=None) -> np.ndarray:
        """Per-member CATE, shape ``(points, M)``; ``n_samples`` and ``rng`` are ignored."""
        preds = self.member_predictions(covariates)
        return (preds[..., 1] - preds[..., 0]).T

    def save(self, path) -> None:
        """Write a ``torch.save`` checkpoint holding settings, scalers and member state dicts."""
        self._require_fitted()
        torch = _torch()
        torch.save(
            {
                "settings": self.settings.__dict__,
                "n_features": self.n_features,
                "x_mean": self.x_mean,
                "x_scale": self.x_scale,
                "y_mean": self.y_mean,
                "y_scale": self.y_scale,
                "best_epochs": self.best_epochs,
                "members": [m.state_dict() for m in self.members],
            },
            Path(path),
        )

    @classmethod
    def load(cls, path) -> "EnsembleModel":
        torch = _torch()
        blob = torch.load(Path(path), weights_only=False)
        settings = EnsembleSettings(**blob["settings"])
        members = []
        for state in blob["members"]:
            net = _build_member(blob["n_features"], settings).double()
            net.load_state_dict(state)
            net.eval()
            members.append(net)
        return cls(
            settings, blob["n_features"], blob["x_mean"], blob["x_scale"],
            blob["y_mean"], blob["y_scale"], members, list(blob["best_epochs"]),
        )


def _factual_loss(net, x, t, y):
    out = net(x)
    pred = out.gather(1, t[:, None]).squeeze(1)
    return ((pred - y) ** 2).mean()


def fit_ensemble(
    train: ObservationalDataset,
    valid: ObservationalDataset | None,
    settings: EnsembleSettings = EnsembleSettings(),
) -> EnsembleModel:
    """Train ``settings.n_members`` networks independently with early stopping.

    Each member minimizes squared error on its factual head.  Validation loss
    is checked after every epoch and the best weights are kept; without a
    validation set the training loss is used.
    """
    if train is None or len(train) == 0:
        raise ValueError("cannot fit an ensemble to an empty training set")
    torch = _torch()
    x = train.covariates
    x_mean = x.mean(0)
    x_scale = np.where(x.std(0) > 0, x.std(0), 1.0)
    y_mean = float(train.outcomes.mean())
    y_sd = float(train.outcomes.std())
    y_scale = y_sd if y_sd > 0 else 1.0

    def tensors(ds):
        return (
            torch.as_tensor((ds.covariates - x_mean) / x_scale, dtype=torch.float64),
            torch.tensor(ds.treatments, dtype=torch.int64),
            torch.as_tensor((ds.outcomes - y_mean) / y_scale, dtype=torch.float64),
        )

    xt, tt, yt = tensors(train)
    xv, tv, yv = tensors(valid) if valid is not None else (xt, tt, yt)
    n = len(train)
    members, best_epochs = [], []
    for m, seed in enumerate(settings.seeds()):
        torch.manual_seed(seed)
        net = _build_member(train.n_features, settings).double()
        opt = torch.optim.Adam(net.parameters(), lr=settings.learning_rate, weight_decay=settings.weight_decay)
        gen = torch.Generator().manual_seed(seed)
        best_loss, best_state, best_epoch, stale = np.inf, None, 0, 0
        for epoch in range(settings.epochs):
            net.train()
            for batch in torch.randperm(n, generator=gen).split(settings.batch_size):
                opt.zero_grad()
                loss = _factual_loss(net, xt[batch], tt[batch], yt[batch])
                if not torch.isfinite(loss):
                    raise TrainingDivergenceError(m, epoch)
                loss.backward()
                opt.step()
            net.eval()
            with torch.no_grad():
                val = float(_factual_loss(net, xv, tv, yv))
            if not np.isfinite(val):
                raise TrainingDivergenceError(m, epoch)
            if val < best_loss:
                best_loss, best_epoch, stale = val, epoch, 0
                best_state = {k: v.clone() for k, v in net.state_dict().items()}
            else:
                stale += 1
                if stale >= settings.patience:
                    break
        net.load_state_dict(best_state)
        net.eval()
        members.append(net)
        best_epochs.append(best_epoch)
    return EnsembleModel(settings, train.n_features, x_mean, x_scale, y_mean, y_scale, members, best_epochs)
