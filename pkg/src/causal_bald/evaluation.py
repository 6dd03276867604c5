"""PEHE, seed aggregation and the on-disk trajectory / curve formats.

Trajectory files are CSV with header ``step,n_train,pehe,wall_ms,selected_indices``;
``selected_indices`` is semicolon-joined.  Floats are written with ``repr`` so a
file read back reproduces the in-memory values exactly.  Run metadata lives in
a sidecar ``<name>.meta.json``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import AggregationError

if TYPE_CHECKING:
    from .loop import Trajectory

TRAJECTORY_HEADER = ("step", "n_train", "pehe", "wall_ms", "selected_indices")
CURVE_HEADER = ("step", "n_train", "mean_pehe", "se_pehe", "n_seeds")


def pehe(tau_hat, tau_true) -> float:
    """Root mean squared error between estimated and true CATE."""
    a = np.asarray(tau_hat, dtype=float).reshape(-1)
    b = np.asarray(tau_true, dtype=float).reshape(-1)
    if a.shape != b.shape or a.size == 0:
        raise ValueError(f"pehe needs equal non-empty lengths, got {a.size} and {b.size}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass(frozen=True)
class AggregateCurve:
    """Per-step mean PEHE over seeds.  ``se`` is ``None`` for a single seed."""

    step: np.ndarray
    n_train: np.ndarray
    mean: np.ndarray
    se: np.ndarray | None
    n_seeds: int


def aggregate(trajectories: Sequence["Trajectory"]) -> AggregateCurve:
    if not trajectories:
        raise AggregationError("no trajectories to aggregate")
    steps = [tuple(s.step for s in tr.steps) for tr in trajectories]
    counts = [tuple(s.n_train for s in tr.steps) for tr in trajectories]
    if len(set(steps)) != 1 or len(set(counts)) != 1:
        raise AggregationError("trajectories do not share the same step structure")
    values = np.array([[s.pehe for s in tr.steps] for tr in trajectories])
    k = values.shape[0]
    # centering on one seed keeps the mean of identical runs exact
    dev = values - values[0]
    se = dev.std(0, ddof=1) / np.sqrt(k) if k > 1 else None
    return AggregateCurve(np.array(steps[0]), np.array(counts[0]), values[0] + dev.mean(0), se, k)


def write_trajectory(traj: "Trajectory", path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for s in traj.steps:
            w.writerow([s.step, s.n_train, repr(float(s.pehe)), repr(float(s.wall_ms)), ";".join(map(str, s.selected))])
    meta = path.with_suffix(".meta.json")
    meta.write_text(json.dumps(traj.metadata, sort_keys=True, indent=2) + "\n")
    return path


def read_trajectory(path) -> "Trajectory":
    from .loop import Trajectory, TrajectoryStep

    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"{path}: not a trajectory file (header {header})")
        steps = [
            TrajectoryStep(
                int(r[0]), int(r[1]), float(r[2]), float(r[3]),
                tuple(int(i) for i in r[4].split(";")) if r[4] else (),
            )
            for r in reader
            if r
        ]
    meta = path.with_suffix(".meta.json")
    metadata = json.loads(meta.read_text()) if meta.exists() else {}
    return Trajectory(steps, metadata)


def curve_rows(curve: AggregateCurve) -> list[list]:
    rows = []
    for i in range(len(curve.step)):
        se = "" if curve.se is None else repr(float(curve.se[i]))
        rows.append([int(curve.step[i]), int(curve.n_train[i]), repr(float(curve.mean[i])), se, curve.n_seeds])
    return rows


def write_curve(curve: AggregateCurve, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    w.writerows(curve_rows(curve))


def write_plotdata(curves: dict[str, AggregateCurve], fh) -> None:
    """One block of rows per acquisition kind, sorted by kind name."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("acquisition",) + CURVE_HEADER)
    for kind in sorted(curves):
        for row in curve_rows(curves[kind]):
            w.writerow([kind] + row)
