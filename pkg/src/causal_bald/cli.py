"""Command-line entry point: ``causal-bald {generate,run,aggregate,plotdata}``."""

from __future__ import annotations

import argparse
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ExperimentConfig, load_config
from .data import save_dataset
from .errors import CausalBaldError, ConfigError
from .evaluation import aggregate, read_trajectory, write_curve, write_plotdata, write_trajectory
from .loop import run_experiment


def _seed_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None


def _load(args) -> ExperimentConfig:
    if args.config is None:
        cfg = ExperimentConfig()
    else:
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            cfg = load_config(path)
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"unreadable config {path}: {exc}") from None
    if args.seed is not None:
        cfg = cfg.with_overrides(seeds=args.seed)
    return cfg


def _run_one(cfg: ExperimentConfig, seed: int, out: Path) -> Path:
    splits = cfg.datasets(seed)
    traj = run_experiment(
        splits["pool"], splits["valid"], splits["test"], cfg.loop_config(seed),
        ensemble=cfg.ensemble_settings(),
    )
    traj.metadata["data_source"] = cfg.data_source
    return write_trajectory(traj, out / f"seed_{seed}.csv")


def cmd_generate(args) -> int:
    cfg = _load(args)
    out = cfg.output_dir(args.out)
    for seed in cfg.seeds:
        target = out / f"seed_{seed}"
        target.mkdir(parents=True, exist_ok=True)
        for name, ds in cfg.datasets(seed).items():
            save_dataset(ds, target / f"{name}.csv")
        print(target)
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    cfg.validate_budget()
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out = cfg.output_dir(args.out) / cfg.acquisition.value
    out.mkdir(parents=True, exist_ok=True)
    if args.jobs == 1 or len(cfg.seeds) == 1:
        paths = [_run_one(cfg, s, out) for s in cfg.seeds]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            paths = list(pool.map(_run_one, [cfg] * len(cfg.seeds), cfg.seeds, [out] * len(cfg.seeds)))
    for p in paths:
        print(p)
    return 0


def _trajectory_files(inputs) -> list[Path]:
    files = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            files.extend(sorted(p.rglob("seed_*.csv")))
        elif p.is_file():
            files.append(p)
        else:
            raise FileNotFoundError(f"no such trajectory file or directory: {p}")
    if not files:
        raise FileNotFoundError("no trajectory files found")
    return files


def _emit(args, writer, payload) -> None:
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            writer(payload, fh)
    else:
        writer(payload, sys.stdout)


def cmd_aggregate(args) -> int:
    trajs = [read_trajectory(f) for f in _trajectory_files(args.inputs)]
    _emit(args, write_curve, aggregate(trajs))
    return 0


def cmd_plotdata(args) -> int:
    groups = defaultdict(list)
    for f in _trajectory_files(args.inputs):
        tr = read_trajectory(f)
        kind = tr.metadata.get("config", {}).get("acquisition", f.parent.name)
        groups[kind].append(tr)
    _emit(args, write_plotdata, {k: aggregate(v) for k, v in groups.items()})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causal-bald", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="key = value experiment config file")
        p.add_argument("--seed", type=_seed_list, help="comma-separated seeds, overrides the config")
        p.add_argument("--out", help="output directory (overrides config and $CAUSAL_BALD_OUT)")
        return p

    g = with_config(sub.add_parser("generate", help="write pool/valid/test CSVs per seed"))
    g.set_defaults(func=cmd_generate)
    r = with_config(sub.add_parser("run", help="run the active-learning loop, one trajectory file per seed"))
    r.add_argument("--jobs", type=int, default=1, help="seeds to run concurrently")
    r.set_defaults(func=cmd_run)
    a = sub.add_parser("aggregate", help="mean and standard error of PEHE per step")
    a.add_argument("inputs", nargs="+", help="trajectory files or directories")
    a.add_argument("--out", help="curve CSV path (default stdout)")
    a.set_defaults(func=cmd_aggregate)
    p = sub.add_parser("plotdata", help="step-vs-PEHE series per acquisition kind")
    p.add_argument("inputs", nargs="+", help="trajectory files or directories")
    p.add_argument("--out", help="series CSV path (default stdout)")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"causal-bald: config error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"causal-bald: missing file: {exc}", file=sys.stderr)
        return 4
    except (CausalBaldError, ValueError, OSError) as exc:
        print(f"causal-bald: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
