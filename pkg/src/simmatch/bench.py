"""Learning-curve experiments and the ``simmatch-bench`` command line."""
from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import bcm, data, klr
from .policy import SelectionContext, batch_random, batch_top_k_uncertain, select_max_entropy

METHODS = ("sim_match", "max_uncertain", "random", "sequential")

# exp(-||x - y||^2 / (2 w^2)) with w = sqrt(10) is exp(-0.05 ||x - y||^2)
BENCH_KERNEL_WIDTH = math.sqrt(10.0)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = ""
    label_col: str = "-1"
    classes: Optional[tuple] = None
    method: str = "sim_match"
    k: int = 10
    trajectories: int = 20
    kernel_width: float = BENCH_KERNEL_WIDTH
    ridge: float = klr.DEFAULT_RIDGE
    train_frac: float = 0.7
    seeds_per_class: int = 5
    runs: int = 50
    budget: int = 100
    seed: int = 0
    out: Optional[str] = None
    per_run_out: Optional[str] = None
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if not self.dataset:
            raise ConfigError("no dataset given")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}")
        if self.k < 1 or self.trajectories < 1 or self.runs < 1:
            raise ConfigError("k, trajectories and runs must all be >= 1")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.method != "sequential" and self.budget % self.k:
            raise ConfigError(f"budget {self.budget} is not a multiple of k={self.k}")
        if self.kernel_width <= 0 or self.ridge < 0:
            raise ConfigError("kernel width must be > 0 and ridge >= 0")
        return self


@dataclass
class LearningCurve:
    queries: np.ndarray
    mean_accuracy: np.ndarray
    variance: np.ndarray
    per_run: np.ndarray
    run_seeds: List[int]


def run_seed(master: int, run: int) -> int:
    """Seed of run ``run``: first 64-bit word of ``SeedSequence([master, run])``."""
    return int(np.random.SeedSequence([master, run]).generate_state(1, np.uint64)[0])


def load_dataset(config: ExperimentConfig) -> data.Dataset:
    return data.normalize(data.load_csv(config.dataset, config.label_col, keep=config.classes))


def _grid(budget: int, k: int) -> List[int]:
    return sorted(set(list(range(k, budget + 1, k)) + [budget]))


def run_once(
    config: ExperimentConfig,
    seed: int,
    dataset: Optional[data.Dataset] = None,
    report: Optional[Callable[[str], None]] = None,
    return_pool: bool = False,
):
    """One active-learning run; returns ``[(queries, test accuracy), ...]`` starting at 0.

    With ``return_pool=True`` returns ``(curve, final_pool)``.

    The split uses its own substream of ``seed``, so every method sees the
    same initial pool for a given seed.
    """
    ds = dataset if dataset is not None else load_dataset(config)
    split_ss, select_ss = np.random.SeedSequence(seed).spawn(2)
    pool = data.split_and_init(ds, config.train_frac, config.seeds_per_class, np.random.default_rng(split_ss))
    if config.budget > len(pool.unlabeled):
        raise ConfigError(f"budget {config.budget} exceeds {len(pool.unlabeled)} unlabeled examples")
    rng = np.random.default_rng(select_ss)
    width, ridge, k = config.kernel_width, config.ridge, config.k

    def fit(p):
        return klr.fit(p, width, ridge)

    curve = [(0, klr.accuracy(fit(pool), ds, pool.test))]
    done = 0
    for target in _grid(config.budget, k):
        t0 = time.perf_counter()
        if config.method == "sequential":
            while done < target:
                x = select_max_entropy(SelectionContext(pool, fit(pool), rng))
                pool = pool.reveal([x])
                done += 1
        else:
            ctx = SelectionContext(pool, fit(pool), rng)
            if config.method == "sim_match":
                batch = bcm.select_batch(pool, select_max_entropy, k, config.trajectories, rng, width, ridge)
            elif config.method == "max_uncertain":
                batch = batch_top_k_uncertain(ctx, k)
            else:
                batch = batch_random(ctx, k)
            pool = pool.reveal(batch)
            done = target
        if report is not None:
            report(f"seed {seed} {config.method}: selected up to {done} queries in {time.perf_counter() - t0:.3f}s")
        curve.append((done, klr.accuracy(fit(pool), ds, pool.test)))
    return (curve, pool) if return_pool else curve


def _run_job(args):
    config, seed, verbose = args
    report = (lambda msg: print(msg, flush=True)) if verbose else None
    return run_once(config, seed, report=report)


def run_experiment(config: ExperimentConfig, verbose: bool = False) -> LearningCurve:
    """``config.runs`` independent runs, aggregated in run order."""
    config.validate()
    seeds = [run_seed(config.seed, r) for r in range(config.runs)]
    jobs = [(config, s, verbose) for s in seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            curves = list(ex.map(_run_job, jobs))
    else:
        ds = load_dataset(config)
        report = (lambda msg: print(msg, flush=True)) if verbose else None
        curves = [run_once(config, s, ds, report) for s in seeds]
    queries = np.array([q for q, _ in curves[0]], dtype=np.int64)
    acc = np.array([[a for _, a in c] for c in curves])
    return LearningCurve(queries, acc.mean(axis=0), acc.var(axis=0), acc, seeds)


def write_curve(curve: LearningCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["queries", "mean_accuracy", "variance"])
        for q, m, v in zip(curve.queries, curve.mean_accuracy, curve.variance):
            w.writerow([int(q), repr(float(m)), repr(float(v))])


def write_per_run(curve: LearningCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "run_seed", "queries", "accuracy"])
        for r, (s, row) in enumerate(zip(curve.run_seeds, curve.per_run)):
            for q, a in zip(curve.queries, row):
                w.writerow([r, s, int(q), repr(float(a))])


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; keys may use ``-`` or ``_``."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, val):
    if val is None:
        return None
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if key in ("k", "trajectories", "seeds_per_class", "runs", "budget", "seed", "workers"):
        return int(val)
    if key in ("kernel_width", "ridge", "train_frac"):
        return float(val)
    if key == "classes":
        parts = tuple(p.strip() for p in str(val).split(","))
        if len(parts) != 2:
            raise ConfigError("classes takes two comma-separated values")
        return parts
    return str(val)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simmatch-bench",
        description=(
            "Run batch active-learning experiments and write the averaged learning curve "
            "as CSV (queries,mean_accuracy,variance). Run r uses the seed formed by the "
            "first 64-bit word of numpy SeedSequence([seed, r]); each run's split and "
            "selection draw from separate substreams of it."
        ),
    )
    p.add_argument("--config", help="flat key=value file; command-line flags override it")
    p.add_argument("--dataset", help="headered CSV file")
    p.add_argument("--label-col", help="label column name or index (default: last)")
    p.add_argument("--classes", help="keep only these two raw labels, e.g. M,N")
    p.add_argument("--method", choices=METHODS, help="selection method (default sim_match)")
    p.add_argument("--k", type=int, help="batch size (default 10)")
    p.add_argument("--trajectories", type=int, help="simulated trajectories per batch (default 20)")
    p.add_argument(
        "--kernel-width", type=float,
        help="RBF bandwidth w in exp(-|x-y|^2/(2w^2)) (default sqrt(10), i.e. exp(-0.05|x-y|^2))",
    )
    p.add_argument("--ridge", type=float, help="ridge on the dual weights (default 1e-4)")
    p.add_argument("--train-frac", type=float, help="training fraction (default 0.7)")
    p.add_argument("--seeds-per-class", type=int, help="initial labels per class (default 5)")
    p.add_argument("--runs", type=int, help="independent runs (default 50)")
    p.add_argument("--budget", type=int, help="total queries per run (default 100)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--out", help="aggregate CSV path (default: stdout)")
    p.add_argument("--per-run-out", help="optional per-run CSV path")
    p.add_argument("--workers", type=int, help="parallel run processes (default 1)")
    p.add_argument("--quiet", action="store_true", help="do not print per-batch timings")
    return p


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if ns.config:
        values.update(read_config_file(ns.config))
    for key in _FIELD_TYPES:
        v = getattr(ns, key, None)
        if v is not None:
            values[key] = v
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in values.items()}).validate()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        config = config_from_args(ns)
        curve = run_experiment(config, verbose=not ns.quiet)
        if config.out:
            write_curve(curve, config.out)
        else:
            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(["queries", "mean_accuracy", "variance"])
            for q, m, v in zip(curve.queries, curve.mean_accuracy, curve.variance):
                w.writerow([int(q), repr(float(m)), repr(float(v))])
        if config.per_run_out:
            write_per_run(curve, config.per_run_out)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"simmatch-bench: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
