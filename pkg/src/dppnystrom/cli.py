"""Benchmark harness emitting reproducible CSV result tables.

Subcommands cover landmark approximation error sweeps, Nystrom ridge
regression accuracy sweeps, chain convergence and contraction diagnostics,
and selection-time versus error tradeoff grids. Every row carries the
method, landmark count, seed, metric name, metric value and split timings;
rows are sorted so re-runs with the same configuration produce identical
metric columns regardless of scheduling.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import METHODS, select_landmarks
from .data import load_dataset, rbf_kernel, split, standardize, synthetic_regression
from .krr import fit_nystrom, predict_nystrom
from .linalg import PsdMatrix
from .mixing import (
    TV_STATE_GUARD,
    approximation_error_metrics,
    error_trace,
    estimate_alpha,
    mixing_time_bound,
    tv_curve,
)
from .nystrom import build_nystrom, rbf_backend, relative_error
from .streams import philox_stream

THREADS_ENV = "DPPNYSTROM_THREADS"
CSV_HEADER = "method,c,seed,metric,value,select_seconds,total_seconds"


@dataclass(frozen=True)
class ResultRow:
    method: str
    c: int
    seed: int
    metric: str
    value: float
    select_seconds: float
    total_seconds: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("metric %r is not finite" % self.metric)
        if self.select_seconds < 0 or self.total_seconds < 0:
            raise ValueError("negative wall-clock time")

    def sort_key(self):
        return (self.method, self.c, self.seed, self.metric)

    def csv_line(self) -> str:
        return "%s,%d,%d,%s,%s,%.6f,%.6f" % (
            self.method,
            self.c,
            self.seed,
            self.metric,
            repr(self.value),
            self.select_seconds,
            self.total_seconds,
        )


@dataclass
class BenchConfig:
    """Resolved settings for one benchmark command."""

    data: str | None = None
    target: str = "0"
    synthetic: str = "500,5,0.1"
    data_seed: int = 0
    kernel: str = "rbf"
    methods: list[str] = field(default_factory=lambda: ["kdpp", "unif"])
    landmarks: list[int] = field(default_factory=lambda: [20])
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    sigma: float = 1.0
    gamma: float = 0.1
    gibbs_iters: int = 3000
    alpha_samples: int = 1000
    rank_k: int | None = None
    train_fraction: float = 0.75
    trace_iters: int = 5000
    trace_stride: int = 10
    tv_steps: list[int] = field(default_factory=list)
    tv_replicas: int = 0
    iteration_grid: list[int] = field(default_factory=lambda: [0, 10, 20, 50, 100, 200])
    anchor_grid: list[int] = field(default_factory=lambda: list(range(20, 341, 40)))
    lazy: bool = True
    threads: int = 1
    out: str = "results.csv"

    def validate(self):
        if not self.methods:
            raise ValueError("need at least one method")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError("unknown method %r (known: %s)" % (m, ", ".join(METHODS)))
        if not self.landmarks or any(c < 1 for c in self.landmarks):
            raise ValueError("need at least one positive landmark count")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.kernel not in ("rbf", "identity"):
            raise ValueError("kernel must be 'rbf' or 'identity'")
        if self.threads < 1:
            raise ValueError("threads must be positive")


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in str(text).split(",") if tok.strip() != ""]


def _load_config_file(path: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError("config line %d is not key=value: %r" % (lineno, raw))
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


_LIST_KEYS = {"landmarks", "seeds", "tv_steps", "iteration_grid", "anchor_grid"}
_INT_KEYS = {
    "data_seed",
    "gibbs_iters",
    "alpha_samples",
    "rank_k",
    "trace_iters",
    "trace_stride",
    "tv_replicas",
    "threads",
}
_FLOAT_KEYS = {"sigma", "gamma", "train_fraction"}
_BOOL_KEYS = {"lazy"}


def _coerce(key: str, value):
    if value is None or isinstance(value, (list, int, float, bool)):
        return value
    if key in _LIST_KEYS:
        return _parse_int_list(value)
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _BOOL_KEYS:
        return str(value).lower() in ("1", "true", "yes", "on")
    if key == "methods":
        return [m.strip() for m in str(value).split(",") if m.strip()]
    return value


def build_config(cli_values: dict, file_values: dict | None = None) -> BenchConfig:
    """Merge defaults, config-file values and CLI flags (flags win)."""
    cfg = BenchConfig()
    merged = dict(file_values or {})
    merged.update({k: v for k, v in cli_values.items() if v is not None})
    for key, value in merged.items():
        if not hasattr(cfg, key):
            raise ValueError("unknown configuration key %r" % key)
        setattr(cfg, key, _coerce(key, value))
    cfg.validate()
    return cfg


def _prepare_dataset(cfg: BenchConfig):
    if cfg.data:
        target = int(cfg.target) if str(cfg.target).lstrip("-").isdigit() else cfg.target
        ds = load_dataset(cfg.data, target)
    else:
        n, d, noise = cfg.synthetic.split(",")
        ds = synthetic_regression(int(n), int(d), float(noise), cfg.data_seed)
    return standardize(ds)


def _kernel_for(cfg: BenchConfig, X: np.ndarray) -> PsdMatrix:
    if cfg.kernel == "identity":
        return PsdMatrix(np.eye(X.shape[0]), validate=False)
    return PsdMatrix(rbf_kernel(X, None, cfg.sigma), validate=False)


def _cell_stream(cfg: BenchConfig, method: str, c: int, seed: int):
    return philox_stream(seed, METHODS.index(method), c)


def _run_cells(cfg: BenchConfig, cells, worker) -> list[ResultRow]:
    rows: list[ResultRow] = []
    if cfg.threads == 1:
        for cell in cells:
            rows.extend(worker(cell))
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            for out in pool.map(worker, cells):
                rows.extend(out)
    rows.sort(key=ResultRow.sort_key)
    return rows


def _error_rows(cfg, K, X, method, c, seed, landmarks, select_s, t0) -> list[ResultRow]:
    if hasattr(landmarks, "centroids"):
        approx = build_nystrom(rbf_backend(X, cfg.sigma), landmarks)
    else:
        approx = build_nystrom(K, landmarks)
    k = cfg.rank_k if cfg.rank_k is not None else c
    metrics: dict[str, float] = {}
    try:
        report = relative_error(K, approx, k)
        metrics["rel_frobenius_error"] = report.relative_frobenius
        metrics["rel_spectral_error"] = report.relative_spectral
        metrics["abs_frobenius_error"] = report.absolute_frobenius
        metrics["abs_spectral_error"] = report.absolute_spectral
    except ValueError:
        # Reference rank reaches the matrix rank: the relative error is
        # 0/0, so report absolute errors only.
        R = K.data - approx.materialize()
        metrics["abs_frobenius_error"] = float(np.linalg.norm(R, "fro"))
        metrics["abs_spectral_error"] = float(np.max(np.abs(np.linalg.eigvalsh(R))))
    total_s = time.perf_counter() - t0
    return [
        ResultRow(method, c, seed, name, value, select_s, total_s)
        for name, value in metrics.items()
    ]


def cmd_approx(cfg: BenchConfig) -> list[ResultRow]:
    """Kernel approximation error sweep over (method, landmark count, seed)."""
    ds = _prepare_dataset(cfg)
    X = ds.features
    K = _kernel_for(cfg, X)
    K.eigendecomposition()

    def worker(cell):
        method, c, seed = cell
        rng = _cell_stream(cfg, method, c, seed)
        t0 = time.perf_counter()
        landmarks = select_landmarks(
            method,
            K,
            c,
            rng,
            features=X,
            gamma=cfg.gamma if cfg.gamma > 0 else 0.1,
            gibbs_iterations=cfg.gibbs_iters,
            lazy=cfg.lazy,
        )
        select_s = time.perf_counter() - t0
        return _error_rows(cfg, K, X, method, c, seed, landmarks, select_s, t0)

    cells = [(m, c, s) for m in cfg.methods for c in cfg.landmarks for s in cfg.seeds]
    return _run_cells(cfg, cells, worker)


def cmd_krr(cfg: BenchConfig) -> list[ResultRow]:
    """Nystrom ridge regression train/test MSE sweep.

    Targets are standardized before splitting so errors are comparable
    across datasets.
    """
    ds = _prepare_dataset(cfg)
    y = ds.targets
    y_sd = y.std(ddof=1) if y.std(ddof=1) > 0 else 1.0
    from .data import Dataset

    ds = Dataset(ds.features, (y - y.mean()) / y_sd)
    train, test = split(ds, cfg.train_fraction, cfg.data_seed)
    K_train = _kernel_for(cfg, train.features)
    K_cross = (
        np.eye(test.n, train.n)
        if cfg.kernel == "identity"
        else rbf_kernel(test.features, train.features, cfg.sigma)
    )
    gamma = cfg.gamma if cfg.gamma > 0 else 0.1

    def worker(cell):
        method, c, seed = cell
        rng = _cell_stream(cfg, method, c, seed)
        t0 = time.perf_counter()
        landmarks = select_landmarks(
            method,
            K_train,
            c,
            rng,
            features=train.features,
            gamma=gamma,
            gibbs_iterations=cfg.gibbs_iters,
            lazy=cfg.lazy,
        )
        select_s = time.perf_counter() - t0
        if hasattr(landmarks, "centroids"):
            approx = build_nystrom(rbf_backend(train.features, cfg.sigma), landmarks)
            test_block = (
                np.eye(test.n, train.n) @ approx.cross
                if cfg.kernel == "identity"
                else rbf_kernel(test.features, landmarks.centroids, cfg.sigma)
            )
        else:
            approx = build_nystrom(K_train, landmarks)
            test_block = K_cross[:, landmarks.indices]
        model = fit_nystrom(approx, train.targets, gamma)
        train_mse = float(np.mean((predict_nystrom(approx, model, approx.cross) - train.targets) ** 2))
        test_mse = float(np.mean((predict_nystrom(approx, model, test_block) - test.targets) ** 2))
        total_s = time.perf_counter() - t0
        return [
            ResultRow(method, c, seed, "train_mse", train_mse, select_s, total_s),
            ResultRow(method, c, seed, "test_mse", test_mse, select_s, total_s),
        ]

    cells = [(m, c, s) for m in cfg.methods for c in cfg.landmarks for s in cfg.seeds]
    return _run_cells(cfg, cells, worker)


def cmd_mixing(cfg: BenchConfig) -> list[ResultRow]:
    """Chain convergence trace, contraction estimate and mixing bound.

    Emits the error trace of one chain per seed, the subsampled
    contraction coefficient with its bound (when defined), and a total
    variation curve for ground sets small enough to enumerate.
    """
    ds = _prepare_dataset(cfg)
    X = ds.features
    K = _kernel_for(cfg, X)
    if cfg.kernel == "rbf":
        K.eigendecomposition()
    c = cfg.landmarks[0] if cfg.landmarks else 50
    n = K.n
    rows: list[ResultRow] = []
    width = len(str(max(cfg.trace_iters, 1)))
    for seed in cfg.seeds:
        rng = philox_stream(seed, 101, c)
        t0 = time.perf_counter()
        trace = error_trace(
            K,
            c,
            cfg.trace_iters,
            stride=cfg.trace_stride,
            metrics=approximation_error_metrics(K, cfg.rank_k if cfg.rank_k is not None else c),
            rng=rng,
            lazy=cfg.lazy,
        )
        dt = time.perf_counter() - t0
        for step, metrics in trace:
            for name, value in metrics.items():
                rows.append(
                    ResultRow(
                        "kdpp", c, seed, "trace_%s_step_%0*d" % (name, width, step), value, dt, dt
                    )
                )
        t0 = time.perf_counter()
        est = estimate_alpha(K, c, cfg.alpha_samples, philox_stream(seed, 102, c))
        dt = time.perf_counter() - t0
        rows.append(ResultRow("kdpp", c, seed, "alpha_max", est.alpha, dt, dt))
        rows.append(ResultRow("kdpp", c, seed, "alpha_p95", est.alpha_percentile(95.0), dt, dt))
        bound = mixing_time_bound(est.alpha, c, n, 0.01)
        rows.append(
            ResultRow("kdpp", c, seed, "mixing_bound_defined", 1.0 if bound.defined else 0.0, dt, dt)
        )
        if bound.defined:
            rows.append(ResultRow("kdpp", c, seed, "mixing_time_bound", bound.tau, dt, dt))
        if cfg.tv_steps:
            if math.comb(n, c) > TV_STATE_GUARD:
                raise ValueError(
                    "total variation requested but C(%d, %d) exceeds the enumeration guard" % (n, c)
                )
            replicas = cfg.tv_replicas or 10 * math.comb(n, c)
            t0 = time.perf_counter()
            curve = tv_curve(K, c, cfg.tv_steps, replicas, philox_stream(seed, 103, c))
            dt = time.perf_counter() - t0
            w2 = len(str(max(cfg.tv_steps)))
            for step, tv in curve:
                rows.append(ResultRow("kdpp", c, seed, "tv_step_%0*d" % (w2, step), tv, dt, dt))
    rows.sort(key=ResultRow.sort_key)
    return rows


def cmd_tradeoff(cfg: BenchConfig) -> list[ResultRow]:
    """Selection-time versus approximation-error grid.

    Sweeps chain length for the DPP sampler and anchor counts for the
    approximate leverage-score strategies; other methods contribute one
    point each.
    """
    ds = _prepare_dataset(cfg)
    X = ds.features
    K = _kernel_for(cfg, X)
    K.eigendecomposition()
    c = cfg.landmarks[0] if cfg.landmarks else 20
    iter_width = len(str(max(cfg.iteration_grid) if cfg.iteration_grid else 1))
    anchor_width = len(str(max(cfg.anchor_grid) if cfg.anchor_grid else 1))

    def worker(cell):
        method, seed, sweep = cell
        rng = _cell_stream(cfg, method, c, seed)
        kwargs = dict(
            features=X,
            gamma=cfg.gamma if cfg.gamma > 0 else 0.1,
            gibbs_iterations=cfg.gibbs_iters,
            lazy=cfg.lazy,
        )
        suffix = ""
        if method == "kdpp" and sweep is not None:
            kwargs["gibbs_iterations"] = sweep
            suffix = "_iters_%0*d" % (iter_width, sweep)
        if method in ("applev", "appreglev") and sweep is not None:
            kwargs["anchors"] = sweep
            suffix = "_p_%0*d" % (anchor_width, sweep)
        t0 = time.perf_counter()
        landmarks = select_landmarks(method, K, c, rng, **kwargs)
        select_s = time.perf_counter() - t0
        base = _error_rows(cfg, K, X, method, c, seed, landmarks, select_s, t0)
        if not suffix:
            return base
        return [
            ResultRow(r.method, r.c, r.seed, r.metric + suffix, r.value, r.select_seconds, r.total_seconds)
            for r in base
        ]

    cells = []
    n = K.n
    for method in cfg.methods:
        for seed in cfg.seeds:
            if method == "kdpp":
                cells.extend((method, seed, it) for it in cfg.iteration_grid)
            elif method in ("applev", "appreglev"):
                cells.extend((method, seed, p) for p in cfg.anchor_grid if c <= p <= n)
            else:
                cells.append((method, seed, None))
    return _run_cells(cfg, cells, worker)


def write_rows(rows: list[ResultRow], out_path: str) -> None:
    """Write the CSV atomically: a temp file in the target directory is
    renamed over the destination only after a complete write."""
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=out.name + ".", dir=out.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(row.csv_line() + "\n")
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


COMMANDS = {
    "approx": cmd_approx,
    "krr": cmd_krr,
    "mixing": cmd_mixing,
    "tradeoff": cmd_tradeoff,
}


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="CSV dataset path (header row, numeric cells)")
    p.add_argument("--target", help="target column name or zero-based index")
    p.add_argument("--synthetic", help="synthetic dataset spec n,d,noise_sd")
    p.add_argument("--data-seed", type=int, dest="data_seed", help="seed for synthetic data and splits")
    p.add_argument("--kernel", choices=["rbf", "identity"], help="kernel preset")
    p.add_argument("--methods", help="comma-separated method names")
    p.add_argument("--landmarks", help="comma-separated landmark counts")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--sigma", type=float, help="RBF bandwidth")
    p.add_argument("--gamma", type=float, help="ridge regularization level")
    p.add_argument("--gibbs-iters", type=int, dest="gibbs_iters", help="chain length for kdpp")
    p.add_argument("--alpha-samples", type=int, dest="alpha_samples", help="contraction subsample count")
    p.add_argument("--rank-k", type=int, dest="rank_k", help="reference rank for relative errors (default: c)")
    p.add_argument("--train-fraction", type=float, dest="train_fraction")
    p.add_argument("--trace-iters", type=int, dest="trace_iters")
    p.add_argument("--trace-stride", type=int, dest="trace_stride")
    p.add_argument("--tv-steps", dest="tv_steps", help="comma-separated step counts for the TV curve")
    p.add_argument("--tv-replicas", type=int, dest="tv_replicas")
    p.add_argument("--iteration-grid", dest="iteration_grid", help="kdpp chain lengths for the tradeoff sweep")
    p.add_argument("--anchor-grid", dest="anchor_grid", help="anchor counts for approximate leverage sweeps")
    p.add_argument("--no-lazy", dest="lazy", action="store_const", const=False, help="drop the chain's laziness coin")
    p.add_argument("--threads", type=int, help="worker threads (default: %s or 1)" % THREADS_ENV)
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--config", help="key=value configuration file; flags override")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dppnystrom-bench",
        description="Reproducible landmark-selection benchmarks with CSV output.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("approx", help="kernel approximation error sweep")
    sub.add_parser("krr", help="Nystrom ridge regression accuracy sweep")
    sub.add_parser("mixing", help="chain convergence and contraction diagnostics")
    sub.add_parser("tradeoff", help="selection-time versus error grid")
    for name in COMMANDS:
        _add_common_flags(sub.choices[name])
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cli_values = {
            k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None
        }
        file_values = _load_config_file(args.config) if args.config else None
        if "threads" not in cli_values and (file_values is None or "threads" not in file_values):
            env = os.environ.get(THREADS_ENV)
            if env:
                cli_values["threads"] = int(env)
        cfg = build_config(cli_values, file_values)
        if args.command == "tradeoff" and "landmarks" not in cli_values and (
            file_values is None or "landmarks" not in file_values
        ):
            cfg.landmarks = [20]
        if args.command == "mixing" and "landmarks" not in cli_values and (
            file_values is None or "landmarks" not in file_values
        ):
            cfg.landmarks = [50]
        rows = COMMANDS[args.command](cfg)
        write_rows(rows, cfg.out)
    except Exception as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    print("wrote %d rows to %s" % (len(rows), cfg.out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
