"""Monte-Carlo experiment driver: PoD sweeps, statistics and export."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .engine import CASUALTY, MISSED, TRAPPED_STATE, run
from .errors import ConfigError, EvacSimError, InsufficientSamples, MissingBaseline
from .graph import EvacGraph
from .scenario import SimConfig

CSV_HEADER = ("pod", "n_runs", "mean_s", "std_s", "ci_lo_s", "ci_hi_s", "ratio", "ratio_ci_lo", "ratio_ci_hi")
DEFAULT_PODS = tuple(round(0.1 * i, 1) for i in range(11))
BOOTSTRAP_RESAMPLES = 2000
THREADS_ENV = "EVACSIM_THREADS"


@dataclass(frozen=True)
class RunSummary:
    seed: int
    mean_s: float
    evacuated: int
    deadline_missed: int
    casualties: int
    trapped: int
    trace_hash: str | None = None


@dataclass
class PointResult:
    pod: float
    runs: list[RunSummary]

    @property
    def means(self) -> list[float]:
        return [r.mean_s for r in self.runs]


@dataclass(frozen=True)
class Aggregate:
    n: int
    mean: float
    std: float
    ci_lo: float
    ci_hi: float


@dataclass
class MetricsRow:
    pod: float
    n_runs: int
    mean_s: float
    std_s: float
    ci_lo_s: float
    ci_hi_s: float
    ratio: float = math.nan
    ratio_ci_lo: float = math.nan
    ratio_ci_hi: float = math.nan


@dataclass
class MetricsTable:
    rows: list[MetricsRow] = field(default_factory=list)
    raw: dict[float, list[float]] = field(default_factory=dict)  # per-run means by pod
    points: dict[float, PointResult] = field(default_factory=dict)

    def row(self, pod: float) -> MetricsRow:
        for r in self.rows:
            if r.pod == pod:
                return r
        raise KeyError(pod)

    @property
    def pods(self) -> list[float]:
        return [r.pod for r in self.rows]


def worker_count(requested: int | None = None) -> int:
    """Parallel run cap: explicit request, else ``EVACSIM_THREADS``, else 1."""
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        if env is None:
            return 1
        try:
            requested = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if requested < 1:
        raise ConfigError(f"worker count must be >= 1, got {requested}")
    return requested


def summarize(res, seed: int) -> RunSummary:
    return RunSummary(
        seed=seed,
        mean_s=res.mean_evac_time,
        evacuated=len(res.completed_times),
        deadline_missed=res.counts[MISSED],
        casualties=res.counts[CASUALTY],
        trapped=res.counts[TRAPPED_STATE],
        trace_hash=res.trace_hash,
    )


def _one_run(args) -> RunSummary:
    graph, config, seed = args
    try:
        return summarize(run(graph, config, seed), seed)
    except EvacSimError as exc:
        raise type(exc)(f"run with seed {seed} at pod {config.delay.pod}: {exc}") from exc


def _map(jobs: list, workers: int) -> list[RunSummary]:
    if workers <= 1 or len(jobs) <= 1:
        return [_one_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so results stay keyed by run index
        return list(pool.map(_one_run, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_point(graph: EvacGraph, config: SimConfig, pod: float, runs: int, base_seed: int = 0, workers: int | None = None) -> PointResult:
    """Run ``runs`` independent simulations at ``pod``; run i uses seed ``base_seed + i``."""
    if runs < 1:
        raise ConfigError("runs must be >= 1")
    cfg = config.with_pod(pod)
    jobs = [(graph, cfg, base_seed + i) for i in range(runs)]
    return PointResult(pod, _map(jobs, worker_count(workers)))


def aggregate(samples) -> Aggregate:
    """Mean, sample std and Student-t 95% confidence interval of the finite samples."""
    xs = np.asarray([x for x in samples if math.isfinite(x)], dtype=float)
    n = len(xs)
    if n < 2:
        raise InsufficientSamples(f"need at least 2 finite samples, got {n}")
    mean = float(np.mean(xs))
    std = float(np.std(xs, ddof=1))
    half = float(stats.t.ppf(0.975, n - 1)) * std / math.sqrt(n)
    return Aggregate(n, mean, std, mean - half, mean + half)


def _bootstrap_ratio(x: np.ndarray, base: np.ndarray, rng: np.random.Generator, resamples: int) -> tuple[float, float]:
    if len(x) == len(base):
        # paired: run i at every pod shares seed base_seed + i
        idx = rng.integers(0, len(x), size=(resamples, len(x)))
        ratios = x[idx].mean(axis=1) / base[idx].mean(axis=1)
    else:
        ix = rng.integers(0, len(x), size=(resamples, len(x)))
        ib = rng.integers(0, len(base), size=(resamples, len(base)))
        ratios = x[ix].mean(axis=1) / base[ib].mean(axis=1)
    lo, hi = np.percentile(ratios, [2.5, 97.5])
    return float(lo), float(hi)


def performance_ratio(table: MetricsTable, baseline_pod: float = 0.0, resamples: int = BOOTSTRAP_RESAMPLES, seed: int = 0) -> MetricsTable:
    """Fill ratio columns against the baseline row; CIs from a percentile bootstrap over runs."""
    try:
        base_row = table.row(baseline_pod)
    except KeyError:
        raise MissingBaseline(f"no row for baseline pod {baseline_pod}") from None
    base = table.raw.get(baseline_pod)
    rng = np.random.default_rng(seed)
    for row in sorted(table.rows, key=lambda r: r.pod):
        if row is base_row:
            row.ratio = row.ratio_ci_lo = row.ratio_ci_hi = 1.0
            continue
        row.ratio = row.mean_s / base_row.mean_s
        x = table.raw.get(row.pod)
        if x is None or base is None:
            continue
        pairs = [(a, b) for a, b in zip(x, base) if math.isfinite(a) and math.isfinite(b)]
        if len(x) == len(base) and len(pairs) >= 2:
            xa, ba = np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])
        else:
            xa = np.array([v for v in x if math.isfinite(v)])
            ba = np.array([v for v in base if math.isfinite(v)])
        if len(xa) >= 2 and len(ba) >= 2:
            row.ratio_ci_lo, row.ratio_ci_hi = _bootstrap_ratio(xa, ba, rng, resamples)
    return table


def table_from_samples(samples: dict[float, list[float]]) -> MetricsTable:
    table = MetricsTable()
    for pod in sorted(samples):
        agg = aggregate(samples[pod])
        table.rows.append(MetricsRow(pod, agg.n, agg.mean, agg.std, agg.ci_lo, agg.ci_hi))
        table.raw[pod] = list(samples[pod])
    return table


def sweep(
    graph: EvacGraph,
    config: SimConfig,
    pods=DEFAULT_PODS,
    runs: int = 100,
    base_seed: int = 0,
    workers: int | None = None,
) -> MetricsTable:
    """Run every pod point, aggregate and compute performance ratios against pod 0."""
    pods = sorted(set(float(p) for p in pods))
    if not pods:
        raise ConfigError("pod list is empty")
    for p in pods:
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"pod must lie in [0, 1], got {p}")
    if runs < 1:
        raise ConfigError("runs per point must be >= 1")
    jobs = [(graph, config.with_pod(p), base_seed + i) for p in pods for i in range(runs)]
    results = _map(jobs, worker_count(workers))
    points = {p: PointResult(p, results[k * runs : (k + 1) * runs]) for k, p in enumerate(pods)}
    table = table_from_samples({p: pt.means for p, pt in points.items()})
    table.points = points
    return performance_ratio(table, seed=base_seed)


def spearman(table: MetricsTable) -> float:
    rows = sorted(table.rows, key=lambda r: r.pod)
    rho = stats.spearmanr([r.pod for r in rows], [r.mean_s for r in rows]).statistic
    return float(rho)


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def export_csv(table: MetricsTable, path) -> Path:
    if not table.rows:
        raise ValueError("metrics table is empty")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in sorted(table.rows, key=lambda r: r.pod):
            writer.writerow(
                [_fmt(r.pod), r.n_runs]
                + [_fmt(v) for v in (r.mean_s, r.std_s, r.ci_lo_s, r.ci_hi_s, r.ratio, r.ratio_ci_lo, r.ratio_ci_hi)]
            )
    return path


def export_plotdata(table: MetricsTable, directory) -> tuple[Path, Path]:
    """Write ``time_vs_pod.dat`` and ``ratio_vs_pod.dat`` (whitespace separated, '#' header)."""
    if not table.rows:
        raise ValueError("metrics table is empty")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = sorted(table.rows, key=lambda r: r.pod)
    time_path = directory / "time_vs_pod.dat"
    ratio_path = directory / "ratio_vs_pod.dat"
    with time_path.open("w", encoding="utf-8") as fh:
        fh.write("# pod mean_s ci_lo_s ci_hi_s\n")
        for r in rows:
            fh.write(f"{_fmt(r.pod)} {_fmt(r.mean_s)} {_fmt(r.ci_lo_s)} {_fmt(r.ci_hi_s)}\n")
    with ratio_path.open("w", encoding="utf-8") as fh:
        fh.write("# pod ratio ratio_ci_lo ratio_ci_hi\n")
        for r in rows:
            fh.write(f"{_fmt(r.pod)} {_fmt(r.ratio)} {_fmt(r.ratio_ci_lo)} {_fmt(r.ratio_ci_hi)}\n")
    return time_path, ratio_path


def export_runs(points: dict[float, PointResult], path) -> Path:
    """Per-run raw results, one line per (pod, seed)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["pod", "seed", "mean_s", "evacuated", "deadline_missed", "casualties", "trapped", "trace_hash"])
        for pod in sorted(points):
            for r in points[pod].runs:
                writer.writerow(
                    [_fmt(pod), r.seed, _fmt(r.mean_s), r.evacuated, r.deadline_missed, r.casualties, r.trapped, r.trace_hash or ""]
                )
    return path
