"""Benchmark grid: groups x methods x {Pareto-filtered, sorted list}."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import (ConfigurationError, Group, RatingsDataset, filter_eligible_users,
                      load_amazon, load_movielens, sample_groups)
from .evaluation import ExplanationReport, evaluate, utility_batch
from .recommender import GroupRecommender
from .search import (EXP_REBUILD, FIXED_WINDOW, GREEDY_GROW, GROW_PRUNE, METHODS, OK,
                     SearchResult, explain, factual_list, prepare_vectors)
from .synthetic import generate_synthetic

log = logging.getLogger(__name__)

CSV_COLUMNS = ["dataset", "group_size", "group_id", "method", "pareto", "expl_size",
               "search_calls", "metric_calls", "minimality", "interpretability", "fairness",
               "utility", "status", "target", "valid", "members", "items"]

DEFAULT_METHODS = [GREEDY_GROW, GROW_PRUNE, EXP_REBUILD, FIXED_WINDOW]


@dataclass
class ExperimentConfig:
    dataset_kind: str = "synthetic"
    path: str | None = None
    rating_scale_max: float = 5.0
    synthetic_users: int = 200
    synthetic_items: int = 300
    synthetic_density: float = 0.3
    group_sizes: list = field(default_factory=lambda: [5, 10])
    groups_per_size: int = 20
    min_ratings: int = 50
    budget: int = 1000
    list_length: int = 10
    window: int = 15
    methods: list = field(default_factory=lambda: list(DEFAULT_METHODS))
    pareto_modes: list = field(default_factory=lambda: [True, False])
    seed: int = 0
    k_neighbors: int = 50
    count_metric_calls_in_budget: bool = False
    utility_weight: float = 0.5
    max_pareto_iters: int = 25
    include_failures_in_means: bool = False
    workers: int = 1

    def validate(self) -> None:
        if self.dataset_kind not in ("movielens", "amazon", "synthetic"):
            raise ConfigurationError(f"unknown dataset_kind {self.dataset_kind!r}")
        if self.dataset_kind != "synthetic" and not self.path:
            raise ConfigurationError(f"{self.dataset_kind} needs a path")
        counts = [self.groups_per_size, self.min_ratings, self.list_length, self.window,
                  self.k_neighbors, self.max_pareto_iters, self.workers, *self.group_sizes]
        if any(int(c) < 1 for c in counts) or not self.group_sizes:
            raise ConfigurationError("all counts must be positive")
        if self.budget < 1:
            raise ConfigurationError("budget must be >= 1")
        if not self.methods:
            raise ConfigurationError("methods must be non-empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigurationError(f"unknown methods: {bad}")
        if not self.pareto_modes:
            raise ConfigurationError("pareto_modes must be non-empty")
        if not 0.0 <= self.utility_weight <= 1.0:
            raise ConfigurationError("utility_weight must lie in [0, 1]")

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_dataset(cfg: ExperimentConfig) -> RatingsDataset:
    if cfg.dataset_kind == "movielens":
        return load_movielens(cfg.path, cfg.rating_scale_max)
    if cfg.dataset_kind == "amazon":
        return load_amazon(cfg.path, cfg.rating_scale_max)
    return generate_synthetic(cfg.synthetic_users, cfg.synthetic_items,
                              cfg.synthetic_density, cfg.seed)


def dataset_label(cfg: ExperimentConfig) -> str:
    if cfg.dataset_kind == "synthetic":
        return (f"synthetic-{cfg.synthetic_users}x{cfg.synthetic_items}"
                f"-d{cfg.synthetic_density}-s{cfg.seed}")
    return cfg.dataset_kind


def groups_for(ds: RatingsDataset, cfg: ExperimentConfig, size: int) -> list[Group]:
    eligible = filter_eligible_users(ds, cfg.min_ratings)
    return sample_groups(ds, eligible, size, cfg.groups_per_size, cfg.seed * 1000 + size)


def run_group(recommender: GroupRecommender, group: Group, cfg: ExperimentConfig) -> list[SearchResult]:
    """All (method, pareto) cells of one group, sharing the factual list and metric vectors."""
    factual = factual_list(recommender, group)
    results = []
    if not factual.entries:
        for method in cfg.methods:
            for pareto in cfg.pareto_modes:
                results.append(explain(recommender, group, method, pareto=pareto,
                                       budget=cfg.budget))
        return results
    target = factual.items[0]
    vectors, metric_calls = prepare_vectors(recommender, group, target)
    for method in cfg.methods:
        for pareto in cfg.pareto_modes:
            results.append(explain(
                recommender, group, method, target=target, budget=cfg.budget, pareto=pareto,
                window=cfg.window, max_pareto_iters=cfg.max_pareto_iters,
                count_metric_calls_in_budget=cfg.count_metric_calls_in_budget,
                vectors=vectors, metric_calls=metric_calls))
    return results


@dataclass
class Run:
    group_size: int
    group_id: int
    group: Group
    result: SearchResult
    report: ExplanationReport | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    dataset: str
    runs: list

    def rows(self) -> list[dict]:
        out = []
        for run in self.runs:
            res, rep = run.result, run.report
            expl = res.explanation if res.ok else None
            out.append({
                "dataset": self.dataset,
                "group_size": run.group_size,
                "group_id": run.group_id,
                "method": res.method,
                "pareto": "on" if res.pareto else "off",
                "expl_size": len(expl) if expl else "",
                "search_calls": res.search_calls,
                "metric_calls": res.metric_calls,
                "minimality": rep.minimality if rep else "",
                "interpretability": rep.interpretability if rep else "",
                "fairness": rep.fairness if rep else "",
                "utility": rep.utility if rep and rep.utility is not None else "",
                "status": res.status,
                "target": "" if res.target is None else res.target,
                "valid": expl.valid if expl else "",
                "members": " ".join(map(str, run.group.members)),
                "items": " ".join(map(str, expl.items)) if expl else "",
            })
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            w.writeheader()
            w.writerows(self.rows())

    def summary(self) -> list[dict]:
        """Per (method, pareto, group_size) aggregates of the grid."""
        include = self.config.include_failures_in_means
        cells: dict = {}
        for run in self.runs:
            key = (run.result.method, run.result.pareto, run.group_size)
            cells.setdefault(key, []).append(run)
        out = []
        for (method, pareto, size), runs in sorted(cells.items(), key=lambda kv: (kv[0][2], kv[0][0], not kv[0][1])):
            ok = [r for r in runs if r.result.ok]
            costs = [r.result.search_calls for r in (runs if include else ok)]
            sizes = [len(r.result.explanation) for r in ok]
            fair = [r.report.fairness for r in ok]
            finite_fair = [f for f in fair if math.isfinite(f)]
            out.append({
                "method": method,
                "pareto": "on" if pareto else "off",
                "group_size": size,
                "runs": len(runs),
                "ok": len(ok),
                "include_failures": include,
                "size_mean": _mean(sizes), "size_std": _std(sizes), "size_median": _median(sizes),
                "cost_mean": _mean(costs), "cost_std": _std(costs), "cost_median": _median(costs),
                "fairness_mean": _mean(fair),
                "fairness_finite_mean": _mean(finite_fair),
                "perfect_fairness_rate": (len(fair) - len(finite_fair)) / len(fair) if fair else "",
                "interpretability_mean": _mean([r.report.interpretability for r in ok]),
                "utility_mean": _mean([r.report.utility for r in ok]),
            })
        return out

    def write_summary(self, path) -> None:
        rows = self.summary()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# include_failures_in_means={self.config.include_failures_in_means}\n")
            if rows:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                w.writerows(rows)


def _mean(xs):
    return statistics.fmean(xs) if xs else ""


def _median(xs):
    return statistics.median(xs) if xs else ""


def _std(xs):
    return statistics.pstdev(xs) if xs else ""


def attach_reports(ds: RatingsDataset, runs: list[Run], cfg: ExperimentConfig) -> None:
    """Evaluate successful runs and fill utilities per group-size batch."""
    for run in runs:
        res = run.result
        if res.ok:
            run.report = evaluate(ds, res.explanation.items, run.group, res.search_calls,
                                  res.metric_calls, cfg.count_metric_calls_in_budget)
    for size in sorted({r.group_size for r in runs}):
        batch = [r for r in runs if r.group_size == size and r.report is not None]
        if batch:
            for run, rep in zip(batch, utility_batch([r.report for r in batch], cfg.utility_weight)):
                run.report = rep


def run_experiment(cfg: ExperimentConfig, ds: RatingsDataset | None = None) -> ExperimentResult:
    cfg.validate()
    if ds is None:
        ds = load_dataset(cfg)
    recommender = GroupRecommender(ds, m=cfg.list_length, k_neighbors=cfg.k_neighbors)
    jobs = []
    for size in cfg.group_sizes:
        for gid, group in enumerate(groups_for(ds, cfg, size)):
            jobs.append((size, gid, group))

    def work(job):
        size, gid, group = job
        log.info("group_size=%d group=%d members=%s", size, gid, group.members)
        return [Run(size, gid, group, res) for res in run_group(recommender, group, cfg)]

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            nested = list(pool.map(work, jobs))
    else:
        nested = [work(j) for j in jobs]
    runs = [r for chunk in nested for r in chunk]
    attach_reports(ds, runs, cfg)
    return ExperimentResult(cfg, dataset_label(cfg), runs)
