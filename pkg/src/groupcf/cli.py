"""Command line entry point: ``bench``, ``explain`` and ``synth``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import yaml

from .dataset import ConfigurationError, Group, ParseError, ValidationError
from .evaluation import evaluate
from .experiment import ExperimentConfig, load_dataset, run_experiment
from .recommender import GroupRecommender
from .search import EXHAUSTIVE, METHODS, NOTHING_TO_EXPLAIN, explain, factual_list, prepare_vectors
from .synthetic import generate_synthetic, write_movielens

log = logging.getLogger("groupcf")

EXIT_OK = 0
EXIT_NO_EXPLANATION = 1
EXIT_NOTHING_TO_EXPLAIN = 2
EXIT_BAD_INPUT = 3


def _read_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: config must be a mapping")
    return data


def _parse_value(text: str):
    return yaml.safe_load(text)


def build_config(args) -> ExperimentConfig:
    data = _read_config(args.config)
    overrides = {
        "dataset_kind": args.dataset_kind, "path": args.path, "seed": args.seed,
        "budget": args.budget, "methods": args.methods, "group_sizes": args.group_sizes,
        "groups_per_size": args.groups_per_size, "min_ratings": args.min_ratings,
        "workers": getattr(args, "workers", None),
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        data[key.strip()] = _parse_value(value)
    cfg = ExperimentConfig.from_mapping(data)
    cfg.validate()
    return cfg


def cmd_bench(args) -> int:
    cfg = build_config(args)
    result = run_experiment(cfg)
    out = Path(args.out)
    result.write_csv(out)
    summary = Path(args.summary) if args.summary else out.with_name(out.stem + "_summary.csv")
    result.write_summary(summary)
    meta = {"config": cfg.__dict__, "dataset": result.dataset,
            "metric_call_sharing": "one rec_score call per group member, shared by all items"}
    out.with_name(out.stem + "_meta.json").write_text(json.dumps(meta, indent=2, default=str))
    print(f"wrote {len(result.runs)} rows to {out} and summary to {summary}")
    return EXIT_OK


def _fmt(x: float) -> str:
    return "MAX" if math.isinf(x) else f"{x:.4f}"


def cmd_explain(args) -> int:
    cfg = build_config(args)
    ds = load_dataset(cfg)
    rec = GroupRecommender(ds, m=cfg.list_length, k_neighbors=cfg.k_neighbors)
    members = [_parse_value(m) for m in args.members]
    group = Group.from_members(ds, members)
    factual = factual_list(rec, group)
    print(f"group: {' '.join(map(str, group.members))}  |I_G|={len(group.union_interactions)}")
    print("factual list:")
    for rank, (item, score) in enumerate(factual.entries, start=1):
        print(f"  {rank:>2}. {item}  score={score:.4f}")
    if args.target == "top1":
        target = factual.items[0] if factual.entries else None
    else:
        target = _parse_value(args.target)
    if target is None or target not in factual:
        print(f"status: {NOTHING_TO_EXPLAIN} (target {target!r} is not in the factual list)")
        return EXIT_NOTHING_TO_EXPLAIN
    print(f"target: {target}")

    vectors, metric_calls = prepare_vectors(rec, group, target)
    any_valid = False
    for method in cfg.methods:
        for pareto in cfg.pareto_modes:
            if method == EXHAUSTIVE and len(group.union_interactions) > 20:
                print(f"\n[{method}] skipped: |I_G| > 20")
                continue
            res = explain(rec, group, method, target=target, budget=cfg.budget, pareto=pareto,
                          window=cfg.window, max_pareto_iters=cfg.max_pareto_iters,
                          count_metric_calls_in_budget=cfg.count_metric_calls_in_budget,
                          vectors=vectors, metric_calls=metric_calls)
            label = f"{method} ({'pareto' if pareto else 'sorted list'})"
            print(f"\n[{label}] status={res.status} search_calls={res.search_calls} "
                  f"metric_calls={res.metric_calls}")
            if not res.ok:
                continue
            expl = res.explanation
            any_valid = any_valid or expl.valid
            rep = evaluate(ds, expl.items, group, res.search_calls, res.metric_calls,
                           cfg.count_metric_calls_in_budget)
            print(f"  E ({len(expl)} items, valid={expl.valid}): {' '.join(map(str, expl.items))}")
            contrib = ", ".join(f"{u}:{c}" for u, c in expl.member_contributions.items())
            print(f"  member contributions: {contrib}")
            print(f"  minimality={rep.minimality:.4f} interpretability={rep.interpretability:.4f} "
                  f"cost={rep.cost} fairness={_fmt(rep.fairness)}")
    return EXIT_OK if any_valid else EXIT_NO_EXPLANATION


def cmd_synth(args) -> int:
    ds = generate_synthetic(args.users, args.items, args.density, args.seed)
    write_movielens(ds, args.out, args.scale)
    print(f"{ds.stats_line()} -> {args.out}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON config file")
    p.add_argument("--dataset-kind", choices=["movielens", "amazon", "synthetic"])
    p.add_argument("--path", help="ratings file")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--methods", nargs="+", choices=METHODS)
    p.add_argument("--group-sizes", nargs="+", type=int)
    p.add_argument("--groups-per-size", type=int)
    p.add_argument("--min-ratings", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key (repeatable)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groupcf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run the experiment grid")
    _add_common(bench)
    bench.add_argument("--workers", type=int)
    bench.add_argument("--out", default="results.csv")
    bench.add_argument("--summary")
    bench.set_defaults(func=cmd_bench)

    ex = sub.add_parser("explain", help="explain one group's recommendation")
    _add_common(ex)
    ex.add_argument("--members", nargs="+", required=True)
    ex.add_argument("--target", default="top1")
    ex.set_defaults(func=cmd_explain)

    syn = sub.add_parser("synth", help="write a synthetic ratings file")
    syn.add_argument("--users", type=int, required=True)
    syn.add_argument("--items", type=int, required=True)
    syn.add_argument("--density", type=float, required=True)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--scale", type=float, default=5.0)
    syn.add_argument("--out", required=True)
    syn.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigurationError, ParseError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
