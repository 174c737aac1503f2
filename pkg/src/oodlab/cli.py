"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 data/file error,
4 training divergence.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import sys

from . import model as mdl
from .data import generate_toy, save_embeddings, toy_to_embeddings, load_embeddings
from .errors import (
    ConfigError,
    DataFormatError,
    DivergenceError,
    InvalidInputError,
    OodlabError,
)
from .evaluation import build_report, export_report, id_accuracy
from .harness import (
    STREAM_DATA,
    ExperimentConfig,
    cluster_histogram,
    compare,
    parse_config_file,
    train,
)
from .numeric import child_seed
from .scoring import SCORE_FUNCTIONS


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodlab",
        description="Outlier-exposure OOD-detection training laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic benchmark as an embedding file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train one configuration and write its artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint on an embedding file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--score", choices=sorted(SCORE_FUNCTIONS), default="absent")
    p.add_argument("--out", default=None, help="optional report.json destination")

    p = sub.add_parser("compare", help="run a strategy/loss/seed grid and tabulate results")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sample-analyze",
                       help="per-cluster selection counts of each strategy on a pool")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="optional CSV destination")
    return parser


def _cmd_gen_data(args) -> int:
    config = parse_config_file(args.config)
    bench = generate_toy(child_seed(config.seed, STREAM_DATA), config.toy)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "toy.bin")
    save_embeddings(toy_to_embeddings(bench), path)
    print(f"wrote {path}")
    return 0


def _cmd_train(args) -> int:
    config = parse_config_file(args.config)
    artifacts = train(config, out_dir=args.out)
    r = artifacts.report
    print(f"fpr95={r.fpr95:.4f} auroc={r.auroc:.4f} acc={r.acc:.4f} tau={r.tau:.4g}")
    return 0


def _cmd_eval(args) -> int:
    ckpt = mdl.load_checkpoint(args.checkpoint)
    model = ckpt.to_model()
    ds = load_embeddings(args.data)
    k = model.output_dim - 1
    score_fn = SCORE_FUNCTIONS[args.score]
    id_logits, _ = mdl.forward(model, ds.id_test.features)
    ood_logits, _ = mdl.forward(model, ds.ood_test)
    report = build_report(score_fn(id_logits, k), score_fn(ood_logits, k),
                          id_accuracy(model, ds.id_test))
    print(json.dumps(dataclasses.asdict(report), sort_keys=True))
    if args.out:
        export_report(report, args.out, "json")
    return 0


def _grid_configs(path) -> list[ExperimentConfig]:
    base = parse_config_file(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read(path)
    if not parser.has_section("grid"):
        return [base]
    known = {"strategies", "losses", "seeds", "k_by_strategy"}
    unknown = set(parser.options("grid")) - known
    if unknown:
        raise ConfigError(f"unknown keys in [grid]: {sorted(unknown)}")
    strategies = [s.strip() for s in parser.get("grid", "strategies",
                                                fallback=base.strategy).split(",")]
    losses = [s.strip() for s in parser.get("grid", "losses",
                                            fallback=base.loss).split(",")]
    try:
        seeds = [int(s) for s in parser.get("grid", "seeds",
                                            fallback=str(base.seed)).split(",")]
    except ValueError as exc:
        raise ConfigError(f"[grid] seeds: {exc}") from None
    k_by_strategy: dict[str, int] = {}
    if parser.has_option("grid", "k_by_strategy"):
        for item in parser.get("grid", "k_by_strategy").split(","):
            name, _, value = item.partition(":")
            try:
                k_by_strategy[name.strip()] = int(value)
            except ValueError as exc:
                raise ConfigError(f"[grid] k_by_strategy: {exc}") from None
    configs = []
    for loss in losses:
        for strategy in strategies:
            for seed in seeds:
                cfg = dataclasses.replace(base, strategy=strategy, loss=loss, seed=seed)
                if strategy in k_by_strategy:
                    cfg = dataclasses.replace(cfg, k_clusters=k_by_strategy[strategy])
                elif strategy == "dos":
                    # One pick per cluster: the cluster count must track the
                    # outlier batch unless the grid pins it explicitly.
                    cfg = dataclasses.replace(cfg, k_clusters=cfg.ood_batch)
                cfg.validate()
                configs.append(cfg)
    return configs


def _cmd_compare(args) -> int:
    configs = _grid_configs(args.grid)
    result = compare(configs, out_dir=args.out)
    for agg in result.aggregates:
        std = "" if agg.fpr95_std is None else f" +- {agg.fpr95_std:.4f}"
        print(f"{agg.strategy}/{agg.loss}: fpr95={agg.fpr95_mean:.4f}{std} "
              f"auroc={agg.auroc_mean:.4f} acc={agg.acc_mean:.4f} (n={agg.n_runs})")
    return 0


def _cmd_sample_analyze(args) -> int:
    ckpt = mdl.load_checkpoint(args.checkpoint)
    model = ckpt.to_model()
    ds = load_embeddings(args.data)
    counts = cluster_histogram(ds.ood_pool, args.k, model=model, m=args.m,
                               seed=args.seed, out_path=args.out)
    for strategy, arr in counts.items():
        print(f"{strategy}: {' '.join(str(int(v)) for v in arr)}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
    "sample-analyze": _cmd_sample_analyze,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, InvalidInputError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 4
    except OodlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
