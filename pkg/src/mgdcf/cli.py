"""Command line interface.

Subcommands:
  train         fit the model, write checkpoints, metric history, and figure
  eval          score a checkpoint against the configured dataset
  build-homo    construct the sparsified item-item graph and its reports
  verify        run the numerical verification battery
  print-config  print the default configuration document
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import figures
from .data import load_dataset
from .errors import ConfigurationError, DataFormatError
from .evaluation import evaluate
from .hetero import build_hetero_affinity
from .homo import (
    affinity_from_transitions,
    affinity_histogram,
    build_homo_graph,
    build_transitions,
    sparsify,
    write_edge_list,
    write_histogram,
)
from .training import GraphEncoder, Trainer, load_checkpoint, save_checkpoint
from .verification import CHECK_NAMES, run_battery

__all__ = ["main"]


def _load(args) -> dict:
    if args.config is None:
        return config_mod.merge_config(None)
    return config_mod.load_config(args.config)


def _dataset(config: dict):
    return load_dataset(
        config["dataset"]["train_path"], config["dataset"]["test_path"]
    )


def _history_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True)


def cmd_train(args) -> int:
    config = _load(args)
    dataset = _dataset(config)
    trainer = Trainer(
        dataset,
        config_mod.resolve_diffusion(config),
        config_mod.resolve_loss(config),
        config_mod.resolve_train(config),
        sparsification=config_mod.resolve_sparsification(config),
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    history_path = out_dir / "history.jsonl"
    with open(history_path, "w", encoding="ascii") as history_file:

        def log(record: dict) -> None:
            line = _history_line(record)
            history_file.write(line + "\n")
            print(line)

        result = trainer.fit(eval_cutoff=config["eval"]["cutoff"], log=log)
    meta = {"config": config, "seed": config["train"]["seed"]}
    save_checkpoint(out_dir / "checkpoint_best.bin", result.table, meta)
    save_checkpoint(out_dir / "checkpoint_final.bin", result.final_table, meta)
    figures.save_history_figure(result.history, out_dir / "history.png")
    summary = {
        "best_epoch": result.best_epoch,
        "best_ndcg": result.best_ndcg if result.best_epoch >= 0 else None,
        "evaluations": len(result.history),
        "out_dir": str(out_dir),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    config = _load(args)
    dataset = _dataset(config)
    table, meta = load_checkpoint(args.checkpoint)
    expected = dataset.num_users + dataset.num_items
    if table.shape[0] != expected:
        raise ConfigurationError(
            f"checkpoint has {table.shape[0]} rows but the dataset needs "
            f"{expected}"
        )
    train_cfg = config_mod.resolve_train(config)
    if train_cfg.mode == "hetero":
        affinity = build_hetero_affinity(dataset).affinity
    elif train_cfg.mode == "homo":
        affinity = build_homo_graph(
            dataset, config_mod.resolve_sparsification(config)
        ).affinity
    else:
        affinity = None
    encoder = GraphEncoder(
        train_cfg.mode,
        dataset.num_users,
        config_mod.resolve_diffusion(config),
        affinity,
    )
    cutoff = args.cutoff if args.cutoff is not None else config["eval"]["cutoff"]
    want_per_user = args.out_dir is not None
    report = evaluate(
        encoder.encode(table), dataset, cutoff=cutoff,
        include_per_user=want_per_user,
    )
    print(json.dumps(report.as_dict(), sort_keys=True))
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.json", "w", encoding="ascii") as fh:
            json.dump(report.as_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        with open(out_dir / "per_user.tsv", "w", encoding="ascii") as fh:
            fh.write("user\trecall\tndcg\n")
            for user, rec, ndcg in zip(
                report.user_ids, report.recall_per_user, report.ndcg_per_user
            ):
                fh.write(f"{user}\t{float(rec)!r}\t{float(ndcg)!r}\n")
    return 0


def cmd_build_homo(args) -> int:
    config = _load(args)
    dataset = _dataset(config)
    _, _, item_to_item = build_transitions(dataset)
    affinity = affinity_from_transitions(item_to_item)
    graph = sparsify(affinity, config_mod.resolve_sparsification(config))
    counts, edges = affinity_histogram(affinity, args.bins)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_edge_list(graph, out_dir / "edges.tsv")
    write_histogram(counts, edges, out_dir / "histogram.tsv")
    figures.save_histogram_figure(
        counts, edges, graph.threshold, out_dir / "histogram.png"
    )
    threshold = graph.threshold
    summary = {
        "num_items": graph.num_items,
        "candidate_pairs": graph.num_candidates,
        "kept_pairs": graph.num_kept,
        "s_percent": config["homo"]["s_percent"],
        "threshold": threshold if np.isfinite(threshold) else None,
        "out_dir": str(out_dir),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_verify(args) -> int:
    report = run_battery(
        base_seed=args.seed,
        instances=args.instances,
        tolerance_scale=args.tolerance_scale,
        only=args.check,
    )
    for line in report.lines():
        print(line)
    if not report.passed:
        print("verification FAILED", file=sys.stderr)
        return 1
    return 0


def cmd_print_config(_args) -> int:
    print(config_mod.dump_config(config_mod.default_config()), end="")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mgdcf",
        description="Markov graph-diffusion collaborative filtering engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fit a model and write run outputs")
    train.add_argument("-c", "--config", help="YAML config path")
    train.add_argument(
        "-o", "--out-dir", default="runs/latest", help="output directory"
    )
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("-c", "--config", help="YAML config path")
    ev.add_argument("--checkpoint", required=True, help="checkpoint file")
    ev.add_argument("--cutoff", type=int, default=None, help="ranking cutoff")
    ev.add_argument(
        "-o", "--out-dir", default=None,
        help="also write report.json and per_user.tsv here",
    )
    ev.set_defaults(func=cmd_eval)

    homo = sub.add_parser(
        "build-homo", help="build the sparsified item-item graph"
    )
    homo.add_argument("-c", "--config", help="YAML config path")
    homo.add_argument(
        "-o", "--out-dir", default="homo", help="output directory"
    )
    homo.add_argument(
        "--bins", type=int, default=60, help="histogram bin count"
    )
    homo.set_defaults(func=cmd_build_homo)

    verify = sub.add_parser("verify", help="run the verification battery")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--instances", type=int, default=100)
    verify.add_argument(
        "--check", choices=CHECK_NAMES, default=None,
        help="run one named check only",
    )
    verify.add_argument(
        "--tolerance-scale", type=float, default=1.0,
        help="rescale every tolerance (0 forces failure, a harness self-test)",
    )
    verify.set_defaults(func=cmd_verify)

    pc = sub.add_parser("print-config", help="print the default config")
    pc.set_defaults(func=cmd_print_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DataFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
