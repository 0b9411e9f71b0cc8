"""Command-line surface: ingest datasets, emit trees, train, benchmark, gradcheck.

Every subcommand exits 0 on success and nonzero with a single
``error: ...`` line on stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .graph import (
    DatasetFormatError,
    load_citation_dataset,
    load_dataset,
    save_dataset,
)
from .model import gradient_check, save_checkpoint
from .training import (
    DEFAULT_RATIOS,
    METHODS,
    TrainConfig,
    TrainingDiverged,
    benchmark,
    save_records_csv,
    train,
)
from .treegen import generate_bfs_tree, generate_deep_tree, save_tree, tree_stats

GRADCHECK_TOLERANCE = 1e-5


def _require_files(*paths: Path) -> None:
    for p in paths:
        if not p.is_file():
            raise FileNotFoundError(f"no such file: {p}")


def _train_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--hidden", type=int, default=200, help="hidden state size")
    sub.add_argument("--epochs", type=int, default=10)
    sub.add_argument("--lr", type=float, default=0.05, help="SGD learning rate")
    sub.add_argument("--grad-clip", type=float, default=5.0, help="global-norm cap")
    sub.add_argument("--max-count", type=int, default=30,
                     help="node cap for deep-tree generation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deeptree",
        description="Graph-to-tree conversion and tree-LSTM vertex classification.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse content/cites files into dataset JSON")
    p.add_argument("--content", required=True, type=Path)
    p.add_argument("--cites", required=True, type=Path)
    p.add_argument("--format", choices=["citation"], default="citation")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tree", help="emit the tree for one vertex as JSON")
    p.add_argument("--dataset", required=True, type=Path, help="dataset JSON")
    p.add_argument("--root", required=True,
                   help="raw vertex id (falls back to integer index)")
    p.add_argument("--method", choices=["dtg", "bfs", "bfs2"], default="dtg")
    p.add_argument("--max-count", type=int, default=30)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("train", help="train one configuration, write CSV + checkpoint")
    p.add_argument("--dataset", required=True, type=Path)
    p.add_argument("--method", choices=sorted(METHODS), default="dtrnn")
    p.add_argument("--ratio", type=float, default=0.7, help="training fraction")
    p.add_argument("--seed", type=int, default=0)
    _train_flags(p)
    p.add_argument("--out", required=True, type=Path, help="per-epoch results CSV")
    p.add_argument("--checkpoint", type=Path, help="model checkpoint JSON")
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark", help="sweep methods x ratios x seeds into one CSV")
    p.add_argument("--dataset", required=True, type=Path)
    p.add_argument("--methods", default="dtrnn,glstm",
                   help="comma-separated method list")
    p.add_argument("--ratios", default=",".join(format(r, "g") for r in DEFAULT_RATIOS),
                   help="comma-separated training fractions")
    p.add_argument("--seeds", default="0", help="comma-separated seeds")
    _train_flags(p)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--no-timing", action="store_true",
                   help="zero the wall-clock columns so output is reproducible")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("gradcheck",
                       help="compare tree gradients against finite differences")
    p.add_argument("--trials", type=int, default=20, help="instances per mode")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def cmd_ingest(args) -> int:
    _require_files(args.content, args.cites)
    g = load_citation_dataset(args.content, args.cites)
    save_dataset(g, args.out)
    drops = g.drop_counts
    print(
        f"ingested n={g.n} edges={len(g.edges)} classes={g.num_classes} "
        f"vocab={g.vocab_dim} dropped[dangling={drops['dangling']} "
        f"duplicate={drops['duplicate']} self_loop={drops['self_loop']}] -> {args.out}"
    )
    return 0


def cmd_tree(args) -> int:
    _require_files(args.dataset)
    g = load_dataset(args.dataset)
    if args.root in g.raw_id_map:
        target = g.raw_id_map[args.root]
    else:
        try:
            target = int(args.root)
        except ValueError:
            raise ValueError(f"unknown vertex id {args.root!r}") from None
    if args.method == "dtg":
        t = generate_deep_tree(g, target, args.max_count)
    else:
        t = generate_bfs_tree(g, target)
    save_tree(t, args.out)
    stats = tree_stats(t, g)
    stats["appearance_counts"] = {
        str(k): v for k, v in sorted(stats["appearance_counts"].items())
    }
    print(json.dumps(stats, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    _require_files(args.dataset)
    g = load_dataset(args.dataset)
    config = TrainConfig(
        method=args.method,
        hidden_dim=args.hidden,
        epochs=args.epochs,
        learning_rate=args.lr,
        grad_clip=args.grad_clip,
        train_ratio=args.ratio,
        seed=args.seed,
        max_count=args.max_count,
    )
    params, record = train(g, config, dataset_name=args.dataset.stem)
    save_records_csv([record], args.out)
    if args.checkpoint:
        save_checkpoint(params, args.checkpoint, seed=config.seed, method=config.method)
    if not args.quiet:
        for e in range(config.epochs):
            print(
                f"epoch {e + 1}: loss={record.epoch_train_loss[e]:.4f} "
                f"macro_f1={record.epoch_macro_f1[e]:.4f} "
                f"micro_f1={record.epoch_micro_f1[e]:.4f}"
            )
    print(
        f"done method={config.method} best_macro_f1={record.best_macro_f1:.4f} "
        f"final_macro_f1={record.final_macro_f1:.4f} -> {args.out}"
    )
    return 0


def _parse_list(text: str, kind, what: str) -> list:
    items = [tok for tok in text.split(",") if tok.strip()]
    if not items:
        raise ValueError(f"empty {what} list")
    return [kind(tok) for tok in items]


def cmd_benchmark(args) -> int:
    _require_files(args.dataset)
    g = load_dataset(args.dataset)
    methods = _parse_list(args.methods, str, "method")
    ratios = _parse_list(args.ratios, float, "ratio")
    seeds = _parse_list(args.seeds, int, "seed")
    base = TrainConfig(
        method=methods[0],
        hidden_dim=args.hidden,
        epochs=args.epochs,
        learning_rate=args.lr,
        grad_clip=args.grad_clip,
        max_count=args.max_count,
    )
    records = benchmark(g, args.dataset.stem, methods, ratios, seeds, base)
    save_records_csv(records, args.out, include_timing=not args.no_timing)
    if not args.quiet:
        for rec in records:
            print(
                f"{rec.config.method} ratio={rec.config.train_ratio:g} "
                f"seed={rec.config.seed} best_macro_f1={rec.best_macro_f1:.4f}"
            )
    print(f"wrote {len(records)} runs -> {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    worst = gradient_check(trials=args.trials, seed=args.seed)
    print(f"max_relative_error={worst:.3e} trials={args.trials} "
          f"tolerance={GRADCHECK_TOLERANCE:g}")
    return 0 if worst < GRADCHECK_TOLERANCE else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetFormatError, TrainingDiverged, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
