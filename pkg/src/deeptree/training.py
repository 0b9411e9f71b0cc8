"""Training loop, experiment protocol, metrics, and the benchmark sweep.

A method name bundles a tree construction with an attention toggle:

    dtrnn      deep trees, plain max pooling
    dtrnn-att  deep trees, soft-attention-weighted pooling
    glstm      depth-2 BFS trees, plain max pooling
    agrnn      depth-2 BFS trees, soft-attention-weighted pooling

Training is per-vertex stochastic gradient descent with global-norm gradient
clipping, fully deterministic given (dataset, config): the split, parameter
init, and epoch shuffles all derive from the config seed.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .graph import Graph, split
from .model import (
    Gradients,
    ModelParams,
    backward_tree,
    forward_tree,
    init_params,
    predict,
    trace_loss,
)
from .treegen import DeepTree, generate_bfs_tree, generate_deep_tree

# method name -> (tree construction, attention enabled)
METHODS = {
    "dtrnn": ("dtg", False),
    "dtrnn-att": ("dtg", True),
    "glstm": ("bfs2", False),
    "agrnn": ("bfs2", True),
}

DEFAULT_RATIOS = (0.7, 0.75, 0.8, 0.85, 0.9)

CSV_COLUMNS = (
    "method", "dataset", "train_ratio", "seed", "epoch",
    "train_loss", "macro_f1", "micro_f1",
    "treegen_s", "train_s", "eval_s",
)


@dataclass(frozen=True)
class TrainConfig:
    method: str = "dtrnn"
    hidden_dim: int = 200
    epochs: int = 10
    learning_rate: float = 0.05
    grad_clip: float = 5.0
    train_ratio: float = 0.7
    seed: int = 0
    max_count: int = 30

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r}; choose from {sorted(METHODS)}"
            )
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.train_ratio < 1.0:
            raise ValueError("train_ratio must be in (0, 1)")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.grad_clip <= 0.0:
            raise ValueError("grad_clip must be positive")
        if self.max_count < 1:
            raise ValueError("max_count must be >= 1")

    @property
    def tree_method(self) -> str:
        return METHODS[self.method][0]

    @property
    def attention(self) -> bool:
        return METHODS[self.method][1]


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, vertex: int, value: float):
        super().__init__(
            f"non-finite training loss {value} at epoch {epoch}, vertex {vertex}"
        )
        self.epoch = epoch
        self.vertex = vertex
        self.value = value


@dataclass
class ExperimentRecord:
    config: TrainConfig
    dataset: str
    epoch_train_loss: list[float] = field(default_factory=list)
    epoch_macro_f1: list[float] = field(default_factory=list)
    epoch_micro_f1: list[float] = field(default_factory=list)
    treegen_s: float = 0.0
    epoch_train_s: list[float] = field(default_factory=list)
    epoch_eval_s: list[float] = field(default_factory=list)

    @property
    def best_macro_f1(self) -> float:
        return max(self.epoch_macro_f1)

    @property
    def best_micro_f1(self) -> float:
        return max(self.epoch_micro_f1)

    @property
    def final_macro_f1(self) -> float:
        return self.epoch_macro_f1[-1]

    @property
    def final_micro_f1(self) -> float:
        return self.epoch_micro_f1[-1]

    @property
    def train_s(self) -> float:
        return sum(self.epoch_train_s)

    @property
    def eval_s(self) -> float:
        return sum(self.epoch_eval_s)


def build_trees(g: Graph, config: TrainConfig) -> dict[int, DeepTree]:
    """One tree per vertex; trees are label-independent and reused across epochs."""
    if config.tree_method == "dtg":
        return {v: generate_deep_tree(g, v, config.max_count) for v in range(g.n)}
    return {v: generate_bfs_tree(g, v) for v in range(g.n)}


def global_norm(grads: Gradients) -> float:
    total = 0.0
    for _, arr in grads.fused():
        flat = arr.ravel()
        total += float(np.dot(flat, flat))
    return float(np.sqrt(total))


def clip_gradients(grads: Gradients, max_norm: float) -> float:
    """Scale all gradients in place so the global norm is at most max_norm."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for _, arr in grads.fused():
            arr *= scale
    return norm


def sgd_step(params: ModelParams, grads: Gradients, lr: float) -> None:
    """Plain SGD: every parameter moves by -lr * gradient. Consumes grads."""
    for (_, arr), (_, g) in zip(params.fused(), grads.fused()):
        g *= lr
        arr -= g


def _confusion(predictions, labels, num_classes: int):
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must have equal length")
    if not predictions:
        raise ValueError("cannot score an empty prediction list")
    tp = np.zeros(num_classes, dtype=np.int64)
    fp = np.zeros(num_classes, dtype=np.int64)
    fn = np.zeros(num_classes, dtype=np.int64)
    for p, l in zip(predictions, labels):
        if not (0 <= p < num_classes and 0 <= l < num_classes):
            raise ValueError(f"class index out of range: pred={p} label={l}")
        if p == l:
            tp[p] += 1
        else:
            fp[p] += 1
            fn[l] += 1
    return tp, fp, fn


def macro_f1(predictions, labels, num_classes: int) -> float:
    """Unweighted mean of per-class F1 over all classes.

    A class absent from both predictions and labels scores 0 and still
    counts toward the mean.
    """
    tp, fp, fn = _confusion(predictions, labels, num_classes)
    total = 0.0
    for c in range(num_classes):
        denom = 2 * tp[c] + fp[c] + fn[c]
        total += 2 * tp[c] / denom if denom else 0.0
    return total / num_classes


def micro_f1(predictions, labels, num_classes: int) -> float:
    """Global-count F1; equals accuracy for single-label prediction."""
    tp, fp, fn = _confusion(predictions, labels, num_classes)
    denom = 2 * tp.sum() + fp.sum() + fn.sum()
    return float(2 * tp.sum() / denom) if denom else 0.0


def evaluate(
    params: ModelParams,
    trees: dict[int, DeepTree],
    g: Graph,
    ids,
    attention: bool,
) -> list[int]:
    return [predict(params, trees[v], g, attention) for v in ids]


def train(
    g: Graph, config: TrainConfig, dataset_name: str = "dataset"
) -> tuple[ModelParams, ExperimentRecord]:
    """Full pipeline: split, build trees, init, epoch loop with per-epoch eval."""
    ds = split(g, config.train_ratio, config.seed)
    if len(set(g.labels[v] for v in ds.train_ids)) < 2:
        raise ValueError("training split must contain at least two classes")
    if not ds.test_ids:
        raise ValueError("train_ratio leaves no test vertices")

    record = ExperimentRecord(config=config, dataset=dataset_name)
    t0 = time.perf_counter()
    trees = build_trees(g, config)
    record.treegen_s = time.perf_counter() - t0

    init_ss, order_ss = np.random.SeedSequence(config.seed).spawn(2)
    params = init_params(
        g.vocab_dim,
        config.hidden_dim,
        g.num_classes,
        np.random.Generator(np.random.PCG64(init_ss)),
        attention=config.attention,
    )
    order_rng = np.random.Generator(np.random.PCG64(order_ss))
    test_labels = [g.labels[v] for v in ds.test_ids]

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        losses = []
        for pos in order_rng.permutation(len(ds.train_ids)):
            v = ds.train_ids[pos]
            trace = forward_tree(params, trees[v], g, config.attention)
            value = trace_loss(trace, g.labels[v])
            if not np.isfinite(value):
                raise TrainingDiverged(epoch, v, value)
            losses.append(value)
            grads = backward_tree(params, trace, g.labels[v])
            clip_gradients(grads, config.grad_clip)
            sgd_step(params, grads, config.learning_rate)
        record.epoch_train_s.append(time.perf_counter() - t0)
        record.epoch_train_loss.append(float(np.mean(losses)))

        t0 = time.perf_counter()
        preds = evaluate(params, trees, g, ds.test_ids, config.attention)
        record.epoch_eval_s.append(time.perf_counter() - t0)
        record.epoch_macro_f1.append(macro_f1(preds, test_labels, g.num_classes))
        record.epoch_micro_f1.append(micro_f1(preds, test_labels, g.num_classes))

    return params, record


def benchmark(
    g: Graph,
    dataset_name: str,
    methods,
    ratios,
    seeds,
    base_config: TrainConfig | None = None,
) -> list[ExperimentRecord]:
    """Full sweep over methods x ratios x seeds; one record per run."""
    methods = list(methods)
    ratios = list(ratios)
    seeds = list(seeds)
    if not methods or not ratios or not seeds:
        raise ValueError("methods, ratios, and seeds must all be non-empty")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
    for r in ratios:
        if not 0.0 < r < 1.0:
            raise ValueError(f"ratio {r} outside (0, 1)")
    base = base_config if base_config is not None else TrainConfig()
    records = []
    for m in methods:
        for r in ratios:
            for s in seeds:
                cfg = replace(base, method=m, train_ratio=r, seed=s)
                _, rec = train(g, cfg, dataset_name)
                records.append(rec)
    return records


def records_to_csv(records, include_timing: bool = True) -> str:
    """Plot-ready CSV, one row per (run, epoch).

    ``treegen_s`` repeats the run's tree-building time on each of its rows;
    ``train_s``/``eval_s`` are per-epoch. With ``include_timing=False`` all
    three are written as zero, which makes the output a pure function of
    (dataset, configs).
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        for e in range(len(rec.epoch_train_loss)):
            times = (
                (rec.treegen_s, rec.epoch_train_s[e], rec.epoch_eval_s[e])
                if include_timing
                else (0.0, 0.0, 0.0)
            )
            writer.writerow(
                [
                    rec.config.method,
                    rec.dataset,
                    format(rec.config.train_ratio, "g"),
                    rec.config.seed,
                    e + 1,
                    format(rec.epoch_train_loss[e], ".10g"),
                    format(rec.epoch_macro_f1[e], ".10g"),
                    format(rec.epoch_micro_f1[e], ".10g"),
                ]
                + [format(t, ".6f") for t in times]
            )
    return buf.getvalue()


def save_records_csv(records, path: str | Path, include_timing: bool = True) -> None:
    Path(path).write_text(records_to_csv(records, include_timing), encoding="utf-8")
