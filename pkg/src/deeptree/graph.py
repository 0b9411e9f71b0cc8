"""Directed graph with sparse binary vertex features, plus dataset ingestion.

Datasets arrive as two whitespace-separated text files (the usual public
distribution layout of the citation/web corpora):

    content:  <raw_id> <f_0> ... <f_{d-1}> <label>     one vertex per line
    cites:    <cited_raw_id> <citing_raw_id>           one edge per line

Raw ids are arbitrary strings and get remapped to dense integers 0..n-1 in
content-file order. Edges are stored citing -> cited, i.e. (second column ->
first column). Citation lines whose endpoints are missing from the content
file, duplicate edges, and self-loops are dropped and counted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernel import make_rng


class DatasetFormatError(ValueError):
    """Malformed dataset file; carries the path and 1-based line number."""

    def __init__(self, path: str | Path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


@dataclass(frozen=True)
class FeatureVector:
    """Sparse 0/1 bag-of-words vector: sorted active indices plus dimension."""

    indices: tuple[int, ...]
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("feature dimension must be positive")
        prev = -1
        for i in self.indices:
            if i <= prev:
                raise ValueError("feature indices must be strictly increasing")
            if i >= self.dim:
                raise ValueError(f"feature index {i} out of range for dim {self.dim}")
            prev = i

    def dense(self) -> np.ndarray:
        x = np.zeros(self.dim)
        if self.indices:
            x[list(self.indices)] = 1.0
        return x


@dataclass
class Graph:
    """Immutable after construction; safe to share across workers."""

    n: int
    edges: list[tuple[int, int]]
    out_adj: list[list[int]]
    in_adj: list[list[int]]
    features: list[FeatureVector]
    labels: list[int]
    num_classes: int
    vocab_dim: int
    label_names: list[str]
    raw_id_map: dict[str, int]
    drop_counts: dict[str, int] = field(
        default_factory=lambda: {"dangling": 0, "duplicate": 0, "self_loop": 0}
    )


def make_graph(
    n: int,
    edges: list[tuple[int, int]],
    features: list,
    labels: list[int],
    num_classes: int,
    vocab_dim: int,
    label_names: list[str] | None = None,
    raw_id_map: dict[str, int] | None = None,
    drop_counts: dict[str, int] | None = None,
) -> Graph:
    """Build and validate a Graph; adjacency lists are derived from edges.

    ``features`` entries may be FeatureVector instances or iterables of
    active indices (converted, deduplicated, sorted).
    """
    if n < 1:
        raise ValueError("graph needs at least one vertex")
    if len(labels) != n or len(features) != n:
        raise ValueError("labels/features length must equal vertex count")
    if num_classes < 1 or vocab_dim < 1:
        raise ValueError("num_classes and vocab_dim must be positive")
    fvs = []
    for fv in features:
        if not isinstance(fv, FeatureVector):
            fv = FeatureVector(tuple(sorted(set(int(i) for i in fv))), vocab_dim)
        if fv.dim != vocab_dim:
            raise ValueError(f"feature dimension {fv.dim} != vocab_dim {vocab_dim}")
        fvs.append(fv)
    for lab in labels:
        if not 0 <= lab < num_classes:
            raise ValueError(f"label {lab} out of range for {num_classes} classes")
    out_adj: list[list[int]] = [[] for _ in range(n)]
    in_adj: list[list[int]] = [[] for _ in range(n)]
    seen = set()
    for src, dst in edges:
        if not (0 <= src < n and 0 <= dst < n):
            raise ValueError(f"edge ({src},{dst}) out of range")
        if src == dst:
            raise ValueError(f"self-loop ({src},{dst}) not allowed")
        if (src, dst) in seen:
            raise ValueError(f"duplicate edge ({src},{dst})")
        seen.add((src, dst))
        out_adj[src].append(dst)
        in_adj[dst].append(src)
    if label_names is None:
        label_names = [str(c) for c in range(num_classes)]
    if len(label_names) != num_classes:
        raise ValueError("label_names length must equal num_classes")
    if raw_id_map is None:
        raw_id_map = {str(v): v for v in range(n)}
    if drop_counts is None:
        drop_counts = {"dangling": 0, "duplicate": 0, "self_loop": 0}
    return Graph(
        n=n,
        edges=[(int(s), int(d)) for s, d in edges],
        out_adj=out_adj,
        in_adj=in_adj,
        features=fvs,
        labels=[int(x) for x in labels],
        num_classes=num_classes,
        vocab_dim=vocab_dim,
        label_names=list(label_names),
        raw_id_map=dict(raw_id_map),
        drop_counts=dict(drop_counts),
    )


def load_citation_dataset(content_path: str | Path, cites_path: str | Path) -> Graph:
    """Parse content/cites files into a Graph with dense contiguous vertex ids.

    Label strings are mapped to class indices in first-seen order. Dropped
    citation lines are tallied in ``drop_counts`` under ``dangling`` (endpoint
    not in the content file), ``self_loop`` and ``duplicate``.
    """
    content_path = Path(content_path)
    cites_path = Path(cites_path)
    id_of: dict[str, int] = {}
    features: list[FeatureVector] = []
    labels: list[int] = []
    label_index: dict[str, int] = {}
    label_names: list[str] = []
    vocab_dim: int | None = None

    with open(content_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) < 3:
                raise DatasetFormatError(
                    content_path, line_no, "expected <id> <features...> <label>"
                )
            raw_id, label_str = tokens[0], tokens[-1]
            feats = tokens[1:-1]
            if vocab_dim is None:
                vocab_dim = len(feats)
            elif len(feats) != vocab_dim:
                raise DatasetFormatError(
                    content_path,
                    line_no,
                    f"expected {vocab_dim} feature tokens, found {len(feats)}",
                )
            if raw_id in id_of:
                raise DatasetFormatError(content_path, line_no, f"duplicate vertex id {raw_id!r}")
            active = []
            for pos, tok in enumerate(feats):
                if tok == "1":
                    active.append(pos)
                elif tok != "0":
                    raise DatasetFormatError(
                        content_path, line_no, f"non-binary feature token {tok!r}"
                    )
            id_of[raw_id] = len(id_of)
            features.append(FeatureVector(tuple(active), vocab_dim))
            if label_str not in label_index:
                label_index[label_str] = len(label_names)
                label_names.append(label_str)
            labels.append(label_index[label_str])

    if not id_of:
        raise DatasetFormatError(content_path, 0, "empty content file")

    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    drops = {"dangling": 0, "duplicate": 0, "self_loop": 0}
    with open(cites_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 2:
                raise DatasetFormatError(
                    cites_path, line_no, "expected <cited_id> <citing_id>"
                )
            cited, citing = tokens
            if cited not in id_of or citing not in id_of:
                drops["dangling"] += 1
                continue
            src, dst = id_of[citing], id_of[cited]
            if src == dst:
                drops["self_loop"] += 1
                continue
            if (src, dst) in seen:
                drops["duplicate"] += 1
                continue
            seen.add((src, dst))
            edges.append((src, dst))

    return make_graph(
        n=len(id_of),
        edges=edges,
        features=features,
        labels=labels,
        num_classes=len(label_names),
        vocab_dim=vocab_dim,
        label_names=label_names,
        raw_id_map=id_of,
        drop_counts=drops,
    )


def _check_vertex(g: Graph, v: int) -> None:
    if not 0 <= v < g.n:
        raise ValueError(f"vertex {v} out of range for graph with {g.n} vertices")


def undirected_neighbors(g: Graph, v: int) -> list[int]:
    """Sorted, deduplicated union of out- and in-neighbors of ``v``."""
    _check_vertex(g, v)
    return sorted(set(g.out_adj[v]) | set(g.in_adj[v]))


def total_degree(g: Graph, v: int) -> int:
    """Number of directed edges incident on ``v`` (out-degree + in-degree)."""
    _check_vertex(g, v)
    return len(g.out_adj[v]) + len(g.in_adj[v])


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]
    ratio: float
    seed: int


def split(g: Graph, ratio: float, seed: int) -> DatasetSplit:
    """Deterministic train/test split.

    Vertex ids 0..n-1 are shuffled by a PCG64 generator seeded with ``seed``;
    the first round(ratio * n) ids (round-half-even) form the training set.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    perm = make_rng(seed).permutation(g.n)
    k = int(round(ratio * g.n))
    train = tuple(int(v) for v in perm[:k])
    test = tuple(int(v) for v in perm[k:])
    return DatasetSplit(train_ids=train, test_ids=test, ratio=ratio, seed=seed)


def graph_to_json(g: Graph) -> str:
    doc = {
        "n": g.n,
        "vocab_dim": g.vocab_dim,
        "num_classes": g.num_classes,
        "labels": g.labels,
        "features": [list(fv.indices) for fv in g.features],
        "edges": [[s, d] for s, d in g.edges],
        "label_names": g.label_names,
        "raw_id_map": g.raw_id_map,
        "drop_counts": g.drop_counts,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def graph_from_json(text: str) -> Graph:
    doc = json.loads(text)
    return make_graph(
        n=doc["n"],
        edges=[(int(s), int(d)) for s, d in doc["edges"]],
        features=[
            FeatureVector(tuple(int(i) for i in ix), doc["vocab_dim"])
            for ix in doc["features"]
        ],
        labels=doc["labels"],
        num_classes=doc["num_classes"],
        vocab_dim=doc["vocab_dim"],
        label_names=doc["label_names"],
        raw_id_map={k: int(v) for k, v in doc["raw_id_map"].items()},
        drop_counts={k: int(v) for k, v in doc["drop_counts"].items()},
    )


def save_dataset(g: Graph, path: str | Path) -> None:
    Path(path).write_text(graph_to_json(g), encoding="utf-8")


def load_dataset(path: str | Path) -> Graph:
    return graph_from_json(Path(path).read_text(encoding="utf-8"))


def induced_subgraph(g: Graph, vertex_ids: list[int]) -> Graph:
    """Subgraph on the given vertices (kept in the given order), ids remapped."""
    remap: dict[int, int] = {}
    for v in vertex_ids:
        _check_vertex(g, v)
        if v in remap:
            raise ValueError(f"duplicate vertex {v} in subgraph selection")
        remap[v] = len(remap)
    raw_by_idx = {idx: raw for raw, idx in g.raw_id_map.items()}
    edges = [
        (remap[s], remap[d]) for s, d in g.edges if s in remap and d in remap
    ]
    return make_graph(
        n=len(vertex_ids),
        edges=edges,
        features=[g.features[v] for v in vertex_ids],
        labels=[g.labels[v] for v in vertex_ids],
        num_classes=g.num_classes,
        vocab_dim=g.vocab_dim,
        label_names=g.label_names,
        raw_id_map={raw_by_idx[v]: remap[v] for v in vertex_ids},
    )
