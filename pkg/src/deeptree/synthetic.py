"""Deterministic synthetic labeled graphs for experiments and tests.

The citation/web corpora used in the experiments are not redistributed with
this package. These generators produce stand-ins with the same shape of
signal: community structure (edges prefer same-class endpoints) and sparse
bag-of-words features that are individually weak but informative in
aggregate over a neighborhood.
"""

from __future__ import annotations

from pathlib import Path

from .graph import Graph, make_graph
from .kernel import make_rng


def community_graph(
    n: int,
    num_classes: int,
    vocab_dim: int,
    num_edges: int,
    seed: int,
    homophily: float = 0.8,
    words_per_vertex: int = 8,
    signal_prob: float = 0.3,
    class_block: int = 12,
) -> Graph:
    """Planted-partition graph with class-correlated word features.

    Each class owns a block of ``class_block`` vocabulary positions; every
    vertex draws ``words_per_vertex`` words, each taken from its own class
    block with probability ``signal_prob`` and from the shared noise region
    otherwise. Edges pick a same-class endpoint with probability
    ``homophily``. Self-loops and duplicate directed edges are skipped.
    """
    if num_classes * class_block >= vocab_dim:
        raise ValueError("vocab_dim too small for the class blocks plus noise words")
    rng = make_rng(seed)
    labels = [int(rng.integers(num_classes)) for _ in range(n)]
    members: list[list[int]] = [[] for _ in range(num_classes)]
    for v, lab in enumerate(labels):
        members[lab].append(v)

    noise_lo = num_classes * class_block
    features = []
    for v in range(n):
        lo = labels[v] * class_block
        words = set()
        for _ in range(words_per_vertex):
            if rng.random() < signal_prob:
                words.add(lo + int(rng.integers(class_block)))
            else:
                words.add(noise_lo + int(rng.integers(vocab_dim - noise_lo)))
        if not words:
            words.add(lo)
        features.append(sorted(words))

    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    attempts = 0
    while len(edges) < num_edges and attempts < 50 * num_edges:
        attempts += 1
        src = int(rng.integers(n))
        if rng.random() < homophily and len(members[labels[src]]) > 1:
            pool = members[labels[src]]
        else:
            pool = None
        dst = int(pool[rng.integers(len(pool))]) if pool else int(rng.integers(n))
        if src == dst or (src, dst) in seen:
            continue
        seen.add((src, dst))
        edges.append((src, dst))

    return make_graph(
        n=n,
        edges=edges,
        features=features,
        labels=labels,
        num_classes=num_classes,
        vocab_dim=vocab_dim,
        label_names=[f"c{c}" for c in range(num_classes)],
        raw_id_map={f"n{v}": v for v in range(n)},
    )


def webkb_like(seed: int = 0) -> Graph:
    """877 vertices, ~1608 directed edges, 7 classes: the web corpus scale."""
    return community_graph(
        n=877,
        num_classes=7,
        vocab_dim=400,
        num_edges=1608,
        seed=seed,
        homophily=0.72,
        words_per_vertex=8,
        signal_prob=0.3,
    )


def cora_like(seed: int = 0) -> Graph:
    """2708 vertices, ~5429 directed edges, 7 classes: citation corpus scale."""
    return community_graph(
        n=2708,
        num_classes=7,
        vocab_dim=600,
        num_edges=5429,
        seed=seed,
        homophily=0.8,
        words_per_vertex=10,
        signal_prob=0.3,
    )


def separable_toy_graph(seed: int = 0) -> Graph:
    """20 vertices, 2 classes, features linearly separable by class word blocks."""
    n = 20
    vocab_dim = 10
    labels = [0 if v < n // 2 else 1 for v in range(n)]
    features = []
    rng = make_rng(seed)
    for v in range(n):
        lo = labels[v] * 5
        picks = rng.choice(5, size=2, replace=False)
        features.append(sorted(lo + int(p) for p in picks))
    # one ring per class keeps the neighborhoods single-class
    edges = []
    half = n // 2
    for v in range(half):
        edges.append((v, (v + 1) % half))
    for v in range(half):
        edges.append((half + v, half + (v + 1) % half))
    return make_graph(
        n=n,
        edges=edges,
        features=features,
        labels=labels,
        num_classes=2,
        vocab_dim=vocab_dim,
        label_names=["a", "b"],
        raw_id_map={f"t{v}": v for v in range(n)},
    )


def write_citation_files(g: Graph, content_path: str | Path, cites_path: str | Path) -> None:
    """Emit a Graph in the two-file text layout understood by the loader."""
    raw_by_idx = {idx: raw for raw, idx in g.raw_id_map.items()}
    with open(content_path, "w", encoding="utf-8") as fh:
        for v in range(g.n):
            bits = ["0"] * g.vocab_dim
            for i in g.features[v].indices:
                bits[i] = "1"
            fh.write(
                f"{raw_by_idx[v]} {' '.join(bits)} {g.label_names[g.labels[v]]}\n"
            )
    with open(cites_path, "w", encoding="utf-8") as fh:
        for src, dst in g.edges:
            # stored direction is citing -> cited; file rows are <cited> <citing>
            fh.write(f"{raw_by_idx[dst]} {raw_by_idx[src]}\n")
