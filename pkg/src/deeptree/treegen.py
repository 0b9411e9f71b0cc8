"""Convert a vertex's graph neighborhood into a rooted tree.

Two strategies over the undirected neighbor view:

* ``generate_deep_tree`` -- breadth-ordered expansion in which every
  undirected edge is traversed at most once per tree. Vertices may appear
  repeatedly (at most once per incident edge), which lets the tree reach far
  beyond depth two while still terminating without a node cap.
* ``generate_bfs_tree`` -- plain breadth-first search with a visited set,
  truncated at depth two; every vertex appears at most once.

Children are attached in ascending vertex order, so identical inputs always
produce identical trees.
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path

from .graph import Graph, _check_vertex, undirected_neighbors

DTG = "dtg"
BFS2 = "bfs2"


@dataclass
class TreeNode:
    vertex: int
    children: list["TreeNode"] = field(default_factory=list)
    tree_index: int = -1


@dataclass
class DeepTree:
    root: TreeNode
    target: int
    method: str
    node_count: int
    nodes: list[TreeNode]  # breadth order; every parent precedes its children
    max_count: int | None = None


def index_tree(root: TreeNode) -> list[TreeNode]:
    """Assign breadth-order tree_index values and return the node list."""
    nodes: list[TreeNode] = []
    queue = deque([root])
    while queue:
        node = queue.popleft()
        node.tree_index = len(nodes)
        nodes.append(node)
        queue.extend(node.children)
    return nodes


def _build(root: TreeNode, target: int, method: str, max_count: int | None) -> DeepTree:
    nodes = index_tree(root)
    return DeepTree(
        root=root,
        target=target,
        method=method,
        node_count=len(nodes),
        nodes=nodes,
        max_count=max_count,
    )


def generate_deep_tree(g: Graph, target: int, max_count: int) -> DeepTree:
    """Edge-once breadth-ordered expansion rooted at ``target``.

    Nodes are attached only while the running node count is below
    ``max_count``; with the cap out of reach the expansion drains every edge
    in the target's connected component exactly once.
    """
    _check_vertex(g, target)
    if max_count < 1:
        raise ValueError(f"max_count must be >= 1, got {max_count}")
    root = TreeNode(target)
    used: set[tuple[int, int]] = set()
    queue = deque([root])
    count = 1
    while queue and count < max_count:
        node = queue.popleft()
        v = node.vertex
        for w in undirected_neighbors(g, v):
            if count >= max_count:
                break
            edge = (v, w) if v < w else (w, v)
            if edge in used:
                continue
            used.add(edge)
            child = TreeNode(w)
            node.children.append(child)
            queue.append(child)
            count += 1
    return _build(root, target, DTG, max_count)


def generate_bfs_tree(g: Graph, target: int) -> DeepTree:
    """Visited-set BFS truncated at depth two."""
    _check_vertex(g, target)
    root = TreeNode(target)
    visited = {target}
    queue = deque([(root, 0)])
    while queue:
        node, depth = queue.popleft()
        if depth >= 2:
            continue
        for w in undirected_neighbors(g, node.vertex):
            if w in visited:
                continue
            visited.add(w)
            child = TreeNode(w)
            node.children.append(child)
            queue.append((child, depth + 1))
    return _build(root, target, BFS2, None)


def tree_stats(t: DeepTree, g: Graph) -> dict:
    """Structural summary: size, depth, repetition counts, branching bound."""
    appearances: Counter[int] = Counter()
    max_depth = 0
    max_branching = 0
    queue = deque([(t.root, 0)])
    count = 0
    while queue:
        node, depth = queue.popleft()
        _check_vertex(g, node.vertex)
        appearances[node.vertex] += 1
        max_depth = max(max_depth, depth)
        max_branching = max(max_branching, len(node.children))
        count += 1
        for child in node.children:
            queue.append((child, depth + 1))
    return {
        "node_count": count,
        "max_depth": max_depth,
        "max_branching": max_branching,
        "bd_bound": max_branching**max_depth,
        "appearance_counts": dict(appearances),
    }


def tree_to_json(t: DeepTree) -> str:
    doc = {
        "target": t.target,
        "method": t.method,
        "max_count": t.max_count,
        "nodes": [
            {
                "tree_index": node.tree_index,
                "vertex": node.vertex,
                "children": [c.tree_index for c in node.children],
            }
            for node in t.nodes
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def tree_from_json(text: str) -> DeepTree:
    doc = json.loads(text)
    entries = sorted(doc["nodes"], key=lambda e: e["tree_index"])
    nodes = [TreeNode(vertex=e["vertex"], tree_index=e["tree_index"]) for e in entries]
    for node, entry in zip(nodes, entries):
        node.children = [nodes[ci] for ci in entry["children"]]
    return DeepTree(
        root=nodes[0],
        target=doc["target"],
        method=doc["method"],
        node_count=len(nodes),
        nodes=nodes,
        max_count=doc["max_count"],
    )


def save_tree(t: DeepTree, path: str | Path) -> None:
    Path(path).write_text(tree_to_json(t), encoding="utf-8")
