"""Child-sum tree-LSTM over generated trees, with exact reverse-mode gradients.

Every tree node consumes the bag-of-words vector of its graph vertex and the
states of its children. Child hidden states are pooled by an element-wise max
(optionally rescaled first by soft attention weights); each child keeps its
own forget gate, driven by that child's hidden state. The root hidden state
feeds a softmax classifier over vertex labels.

The backward pass walks the tree from the root down, mirroring the forward
recurrence exactly: max-pool gradients are routed to the recorded argmax
child per dimension, forget-gate gradients flow into each child's state, and
attention mode adds the softmax-weighting path.

Inputs are binary and sparse, so input-side products touch only the active
feature columns. Internally the four gates share fused weight buffers (the
input-side one stored transposed) so a node costs a handful of numpy calls;
the per-gate tensors are exposed as views into that storage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, _check_vertex, make_graph
from .kernel import (
    affine,
    dsigmoid_from_output,
    dtanh_from_output,
    finite_diff_grad,
    glorot_init,
    log_softmax,
    make_rng,
    sigmoid,
    softmax,
)
from .treegen import DeepTree, generate_deep_tree

Array = np.ndarray

# Flattening / checkpoint order. W_att is last and optional.
PARAM_ORDER = (
    "W_f", "U_f", "b_f",
    "W_i", "U_i", "b_i",
    "W_o", "U_o", "b_o",
    "W_u", "U_u", "b_u",
    "W_s", "b_s",
    "W_att",
)

_GATE_POS = {"f": 0, "i": 1, "o": 2, "u": 3}  # row-block order in fused buffers


class _GateViews:
    """Named per-gate tensors as views into the fused buffers."""

    hidden_dim: int
    _Wt: Array  # (input_dim, 4*hidden) input weights, transposed
    _U: Array  # (4*hidden, hidden)
    _b: Array  # (4*hidden,)

    def _block(self, gate: str) -> slice:
        h = self.hidden_dim
        k = _GATE_POS[gate]
        return slice(k * h, (k + 1) * h)

    @property
    def W_f(self) -> Array:
        return self._Wt.T[self._block("f")]

    @property
    def U_f(self) -> Array:
        return self._U[self._block("f")]

    @property
    def b_f(self) -> Array:
        return self._b[self._block("f")]

    @property
    def W_i(self) -> Array:
        return self._Wt.T[self._block("i")]

    @property
    def U_i(self) -> Array:
        return self._U[self._block("i")]

    @property
    def b_i(self) -> Array:
        return self._b[self._block("i")]

    @property
    def W_o(self) -> Array:
        return self._Wt.T[self._block("o")]

    @property
    def U_o(self) -> Array:
        return self._U[self._block("o")]

    @property
    def b_o(self) -> Array:
        return self._b[self._block("o")]

    @property
    def W_u(self) -> Array:
        return self._Wt.T[self._block("u")]

    @property
    def U_u(self) -> Array:
        return self._U[self._block("u")]

    @property
    def b_u(self) -> Array:
        return self._b[self._block("u")]

    def arrays(self) -> list[tuple[str, Array]]:
        """(name, tensor) pairs in PARAM_ORDER; absent attention matrix skipped."""
        out = []
        for name in PARAM_ORDER:
            arr = getattr(self, name)
            if arr is not None:
                out.append((name, arr))
        return out

    def fused(self) -> list[tuple[str, Array]]:
        """The actual storage buffers, each parameter exactly once."""
        out = [
            ("W_gates_t", self._Wt),
            ("U_gates", self._U),
            ("b_gates", self._b),
            ("W_s", self.W_s),
            ("b_s", self.b_s),
        ]
        if self.W_att is not None:
            out.append(("W_att", self.W_att))
        return out


class ModelParams(_GateViews):
    """All weights of the cell, classifier, and optional attention layer.

    Per-gate tensors (W_f, U_f, b_f, ...) are accepted and exposed with their
    usual shapes: W_* is (hidden, input), U_* is (hidden, hidden), b_* is
    (hidden,), W_s is (classes, hidden), b_s (classes,), and the optional
    W_att is (input, hidden).
    """

    def __init__(
        self,
        input_dim: int,
        hidden_dim: int,
        num_classes: int,
        W_f: Array, U_f: Array, b_f: Array,
        W_i: Array, U_i: Array, b_i: Array,
        W_o: Array, U_o: Array, b_o: Array,
        W_u: Array, U_u: Array, b_u: Array,
        W_s: Array, b_s: Array,
        W_att: Array | None = None,
    ):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.num_classes = num_classes
        named = {
            "W_f": W_f, "U_f": U_f, "b_f": b_f,
            "W_i": W_i, "U_i": U_i, "b_i": b_i,
            "W_o": W_o, "U_o": U_o, "b_o": b_o,
            "W_u": W_u, "U_u": U_u, "b_u": b_u,
        }
        for name, arr in named.items():
            want = (
                (hidden_dim, input_dim) if name.startswith("W")
                else (hidden_dim, hidden_dim) if name.startswith("U")
                else (hidden_dim,)
            )
            if np.shape(arr) != want:
                raise ValueError(f"{name} has shape {np.shape(arr)}, expected {want}")
        order = ["f", "i", "o", "u"]
        self._Wt = np.ascontiguousarray(
            np.vstack([named["W_" + g] for g in order]).T, dtype=np.float64
        )
        self._U = np.vstack([np.asarray(named["U_" + g], dtype=np.float64) for g in order])
        self._b = np.concatenate([np.asarray(named["b_" + g], dtype=np.float64) for g in order])
        self.W_s = np.array(W_s, dtype=np.float64)
        self.b_s = np.array(b_s, dtype=np.float64)
        if self.W_s.shape != (num_classes, hidden_dim) or self.b_s.shape != (num_classes,):
            raise ValueError("classifier parameter shapes inconsistent with dims")
        if W_att is None:
            self.W_att = None
        else:
            self.W_att = np.array(W_att, dtype=np.float64)
            if self.W_att.shape != (input_dim, hidden_dim):
                raise ValueError("W_att must have shape (input_dim, hidden_dim)")

    @property
    def attention(self) -> bool:
        return self.W_att is not None

    def copy(self) -> "ModelParams":
        tensors = {name: arr.copy() for name, arr in self.arrays()}
        return ModelParams(
            input_dim=self.input_dim,
            hidden_dim=self.hidden_dim,
            num_classes=self.num_classes,
            **{name: tensors.get(name) for name in PARAM_ORDER},
        )


class Gradients(_GateViews):
    """Zero-initialized gradient buffers matching a ModelParams layout."""

    def __init__(self, params: ModelParams):
        self.hidden_dim = params.hidden_dim
        self._Wt = np.zeros_like(params._Wt)
        self._U = np.zeros_like(params._U)
        self._b = np.zeros_like(params._b)
        self.W_s = np.zeros_like(params.W_s)
        self.b_s = np.zeros_like(params.b_s)
        self.W_att = None if params.W_att is None else np.zeros_like(params.W_att)


def init_params(
    input_dim: int,
    hidden_dim: int,
    num_classes: int,
    rng: np.random.Generator,
    attention: bool = False,
) -> ModelParams:
    """Glorot-uniform weight matrices, zero biases.

    Matrices are drawn in PARAM_ORDER, so a fixed generator state yields
    identical parameters.
    """
    shapes = {
        "W_f": (hidden_dim, input_dim), "U_f": (hidden_dim, hidden_dim),
        "W_i": (hidden_dim, input_dim), "U_i": (hidden_dim, hidden_dim),
        "W_o": (hidden_dim, input_dim), "U_o": (hidden_dim, hidden_dim),
        "W_u": (hidden_dim, input_dim), "U_u": (hidden_dim, hidden_dim),
        "W_s": (num_classes, hidden_dim),
        "W_att": (input_dim, hidden_dim),
    }
    biases = {"b_f": hidden_dim, "b_i": hidden_dim, "b_o": hidden_dim,
              "b_u": hidden_dim, "b_s": num_classes}
    kwargs = {}
    for name in PARAM_ORDER:
        if name == "W_att":
            kwargs[name] = glorot_init(*shapes[name], rng) if attention else None
        elif name in shapes:
            kwargs[name] = glorot_init(*shapes[name], rng)
        else:
            kwargs[name] = np.zeros(biases[name])
    return ModelParams(
        input_dim=input_dim, hidden_dim=hidden_dim, num_classes=num_classes, **kwargs
    )


def node_input(g: Graph, v: int) -> Array:
    """Dense 0/1 expansion of the vertex's feature vector."""
    _check_vertex(g, v)
    return g.features[v].dense()


@dataclass
class NodeTrace:
    """Activations recorded for one tree node during the forward pass."""

    child_idx: list[int]  # tree indices of this node's children
    x_cols: Array  # active feature positions of the vertex
    child_h: Array  # (num_children, hidden) stacked child hidden states
    child_c: Array  # (num_children, hidden) stacked child cell states
    hhat: Array  # pooled child hidden state (zeros at a leaf)
    f: Array  # (num_children, hidden) per-child forget activations
    i: Array
    o: Array
    u: Array
    c: Array
    h: Array
    pool_argmax: Array | None  # per-dimension child row fed by the max
    alpha: Array | None = None  # attention weights over children
    att_x: Array | None = None  # W_att^T x for this node


@dataclass
class ForwardTrace:
    nodes: list[NodeTrace]  # indexed by tree_index
    logits: Array
    probs: Array
    attention: bool


def _max_pool(stacked: Array) -> tuple[Array, Array]:
    argmax = np.argmax(stacked, axis=0)  # first max wins: lowest child row
    pooled = stacked[argmax, np.arange(stacked.shape[1])]
    return pooled, argmax


def _attention_pool(att_x: Array, stacked: Array) -> tuple[Array, Array, Array]:
    alpha = softmax(stacked @ att_x)
    weighted = alpha[:, None] * stacked
    argmax = np.argmax(weighted, axis=0)
    pooled = weighted[argmax, np.arange(stacked.shape[1])]
    return pooled, argmax, alpha


def forward_node(
    params: ModelParams,
    x: Array,
    child_states: list[tuple[Array, Array]],
) -> tuple[Array, Array, NodeTrace]:
    """One cell update from a dense input vector and (h, c) child states.

    Dense reference path with plain max pooling; ``forward_tree`` runs the
    sparse fused equivalent over a whole tree.
    """
    hidden = params.hidden_dim
    child_h = np.stack([h for h, _ in child_states]) if child_states else np.zeros((0, hidden))
    child_c = np.stack([c for _, c in child_states]) if child_states else np.zeros((0, hidden))
    if len(child_states):
        hhat, argmax = _max_pool(child_h)
        f = sigmoid(params.W_f @ x + child_h @ params.U_f.T + params.b_f)
    else:
        hhat, argmax = np.zeros(hidden), None
        f = np.zeros((0, hidden))
    i = sigmoid(affine(params.W_i, x, params.U_i, hhat, params.b_i))
    o = sigmoid(affine(params.W_o, x, params.U_o, hhat, params.b_o))
    u = np.tanh(affine(params.W_u, x, params.U_u, hhat, params.b_u))
    c = i * u + (f * child_c).sum(axis=0)
    h = o * np.tanh(c)
    trace = NodeTrace(
        child_idx=[], x_cols=np.flatnonzero(x), child_h=child_h, child_c=child_c,
        hhat=hhat, f=f, i=i, o=o, u=u, c=c, h=h, pool_argmax=argmax,
    )
    return h, c, trace


def forward_tree(
    params: ModelParams,
    tree: DeepTree,
    g: Graph,
    attention: bool = False,
) -> ForwardTrace:
    """Bottom-up pass over the whole tree plus the root classifier.

    Children are evaluated before their parents. With ``attention`` enabled,
    each child's hidden state is first rescaled by its softmax attention
    weight before the max pooling; forget gates keep using the raw child
    hidden states.
    """
    if params.input_dim != g.vocab_dim:
        raise ValueError(
            f"params expect input dim {params.input_dim}, graph has {g.vocab_dim}"
        )
    if params.num_classes != g.num_classes:
        raise ValueError(
            f"params expect {params.num_classes} classes, graph has {g.num_classes}"
        )
    if attention and params.W_att is None:
        raise ValueError("attention requested but params carry no attention matrix")
    hidden = params.hidden_dim
    Wt, U, b = params._Wt, params._U, params._b
    U_f = U[:hidden]
    U_iou = U[hidden:]
    zeros_h = np.zeros(hidden)
    empty = np.zeros((0, hidden))
    traces: list[NodeTrace | None] = [None] * len(tree.nodes)
    # nodes are stored parents-first, so the reverse order is children-first
    for node in reversed(tree.nodes):
        x_cols = np.asarray(g.features[node.vertex].indices, dtype=np.intp)
        wx = Wt[x_cols].sum(axis=0) if x_cols.size else np.zeros(4 * hidden)
        child_idx = [cn.tree_index for cn in node.children]
        alpha = None
        att_x = None
        if child_idx:
            child_h = np.stack([traces[ci].h for ci in child_idx])
            child_c = np.stack([traces[ci].c for ci in child_idx])
            if attention:
                att_x = (
                    params.W_att[x_cols].sum(axis=0) if x_cols.size else zeros_h
                )
                hhat, argmax, alpha = _attention_pool(att_x, child_h)
            else:
                hhat, argmax = _max_pool(child_h)
            f = sigmoid(wx[:hidden] + child_h @ U_f.T + b[:hidden])
            pre = wx[hidden:] + U_iou @ hhat + b[hidden:]
            i = sigmoid(pre[:hidden])
            o = sigmoid(pre[hidden : 2 * hidden])
            u = np.tanh(pre[2 * hidden :])
            c = i * u + (f * child_c).sum(axis=0)
        else:
            child_h, child_c, f = empty, empty, empty
            hhat, argmax = zeros_h, None
            pre = wx[hidden:] + b[hidden:]
            i = sigmoid(pre[:hidden])
            o = sigmoid(pre[hidden : 2 * hidden])
            u = np.tanh(pre[2 * hidden :])
            c = i * u
        h = o * np.tanh(c)
        traces[node.tree_index] = NodeTrace(
            child_idx=child_idx, x_cols=x_cols, child_h=child_h, child_c=child_c,
            hhat=hhat, f=f, i=i, o=o, u=u, c=c, h=h, pool_argmax=argmax,
            alpha=alpha, att_x=att_x,
        )
    root = traces[tree.root.tree_index]
    logits = params.W_s @ root.h + params.b_s
    probs = softmax(logits)
    return ForwardTrace(nodes=traces, logits=logits, probs=probs, attention=attention)


def loss(p: Array, label: int) -> float:
    """Cross-entropy of one prediction: -log p[label]."""
    if not 0 <= label < p.shape[0]:
        raise ValueError(f"label {label} out of range for {p.shape[0]} classes")
    return float(-np.log(p[label]))


def trace_loss(trace: ForwardTrace, label: int) -> float:
    """Cross-entropy computed from the root logits in fused stable form."""
    if not 0 <= label < trace.logits.shape[0]:
        raise ValueError(f"label {label} out of range")
    return float(-log_softmax(trace.logits)[label])


def backward_tree(params: ModelParams, trace: ForwardTrace, label: int) -> Gradients:
    """Exact gradients of the cross-entropy loss w.r.t. every parameter.

    The trace must come from ``forward_tree`` on these params.
    """
    if trace.attention != params.attention:
        raise ValueError("trace attention mode does not match params")
    if trace.nodes[0].h.shape[0] != params.hidden_dim:
        raise ValueError("trace hidden size does not match params")
    hidden = params.hidden_dim
    dims = np.arange(hidden)
    U_f = params._U[:hidden]
    U_iou = params._U[hidden:]
    grads = Gradients(params)

    n_nodes = len(trace.nodes)
    dh = [np.zeros(hidden) for _ in range(n_nodes)]
    dc = [np.zeros(hidden) for _ in range(n_nodes)]

    dz = trace.probs.copy()
    dz[label] -= 1.0
    grads.W_s += np.outer(dz, trace.nodes[0].h)
    grads.b_s += dz
    dh[0] = params.W_s.T @ dz

    # per-node contributions to the U gradients are collected and applied in
    # one matrix product per tree at the end
    da_iou_rows: list[Array] = []
    hhat_rows: list[Array] = []
    da_f_blocks: list[Array] = []
    child_h_blocks: list[Array] = []

    # parents precede children in the trace, so this order completes each
    # node's (dh, dc) before the node itself is processed
    for k, nt in enumerate(trace.nodes):
        dh_k = dh[k]
        dc_k = dc[k]
        tanh_c = np.tanh(nt.c)
        do = dh_k * tanh_c
        dc_k = dc_k + dh_k * nt.o * dtanh_from_output(tanh_c)
        da_i = dc_k * nt.u * dsigmoid_from_output(nt.i)
        da_u = dc_k * nt.i * dtanh_from_output(nt.u)
        da_o = do * dsigmoid_from_output(nt.o)
        da_iou = np.concatenate([da_i, da_o, da_u])
        dhhat = da_iou @ U_iou
        da_iou_rows.append(da_iou)
        hhat_rows.append(nt.hhat)

        if nt.child_idx:
            df = dc_k[None, :] * nt.child_c
            da_f = df * dsigmoid_from_output(nt.f)
            da_f_total = da_f.sum(axis=0)
            da_f_blocks.append(da_f)
            child_h_blocks.append(nt.child_h)
            d_child_h = da_f @ U_f

            if trace.attention:
                weighted_grad = np.zeros_like(nt.child_h)
                weighted_grad[nt.pool_argmax, dims] = dhhat
                dalpha = (weighted_grad * nt.child_h).sum(axis=1)
                d_child_h += weighted_grad * nt.alpha[:, None]
                ds = nt.alpha * (dalpha - float(nt.alpha @ dalpha))
                d_child_h += np.outer(ds, nt.att_x)
                if nt.x_cols.size:
                    grads.W_att[nt.x_cols] += (ds @ nt.child_h)[None, :]
            else:
                # route each pooled dimension's gradient to its argmax child
                d_child_h[nt.pool_argmax, dims] += dhhat

            for r, ci in enumerate(nt.child_idx):
                dh[ci] += d_child_h[r]
                dc[ci] += dc_k * nt.f[r]
        else:
            # a leaf's pooled state is identically zero, so dhhat vanishes
            da_f_total = np.zeros(hidden)

        da_gates = np.concatenate([da_f_total, da_iou])
        if nt.x_cols.size:
            grads._Wt[nt.x_cols] += da_gates[None, :]
        grads._b += da_gates

    grads._U[hidden:] += np.stack(da_iou_rows).T @ np.stack(hhat_rows)
    if da_f_blocks:
        grads._U[:hidden] += np.vstack(da_f_blocks).T @ np.vstack(child_h_blocks)

    return grads


def predict(params: ModelParams, tree: DeepTree, g: Graph, attention: bool = False) -> int:
    """Most probable class for the tree's target vertex; ties take the lowest index."""
    trace = forward_tree(params, tree, g, attention)
    return int(np.argmax(trace.probs))


def params_to_vector(params: ModelParams) -> Array:
    return np.concatenate([arr.ravel() for _, arr in params.arrays()])


def set_params_from_vector(params: ModelParams, vec: Array) -> None:
    offset = 0
    for _, arr in params.arrays():
        size = arr.size
        arr.flat[:] = vec[offset : offset + size]
        offset += size
    if offset != vec.size:
        raise ValueError(f"vector has {vec.size} entries, params need {offset}")


def grads_to_vector(params: ModelParams, grads: Gradients) -> Array:
    return np.concatenate([getattr(grads, name).ravel() for name, _ in params.arrays()])


def gradient_relative_error(
    params: ModelParams,
    tree: DeepTree,
    g: Graph,
    label: int,
    attention: bool,
    step: float = 1e-5,
) -> float:
    """Worst normalized gap between analytic and central-difference gradients.

    Per coordinate: |analytic - numeric| / max(1, |analytic|, |numeric|), so
    tiny gradients are judged absolutely and large ones relatively.
    """
    trace = forward_tree(params, tree, g, attention)
    analytic = grads_to_vector(params, backward_tree(params, trace, label))
    probe = params.copy()

    def f(vec: Array) -> float:
        set_params_from_vector(probe, vec)
        return trace_loss(forward_tree(probe, tree, g, attention), label)

    numeric = finite_diff_grad(f, params_to_vector(params), step)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def random_check_instance(
    rng: np.random.Generator, attention: bool
) -> tuple[Graph, DeepTree, ModelParams, int]:
    """Small random (graph, tree, params, label) for gradient checking.

    Trees hold at most 7 nodes, hidden size at most 4, at most 3 classes.
    """
    n = int(rng.integers(2, 8))
    input_dim = int(rng.integers(2, 7))
    hidden = int(rng.integers(1, 5))
    classes = int(rng.integers(2, 4))
    edges = set()
    for _ in range(int(rng.integers(0, 2 * n + 1))):
        s, d = int(rng.integers(n)), int(rng.integers(n))
        if s != d:
            edges.add((s, d))
    features = [
        sorted(
            int(i)
            for i in rng.choice(input_dim, size=int(rng.integers(1, input_dim + 1)),
                                replace=False)
        )
        for _ in range(n)
    ]
    labels = [int(rng.integers(classes)) for _ in range(n)]
    g = make_graph(n, sorted(edges), features, labels, classes, input_dim)
    target = int(rng.integers(n))
    tree = generate_deep_tree(g, target, max_count=7)
    params = init_params(input_dim, hidden, classes, rng, attention=attention)
    return g, tree, params, labels[target]


def gradient_check(trials: int = 20, seed: int = 0, step: float = 1e-5) -> float:
    """Max normalized gradient error over random instances, with and without attention."""
    rng = make_rng(seed)
    worst = 0.0
    for attention in (False, True):
        for _ in range(trials):
            g, tree, params, label = random_check_instance(rng, attention)
            err = gradient_relative_error(params, tree, g, label, attention, step)
            worst = max(worst, err)
    return worst


def save_checkpoint(
    params: ModelParams,
    path: str | Path,
    seed: int | None = None,
    method: str | None = None,
) -> None:
    """JSON checkpoint; float64 values round-trip bit-exactly."""
    doc = {
        "input_dim": params.input_dim,
        "hidden_dim": params.hidden_dim,
        "num_classes": params.num_classes,
        "attention": params.attention,
        "seed": seed,
        "method": method,
        "params": {name: arr.tolist() for name, arr in params.arrays()},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    tensors = {
        name: np.array(values, dtype=np.float64)
        for name, values in doc["params"].items()
    }
    params = ModelParams(
        input_dim=doc["input_dim"],
        hidden_dim=doc["hidden_dim"],
        num_classes=doc["num_classes"],
        **{name: tensors.get(name) for name in PARAM_ORDER},
    )
    meta = {"seed": doc.get("seed"), "method": doc.get("method")}
    return params, meta
