"""Graph encoders: typed message passing over character graphs.

Messages flow along stored edge direction only; backward flow is carried by
the explicit REVERSE rows, so adjacency is never symmetrized here.  Gated
kinds (GRU/LSTM updates) share one set of weights across propagation rounds,
while the convolutional kind stacks one distinct layer per round.  All
weight matrices are stored in the orientation W * h (columns act on node
state vectors); row-major states are multiplied against their transpose.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from . import ops
from .errors import IndexOutOfVocabulary
from .params import ParamStore
from .tensor import Tensor, constant
from .textgraph import CharGraph, EdgeType, adjacency


class EncoderKind(Enum):
    GGNN_GRU = "ggnn_gru"
    GGNN_LSTM = "ggnn_lstm"
    GCN = "gcn"

    @classmethod
    def from_string(cls, value: str) -> "EncoderKind":
        for kind in cls:
            if kind.value == value:
                return kind
        raise ValueError(f"unknown encoder kind {value!r}")


GATED_KINDS = (EncoderKind.GGNN_GRU, EncoderKind.GGNN_LSTM)


def init_gru_cell(store: ParamStore, base: str, d_in: int, d_hidden: int,
                  rng: np.random.Generator) -> None:
    """Register W/U/b for the z, r, h gates of one GRU cell under `base`."""
    for gate in ("z", "r", "h"):
        store.add_uniform(f"{base}.W{gate}", (d_hidden, d_in), rng, 1.0 / np.sqrt(d_in))
        store.add_uniform(f"{base}.U{gate}", (d_hidden, d_hidden), rng, 1.0 / np.sqrt(d_hidden))
        store.add_zeros(f"{base}.b{gate}", (d_hidden,))


def init_lstm_cell(store: ParamStore, base: str, d_in: int, d_hidden: int,
                   rng: np.random.Generator) -> None:
    for gate in ("i", "f", "o", "g"):
        store.add_uniform(f"{base}.W{gate}", (d_hidden, d_in), rng, 1.0 / np.sqrt(d_in))
        store.add_uniform(f"{base}.U{gate}", (d_hidden, d_hidden), rng, 1.0 / np.sqrt(d_hidden))
        store.add_zeros(f"{base}.b{gate}", (d_hidden,))


def init_graph_encoder(store: ParamStore, prefix: str, vocab_size: int, d: int,
                       d_out: int, kind: EncoderKind, iters: int,
                       rng: np.random.Generator) -> None:
    """Register all encoder parameters under `prefix`.

    Weights are uniform(-s, s) with s = 1/sqrt(fan-in); biases start at zero.
    """
    s = 1.0 / np.sqrt(d)
    store.add_uniform(f"{prefix}.embed", (vocab_size, d), rng, s)
    if kind in GATED_KINDS:
        for t in EdgeType:
            store.add_uniform(f"{prefix}.msg.{t.label}.W", (d, d), rng, s)
            store.add_zeros(f"{prefix}.msg.{t.label}.b", (d,))
        if kind is EncoderKind.GGNN_GRU:
            init_gru_cell(store, f"{prefix}.gru", d, d, rng)
        else:
            init_lstm_cell(store, f"{prefix}.lstm", d, d, rng)
    elif kind is EncoderKind.GCN:
        for layer in range(iters):
            base = f"{prefix}.gcn{layer}"
            store.add_uniform(f"{base}.self.W", (d, d), rng, s)
            for t in EdgeType:
                store.add_uniform(f"{base}.{t.label}.W", (d, d), rng, s)
            store.add_zeros(f"{base}.b", (d,))
    else:
        raise ValueError(f"unknown encoder kind {kind!r}")
    store.add_uniform(f"{prefix}.out.W", (d_out, d), rng, s)
    store.add_zeros(f"{prefix}.out.b", (d_out,))


def embed_nodes(graph: CharGraph, table: Tensor) -> Tensor:
    """Look up one embedding row per node, as a differentiable one-hot matmul."""
    ids = graph.symbol_ids()
    vocab_size = table.shape[0]
    for i in ids:
        if not 0 <= i < vocab_size:
            raise IndexOutOfVocabulary(
                f"symbol id {i} outside embedding table with {vocab_size} rows"
            )
    onehot = np.zeros((len(ids), vocab_size))
    onehot[np.arange(len(ids)), ids] = 1.0
    return ops.matmul(constant(onehot), table)


def _incoming(graph: CharGraph) -> dict[EdgeType, Tensor]:
    """Constant [N, N] matrices with row v marking the sources of v's in-edges."""
    return {
        t: constant(adjacency(graph, t).toarray().T.astype(np.float64))
        for t in EdgeType
    }


def _in_degree_norm(graph: CharGraph) -> Tensor:
    degree = np.zeros(graph.n)
    for edge in graph.edges.rows:
        degree[edge.target] += 1.0
    return constant(np.diag(1.0 / np.maximum(1.0, degree)))


def _aggregate(states: Tensor, incoming: dict[EdgeType, Tensor],
               store: ParamStore, prefix: str) -> Tensor:
    total = None
    for t in EdgeType:
        weight = store[f"{prefix}.msg.{t.label}.W"]
        bias = store[f"{prefix}.msg.{t.label}.b"]
        per_source = ops.add(ops.matmul(states, ops.transpose(weight)), bias)
        contrib = ops.matmul(incoming[t], per_source)
        total = contrib if total is None else ops.add(total, contrib)
    return total


def aggregate_messages(states: Tensor, graph: CharGraph, store: ParamStore,
                       prefix: str = "graph") -> Tensor:
    """Row v = sum over incoming edges (u -> v, t) of W_t*states[u] + b_t.

    Rows with no incoming edges are zero; the bias is counted once per edge.
    """
    return _aggregate(states, _incoming(graph), store, prefix)


def gru_update(x: Tensor, h: Tensor, store: ParamStore, base: str) -> Tensor:
    """One GRU step: z, r gates then candidate blend.

    z = sigma(Wz*x + Uz*h + bz); r likewise; hcand = tanh(Wh*x + Uh*(r.h) + bh);
    h' = (1 - z).h + z.hcand.
    """
    z = ops.sigmoid(_gate(x, h, store, base, "z"))
    r = ops.sigmoid(_gate(x, h, store, base, "r"))
    cand = ops.tanh(_gate(x, ops.mul(r, h), store, base, "h"))
    ones = constant(np.ones(z.shape))
    return ops.add(ops.mul(ops.sub(ones, z), h), ops.mul(z, cand))


def _lstm_update(x: Tensor, h: Tensor, cell: Tensor, store: ParamStore,
                 base: str) -> tuple[Tensor, Tensor]:
    i = ops.sigmoid(_gate(x, h, store, base, "i"))
    f = ops.sigmoid(_gate(x, h, store, base, "f"))
    o = ops.sigmoid(_gate(x, h, store, base, "o"))
    g = ops.tanh(_gate(x, h, store, base, "g"))
    new_cell = ops.add(ops.mul(f, cell), ops.mul(i, g))
    return ops.mul(o, ops.tanh(new_cell)), new_cell


def _gate(x: Tensor, h: Tensor, store: ParamStore, base: str, gate: str) -> Tensor:
    wx = ops.matmul(x, ops.transpose(store[f"{base}.W{gate}"]))
    uh = ops.matmul(h, ops.transpose(store[f"{base}.U{gate}"]))
    return ops.add(ops.add(wx, uh), store[f"{base}.b{gate}"])


def ggnn_step(states: Tensor, messages: Tensor, store: ParamStore, prefix: str,
              kind: EncoderKind, cell: Tensor | None = None) -> tuple[Tensor, Tensor | None]:
    """One gated node update; returns (new_states, new_cell), cell None for GRU."""
    if kind is EncoderKind.GGNN_GRU:
        return gru_update(messages, states, store, f"{prefix}.gru"), None
    if kind is EncoderKind.GGNN_LSTM:
        if cell is None:
            cell = constant(np.zeros(states.shape))
        return _lstm_update(messages, states, cell, store, f"{prefix}.lstm")
    raise ValueError(f"gated step undefined for {kind!r}")


def _gcn(states: Tensor, incoming: dict[EdgeType, Tensor], norm: Tensor,
         store: ParamStore, prefix: str, layer: int) -> Tensor:
    base = f"{prefix}.gcn{layer}"
    agg = None
    for t in EdgeType:
        contrib = ops.matmul(
            incoming[t], ops.matmul(states, ops.transpose(store[f"{base}.{t.label}.W"]))
        )
        agg = contrib if agg is None else ops.add(agg, contrib)
    pre = ops.add(
        ops.matmul(states, ops.transpose(store[f"{base}.self.W"])),
        ops.matmul(norm, agg),
    )
    return ops.relu(ops.add(pre, store[f"{base}.b"]))


def gcn_layer(states: Tensor, graph: CharGraph, store: ParamStore,
              prefix: str = "graph", layer: int = 0) -> Tensor:
    """h'_v = relu(Wself*h_v + mean over in-edges of Wt*h_u + b).

    The mean is over all incoming edges regardless of type; isolated rows
    keep only their self term.
    """
    return _gcn(states, _incoming(graph), _in_degree_norm(graph), store, prefix, layer)


def propagate(graph: CharGraph, initial: Tensor, store: ParamStore, prefix: str,
              kind: EncoderKind, iters: int) -> Tensor:
    """Run `iters` rounds of message passing; iters=0 returns the input.

    After T rounds a node's output row depends only on nodes within path
    distance T, so perturbations further away leave it bit-identical.
    """
    if iters < 0:
        raise ValueError(f"iters must be non-negative, got {iters}")
    if not isinstance(kind, EncoderKind):
        raise ValueError(f"unknown encoder kind {kind!r}")
    if iters == 0:
        return initial
    states = initial
    incoming = _incoming(graph)
    if kind is EncoderKind.GCN:
        norm = _in_degree_norm(graph)
        for layer in range(iters):
            states = _gcn(states, incoming, norm, store, prefix, layer)
        return states
    cell: Tensor | None = None
    for _ in range(iters):
        messages = _aggregate(states, incoming, store, prefix)
        states, cell = ggnn_step(states, messages, store, prefix, kind, cell=cell)
    return states


def output_model(states: Tensor, store: ParamStore, prefix: str = "graph") -> Tensor:
    """Row-wise tanh(Wo*h + bo); entries land strictly inside (-1, 1)."""
    weight = store[f"{prefix}.out.W"]
    bias = store[f"{prefix}.out.b"]
    return ops.tanh(ops.add(ops.matmul(states, ops.transpose(weight)), bias))


def encode_graph(graph: CharGraph, store: ParamStore, prefix: str,
                 kind: EncoderKind, iters: int) -> Tensor:
    """Embedding -> propagate -> output model, the full encoder stack."""
    initial = embed_nodes(graph, store[f"{prefix}.embed"])
    return output_model(propagate(graph, initial, store, prefix, kind, iters), store, prefix)
