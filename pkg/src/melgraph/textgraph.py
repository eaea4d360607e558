"""Character-level text graphs: one node per character, typed edges per tier.

Characters inside a word are chained by DIRECTED edges and consecutive words
are bridged by a single SEQUENTIAL edge from the last character of one word
to the first character of the next.  Every forward edge gets a REVERSE
mirror, so a graph over N characters always carries exactly 2*(N-1) edges.
Whitespace only delimits words and never becomes a node.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import EmptyGraph, MalformedDocument, UnknownSymbol

_WORDS = re.compile(r"\S+")


class EdgeType(Enum):
    """Edge label; the value doubles as the one-hot column in serialized form."""

    DIRECTED = 0
    REVERSE = 1
    SEQUENTIAL = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "EdgeType":
        try:
            return cls[str(label).upper()]
        except KeyError:
            raise MalformedDocument(f"unknown edge type {label!r}") from None


class Edge(NamedTuple):
    source: int
    target: int
    type: EdgeType


@dataclass(frozen=True)
class CharNode:
    """One non-whitespace character of the input text.

    index: dense position among non-whitespace characters, in text order.
    symbol_id: row into the embedding table, assigned by a Vocabulary.
    word_index / position_in_word: location within the tokenized text.
    """

    index: int
    symbol_id: int
    word_index: int
    position_in_word: int


@dataclass
class EdgeTable:
    rows: list[Edge] = field(default_factory=list)

    @property
    def E(self) -> int:
        return len(self.rows)

    def of_type(self, edge_type: EdgeType) -> list[Edge]:
        return [e for e in self.rows if e.type is edge_type]

    def to_array(self) -> np.ndarray:
        """Pack the table as an (E, 2, 3) array.

        Row e is the outer product of its endpoint pair (source, target) with
        the one-hot of its type: arr[e, :, t] == (source, target) in the
        row's type column t, zero elsewhere.  Self-edges are forbidden, so at
        least one endpoint per row is nonzero and the type column stays
        recoverable.
        """
        arr = np.zeros((len(self.rows), 2, 3), dtype=np.int64)
        for i, (u, v, t) in enumerate(self.rows):
            arr[i, 0, t.value] = u
            arr[i, 1, t.value] = v
        return arr

    def validate(self, n_nodes: int) -> None:
        seen: set[Edge] = set()
        for i, edge in enumerate(self.rows):
            u, v, t = edge
            if not isinstance(t, EdgeType):
                raise MalformedDocument(f"edge {i}: type {t!r} is not an EdgeType")
            if u == v:
                raise MalformedDocument(f"edge {i}: self-edge at node {u}")
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise MalformedDocument(
                    f"edge {i}: endpoint ({u}, {v}) outside 0..{n_nodes - 1}"
                )
            if edge in seen:
                raise MalformedDocument(f"edge {i}: duplicate {edge}")
            seen.add(edge)
        mirrors = {(u, v) for u, v, t in self.rows if t is EdgeType.REVERSE}
        for u, v, t in self.rows:
            if t is not EdgeType.REVERSE and (v, u) not in mirrors:
                raise MalformedDocument(
                    f"missing REVERSE mirror for ({u}, {v}, {t.name})"
                )


@dataclass
class CharGraph:
    nodes: list[CharNode]
    edges: EdgeTable
    text: str

    @property
    def n(self) -> int:
        return len(self.nodes)

    def node_chars(self) -> list[str]:
        return [c for c in self.text if not c.isspace()]

    def symbol_ids(self) -> list[int]:
        return [node.symbol_id for node in self.nodes]

    def validate(self) -> None:
        """Check structural invariants; raises MalformedDocument on violation."""
        chars = self.node_chars()
        if not self.nodes:
            raise MalformedDocument("graph has no nodes")
        if len(self.nodes) != len(chars):
            raise MalformedDocument(
                f"{len(self.nodes)} nodes but {len(chars)} non-whitespace characters"
            )
        expected = []
        for w, (a, b) in enumerate(tokenize(self.text)):
            expected.extend((w, p) for p in range(b - a))
        for k, (node, (w, p)) in enumerate(zip(self.nodes, expected)):
            if node.index != k:
                raise MalformedDocument(f"node {k}: index is {node.index}")
            if node.word_index != w or node.position_in_word != p:
                raise MalformedDocument(
                    f"node {k}: word position ({node.word_index}, "
                    f"{node.position_in_word}) does not match text ({w}, {p})"
                )
            if node.symbol_id < 0:
                raise MalformedDocument(f"node {k}: negative symbol id")
        self.edges.validate(self.n)
        if not _weakly_connected(self):
            raise MalformedDocument("graph is not weakly connected")


@dataclass(frozen=True)
class Vocabulary:
    """Symbol table mapping characters to dense ids, with an optional UNK row.

    The UNK row, when enabled, sits at the end of the table so known symbols
    keep their sorted positions.
    """

    symbols: tuple[str, ...]
    unk: bool = True

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbols in vocabulary")
        for c in self.symbols:
            if len(c) != 1 or c.isspace():
                raise ValueError(f"bad vocabulary symbol {c!r}")

    @classmethod
    def from_texts(cls, texts: Iterable[str], unk: bool = True) -> "Vocabulary":
        chars = sorted({c for text in texts for c in text if not c.isspace()})
        return cls(tuple(chars), unk=unk)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.symbols)}

    @property
    def size(self) -> int:
        return len(self.symbols) + (1 if self.unk else 0)

    @property
    def unk_id(self) -> int | None:
        return len(self.symbols) if self.unk else None

    def symbol_id(self, char: str) -> int:
        idx = self._index.get(char)
        if idx is not None:
            return idx
        if self.unk:
            return len(self.symbols)
        raise UnknownSymbol(f"character {char!r} not in vocabulary (UNK disabled)")

    def to_dict(self) -> dict:
        return {"symbols": list(self.symbols), "unk": self.unk}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(tuple(data["symbols"]), unk=bool(data["unk"]))


def tokenize(text: str) -> list[tuple[int, int]]:
    """Return (start, end) spans of maximal non-whitespace runs."""
    return [m.span() for m in _WORDS.finditer(text)]


def build_graph(text: str, vocab: Vocabulary) -> CharGraph:
    """Build the character graph of `text`.

    Raises EmptyGraph when the text holds no non-whitespace character and
    UnknownSymbol when a character is missing from a no-UNK vocabulary.
    """
    spans = tokenize(text)
    if not spans:
        raise EmptyGraph(f"no non-whitespace characters in {text!r}")
    nodes: list[CharNode] = []
    word_first: list[int] = []
    word_last: list[int] = []
    for w, (a, b) in enumerate(spans):
        word_first.append(len(nodes))
        for p, off in enumerate(range(a, b)):
            nodes.append(CharNode(len(nodes), vocab.symbol_id(text[off]), w, p))
        word_last.append(len(nodes) - 1)

    directed = []
    for first, last in zip(word_first, word_last):
        directed.extend((i, i + 1) for i in range(first, last))
    sequential = [
        (word_last[w], word_first[w + 1]) for w in range(len(spans) - 1)
    ]
    rows = [Edge(u, v, EdgeType.DIRECTED) for u, v in directed]
    rows += [Edge(u, v, EdgeType.SEQUENTIAL) for u, v in sequential]
    rows += [Edge(v, u, EdgeType.REVERSE) for u, v in directed]
    rows += [Edge(v, u, EdgeType.REVERSE) for u, v in sequential]
    return CharGraph(nodes, EdgeTable(rows), text)


def adjacency(graph: CharGraph, edge_type: EdgeType) -> sp.csr_matrix:
    """Sparse boolean [N, N] matrix with (u, v) set iff edge u -> v of the type."""
    n = graph.n
    sources = [e.source for e in graph.edges.rows if e.type is edge_type]
    targets = [e.target for e in graph.edges.rows if e.type is edge_type]
    data = np.ones(len(sources), dtype=bool)
    return sp.csr_matrix((data, (sources, targets)), shape=(n, n), dtype=bool)


def _weakly_connected(graph: CharGraph) -> bool:
    if graph.n == 0:
        return False
    neighbours: dict[int, set[int]] = {i: set() for i in range(graph.n)}
    for u, v, _ in graph.edges.rows:
        neighbours[u].add(v)
        neighbours[v].add(u)
    seen = {0}
    frontier = [0]
    while frontier:
        node = frontier.pop()
        for other in neighbours[node]:
            if other not in seen:
                seen.add(other)
                frontier.append(other)
    return len(seen) == graph.n


def _dot_quote(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(graph: CharGraph) -> str:
    """Deterministic DOT rendering: nodes by index, edges sorted by
    (source, target, type)."""
    chars = graph.node_chars()
    lines = ["digraph chargraph {"]
    for node in graph.nodes:
        lines.append(f'  n{node.index} [label="{_dot_quote(chars[node.index])}"];')
    ordered = sorted(graph.edges.rows, key=lambda e: (e.source, e.target, e.type.value))
    for e in ordered:
        lines.append(f'  n{e.source} -> n{e.target} [type="{e.type.label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def serialize_graph(graph: CharGraph) -> str:
    """UTF-8 JSON document with fields {text, nodes[], edges[]}."""
    doc = {
        "text": graph.text,
        "nodes": [
            {
                "index": nd.index,
                "symbol_id": nd.symbol_id,
                "word_index": nd.word_index,
                "position_in_word": nd.position_in_word,
            }
            for nd in graph.nodes
        ],
        "edges": [[e.source, e.target, e.type.label] for e in graph.edges.rows],
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def parse_graph(document: str) -> CharGraph:
    """Inverse of serialize_graph; raises MalformedDocument with diagnostics."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise MalformedDocument("top level must be an object")
    for key in ("text", "nodes", "edges"):
        if key not in doc:
            raise MalformedDocument(f"missing field {key!r}")
    text = doc["text"]
    if not isinstance(text, str):
        raise MalformedDocument("field 'text' must be a string")
    if not isinstance(doc["nodes"], list) or not isinstance(doc["edges"], list):
        raise MalformedDocument("fields 'nodes' and 'edges' must be arrays")

    nodes = []
    for i, item in enumerate(doc["nodes"]):
        if not isinstance(item, dict):
            raise MalformedDocument(f"node {i}: not an object")
        try:
            fields = {
                key: item[key]
                for key in ("index", "symbol_id", "word_index", "position_in_word")
            }
        except KeyError as exc:
            raise MalformedDocument(f"node {i}: missing field {exc.args[0]!r}") from None
        for key, value in fields.items():
            if not isinstance(value, int) or isinstance(value, bool):
                raise MalformedDocument(f"node {i}: field {key!r} must be an integer")
        nodes.append(CharNode(**fields))

    rows = []
    for i, item in enumerate(doc["edges"]):
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            raise MalformedDocument(f"edge {i}: expected [source, target, type]")
        source, target, label = item
        for value in (source, target):
            if not isinstance(value, int) or isinstance(value, bool):
                raise MalformedDocument(f"edge {i}: endpoints must be integers")
        rows.append(Edge(source, target, EdgeType.from_label(label)))

    graph = CharGraph(nodes, EdgeTable(rows), text)
    graph.validate()
    return graph
