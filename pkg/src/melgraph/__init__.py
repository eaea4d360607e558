"""melgraph: character-graph encoders for sequence-to-spectrogram models.

Text becomes a typed directed graph over characters, graph neural networks
(gated or convolutional) encode it, and an attention decoder emits mel
frames.  Everything runs on numpy float64 with a small reverse-mode tape, so
every gradient can be audited against central differences.
"""
from .corpus import CorpusConfig, SyntheticCorpus, Utterance, gen_corpus, target_mel
from .encoder import EncoderKind, encode_graph, propagate
from .errors import (
    ConfigMismatch,
    DivergenceDetected,
    EmptyGraph,
    EmptyInput,
    Error,
    IndexOutOfVocabulary,
    LengthMismatch,
    MalformedDocument,
    NonScalarLoss,
    ShapeMismatch,
    UnknownSymbol,
)
from .harness import Adam, BenchRow, TrainReport, bench_iter, synth, train
from .model import (
    AttentionState,
    DecodeResult,
    MelSpectrogram,
    Mode,
    ModelConfig,
    TTSModel,
    loss,
    loss_components,
)
from .params import ParamStore, fd_check, fd_report
from .tensor import Tape, Tensor, backward, constant
from .textgraph import (
    CharGraph,
    CharNode,
    Edge,
    EdgeTable,
    EdgeType,
    Vocabulary,
    adjacency,
    build_graph,
    export_dot,
    parse_graph,
    serialize_graph,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionState",
    "Adam",
    "BenchRow",
    "CharGraph",
    "CharNode",
    "ConfigMismatch",
    "CorpusConfig",
    "DecodeResult",
    "DivergenceDetected",
    "Edge",
    "EdgeTable",
    "EdgeType",
    "EmptyGraph",
    "EmptyInput",
    "EncoderKind",
    "Error",
    "IndexOutOfVocabulary",
    "LengthMismatch",
    "MalformedDocument",
    "MelSpectrogram",
    "Mode",
    "ModelConfig",
    "NonScalarLoss",
    "ParamStore",
    "ShapeMismatch",
    "SyntheticCorpus",
    "TTSModel",
    "Tape",
    "Tensor",
    "TrainReport",
    "UnknownSymbol",
    "Utterance",
    "Vocabulary",
    "adjacency",
    "backward",
    "bench_iter",
    "build_graph",
    "constant",
    "encode_graph",
    "export_dot",
    "fd_check",
    "fd_report",
    "gen_corpus",
    "loss",
    "loss_components",
    "parse_graph",
    "propagate",
    "serialize_graph",
    "synth",
    "target_mel",
    "tokenize",
    "train",
    "__version__",
]
