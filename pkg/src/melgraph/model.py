"""End-to-end models: graph memory or fused sequence+graph memory, then an
attention decoder that emits mel-spectrogram frames in reduction groups.

Two modes share the decoder.  GRAPH_TTS uses the graph encoder output
directly as the attention memory.  GAE runs a conventional sequence encoder
at full width and concatenates a low-dimensional graph branch onto each
memory position, so the attention query sees both time-domain and
graph-domain features.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path

import numpy as np

from . import ops, storage
from .encoder import EncoderKind, encode_graph, gru_update, init_graph_encoder, init_gru_cell
from .errors import ConfigMismatch, EmptyInput, IndexOutOfVocabulary, LengthMismatch, ShapeMismatch
from .params import ParamStore
from .tensor import Tensor, constant
from .textgraph import CharGraph, Vocabulary, build_graph

STOP_THRESHOLD = 0.5
MAX_STEPS_FACTOR = 10


class Mode(Enum):
    GRAPH_TTS = "graph_tts"
    GAE = "gae"

    @classmethod
    def from_string(cls, value: str) -> "Mode":
        for mode in cls:
            if mode.value == value:
                return mode
        raise ValueError(f"unknown mode {value!r}")


@dataclass
class ModelConfig:
    encoder_kind: EncoderKind = EncoderKind.GGNN_GRU
    mode: Mode = Mode.GRAPH_TTS
    d_model: int = 512
    d_gae: int = 128
    iter: int = 1
    n_mels: int = 80
    reduction: int = 2
    d_prenet: int = 128
    d_att: int = 128
    d_dec: int = 256
    dropout: float = 0.0
    learning_rate: float = 1e-3
    seed: int = 0

    @property
    def d_mem(self) -> int:
        return self.d_model + (self.d_gae if self.mode is Mode.GAE else 0)

    def validate(self) -> None:
        if self.d_model < 2 or self.d_model % 2:
            raise ValueError("d_model must be even (bidirectional halves) and >= 2")
        if self.mode is Mode.GAE and not 0 < self.d_gae < self.d_model:
            raise ValueError("GAE mode needs 0 < d_gae < d_model")
        if self.iter < 0:
            raise ValueError("iter must be non-negative")
        if self.n_mels < 1:
            raise ValueError("n_mels must be positive")
        if self.reduction < 1:
            raise ValueError("reduction must be at least 1")
        if min(self.d_prenet, self.d_att, self.d_dec) < 1:
            raise ValueError("decoder dims must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def to_dict(self) -> dict:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["encoder_kind"] = self.encoder_kind.value
        data["mode"] = self.mode.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        values = dict(data)
        if "encoder_kind" in values:
            values["encoder_kind"] = EncoderKind.from_string(values["encoder_kind"])
        if "mode" in values:
            values["mode"] = Mode.from_string(values["mode"])
        config = cls(**values)
        config.validate()
        return config


@dataclass
class MelSpectrogram:
    """frames: [T, n_mels] reals in [0, 1]; stop: [T] per-frame stop values.

    Targets carry exactly one 1.0 stop flag at the final frame; predictions
    carry stop probabilities instead.
    """

    frames: np.ndarray
    stop: np.ndarray

    def __post_init__(self):
        self.frames = np.atleast_2d(np.asarray(self.frames, dtype=np.float64))
        self.stop = np.asarray(self.stop, dtype=np.float64).reshape(-1)
        if self.frames.shape[0] != self.stop.shape[0]:
            raise ValueError(
                f"{self.frames.shape[0]} frames but {self.stop.shape[0]} stop values"
            )
        if self.frames.shape[0] < 1:
            raise ValueError("a spectrogram holds at least one frame")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_mels(self) -> int:
        return self.frames.shape[1]

    def stop_flags(self) -> np.ndarray:
        return self.stop > STOP_THRESHOLD

    def validate_target(self) -> None:
        if self.frames.min() < 0.0 or self.frames.max() > 1.0:
            raise ValueError("target frames must lie in [0, 1]")
        expected = np.zeros(self.n_frames)
        expected[-1] = 1.0
        if not np.array_equal(self.stop, expected):
            raise ValueError("target stop flags must be exactly one 1.0 at index T-1")


@dataclass
class AttentionState:
    """Alignment weights, one row per decoder step over memory positions."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))

    def validate(self, tol: float = 1e-6) -> None:
        if self.weights.min() < 0.0:
            raise ValueError("attention weights must be non-negative")
        sums = self.weights.sum(axis=1)
        if np.abs(sums - 1.0).max() > tol:
            raise ValueError(f"attention rows must sum to 1 (max dev {np.abs(sums - 1).max()})")


@dataclass
class DecodeResult:
    """Live tensors plus materialized outputs from one decoder run."""

    frames_t: Tensor
    stop_t: Tensor
    mel: MelSpectrogram
    attention: AttentionState
    steps: int
    max_steps_exceeded: bool = False


def build_memory(mode: Mode, seq_states: Tensor | None = None,
                 graph_states: Tensor | None = None) -> Tensor:
    """Assemble the attention memory for a mode.

    GRAPH_TTS passes the graph states through untouched; GAE concatenates the
    graph branch onto each sequence position, so widths add.
    """
    if mode is Mode.GRAPH_TTS:
        if graph_states is None:
            raise ValueError("GRAPH_TTS memory needs graph states")
        return graph_states
    if mode is Mode.GAE:
        if seq_states is None or graph_states is None:
            raise ValueError("GAE memory needs both branches")
        if seq_states.shape[0] != graph_states.shape[0]:
            raise LengthMismatch(
                f"sequence branch has {seq_states.shape[0]} positions, "
                f"graph branch has {graph_states.shape[0]} nodes"
            )
        return ops.concat((seq_states, graph_states), axis=1)
    raise ValueError(f"unknown mode {mode!r}")


def _attend(query: Tensor, memory: Tensor, mproj: Tensor, store: ParamStore,
            prefix: str) -> tuple[Tensor, Tensor]:
    qproj = ops.matmul(query, ops.transpose(store[f"{prefix}.query.W"]))
    scores = ops.matmul(ops.tanh(ops.add(mproj, qproj)), store[f"{prefix}.v"])
    weights = ops.softmax(scores, axis=0)
    context = ops.matmul(ops.transpose(weights), memory)
    return context, weights


def attend(query: Tensor, memory: Tensor, store: ParamStore,
           prefix: str = "att") -> tuple[Tensor, Tensor]:
    """Additive attention: scores v.tanh(Wq*q + Wm*m_j), softmax over positions.

    Returns (context [1, d_mem], weights [N, 1]); the weights sum to one.
    """
    mproj = ops.matmul(memory, ops.transpose(store[f"{prefix}.memory.W"]))
    return _attend(query, memory, mproj, store, prefix)


def pad_to_reduction(mel: MelSpectrogram, reduction: int) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad frames to a multiple of the reduction factor.

    Padding frames are silence with stop 0; the single stop flag stays at the
    final real frame.
    """
    total = int(math.ceil(mel.n_frames / reduction)) * reduction
    frames = np.zeros((total, mel.n_mels))
    frames[: mel.n_frames] = mel.frames
    stop = np.zeros(total)
    stop[: mel.n_frames] = mel.stop
    return frames, stop


def step_stop_targets(stop: np.ndarray, reduction: int) -> np.ndarray:
    """Per-step stop targets: 1 where the group contains the final real frame."""
    return stop.reshape(-1, reduction).max(axis=1)


def loss_components(predicted: MelSpectrogram, target: MelSpectrogram,
                    reduction: int = 2) -> tuple[float, float]:
    """(L1 over frames, stop BCE over reduction groups) after padding both
    spectrograms to a common multiple of the reduction factor."""
    if predicted.n_mels != target.n_mels:
        raise ShapeMismatch(f"n_mels: {predicted.n_mels} vs {target.n_mels}")
    pf, ps = pad_to_reduction(predicted, reduction)
    tf, ts = pad_to_reduction(target, reduction)
    if pf.shape != tf.shape:
        raise ShapeMismatch(
            f"padded frame counts differ: {pf.shape[0]} vs {tf.shape[0]}"
        )
    l1 = float(np.abs(pf - tf).mean())
    p = np.clip(step_stop_targets(ps, reduction), 1e-7, 1.0 - 1e-7)
    t = step_stop_targets(ts, reduction)
    bce = float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))
    return l1, bce


def loss(predicted: MelSpectrogram, target: MelSpectrogram, reduction: int = 2) -> float:
    """Equally weighted sum of the L1 and stop-BCE components."""
    l1, bce = loss_components(predicted, target, reduction)
    return l1 + bce


class TTSModel:
    """Bundles config, vocabulary, and parameters; runs forward passes."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary):
        config.validate()
        self.config = config
        self.vocab = vocab
        self.params = ParamStore()
        self._rng = np.random.default_rng(config.seed)
        self._init_params(self._rng)

    # -- parameter layout ---------------------------------------------------

    def _init_params(self, rng: np.random.Generator) -> None:
        cfg = self.config
        store = self.params
        vocab_size = self.vocab.size
        if cfg.mode is Mode.GAE:
            store.add_uniform("seq.embed", (vocab_size, cfg.d_model), rng,
                              1.0 / np.sqrt(cfg.d_model))
            _init_prenet(store, "seq.prenet", cfg.d_model, cfg.d_prenet, rng)
            half = cfg.d_model // 2
            init_gru_cell(store, "seq.fwd", cfg.d_prenet, half, rng)
            init_gru_cell(store, "seq.bwd", cfg.d_prenet, half, rng)
            graph_width = cfg.d_gae
        else:
            graph_width = cfg.d_model
        init_graph_encoder(store, "graph", vocab_size, graph_width, graph_width,
                           cfg.encoder_kind, cfg.iter, rng)

        d_mem = cfg.d_mem
        store.add_uniform("att.query.W", (cfg.d_att, cfg.d_dec), rng,
                          1.0 / np.sqrt(cfg.d_dec))
        store.add_uniform("att.memory.W", (cfg.d_att, d_mem), rng,
                          1.0 / np.sqrt(d_mem))
        store.add_uniform("att.v", (cfg.d_att, 1), rng, 1.0 / np.sqrt(cfg.d_att))

        _init_prenet(store, "dec.prenet", cfg.n_mels, cfg.d_prenet, rng)
        init_gru_cell(store, "dec.cell", cfg.d_prenet + d_mem, cfg.d_dec, rng)
        d_feat = cfg.d_dec + d_mem
        store.add_uniform("dec.frame.W", (cfg.reduction * cfg.n_mels, d_feat), rng,
                          1.0 / np.sqrt(d_feat))
        store.add_zeros("dec.frame.b", (cfg.reduction * cfg.n_mels,))
        store.add_uniform("dec.stop.W", (1, d_feat), rng, 1.0 / np.sqrt(d_feat))
        store.add_zeros("dec.stop.b", (1,))

    # -- encoders -----------------------------------------------------------

    def _prenet(self, x: Tensor, base: str, train: bool) -> Tensor:
        cfg = self.config
        for layer in (0, 1):
            weight = self.params[f"{base}.{layer}.W"]
            bias = self.params[f"{base}.{layer}.b"]
            x = ops.relu(ops.add(ops.matmul(x, ops.transpose(weight)), bias))
            if train and cfg.dropout > 0.0:
                keep = self._rng.random(x.shape) >= cfg.dropout
                x = ops.mul(x, constant(keep / (1.0 - cfg.dropout)))
        return x

    def seq_encode(self, symbol_ids: list[int], train: bool = False) -> Tensor:
        """Embedding -> prenet -> one bidirectional recurrent layer.

        Forward and backward GRU states are concatenated per position, so the
        output width equals d_model.
        """
        if len(symbol_ids) == 0:
            raise EmptyInput("empty symbol sequence")
        table = self.params["seq.embed"]
        vocab_size = table.shape[0]
        for i in symbol_ids:
            if not 0 <= i < vocab_size:
                raise IndexOutOfVocabulary(
                    f"symbol id {i} outside embedding table with {vocab_size} rows"
                )
        n = len(symbol_ids)
        onehot = np.zeros((n, vocab_size))
        onehot[np.arange(n), symbol_ids] = 1.0
        x = self._prenet(ops.matmul(constant(onehot), table), "seq.prenet", train)

        half = self.config.d_model // 2
        rows = [ops.slice_axis(x, 0, i, i + 1) for i in range(n)]
        state = constant(np.zeros((1, half)))
        forward = []
        for i in range(n):
            state = gru_update(rows[i], state, self.params, "seq.fwd")
            forward.append(state)
        state = constant(np.zeros((1, half)))
        backward_states: list[Tensor | None] = [None] * n
        for i in reversed(range(n)):
            state = gru_update(rows[i], state, self.params, "seq.bwd")
            backward_states[i] = state
        merged = [
            ops.concat((forward[i], backward_states[i]), axis=1) for i in range(n)
        ]
        return merged[0] if n == 1 else ops.concat(merged, axis=0)

    def graph_encode(self, graph: CharGraph) -> Tensor:
        return encode_graph(graph, self.params, "graph", self.config.encoder_kind,
                            self.config.iter)

    def memory_for(self, graph: CharGraph, train: bool = False) -> Tensor:
        cfg = self.config
        if cfg.mode is Mode.GRAPH_TTS:
            return build_memory(Mode.GRAPH_TTS, graph_states=self.graph_encode(graph))
        seq = self.seq_encode(graph.symbol_ids(), train=train)
        return build_memory(Mode.GAE, seq_states=seq, graph_states=self.graph_encode(graph))

    # -- decoder ------------------------------------------------------------

    def decode(self, memory: Tensor, targets: MelSpectrogram | None = None,
               teacher_forcing: bool = False, max_steps: int | None = None,
               train: bool = False) -> DecodeResult:
        """Run the attention decoder over `memory`.

        Teacher forcing consumes padded target frames and emits exactly
        ceil(T/r)*r frames.  Free-running mode stops once the stop
        probability crosses the threshold, or flags `max_steps_exceeded`
        after 10x the memory length (or the explicit `max_steps`).
        """
        cfg = self.config
        r, n_mels = cfg.reduction, cfg.n_mels
        store = self.params
        n_positions = memory.shape[0]
        mproj = ops.matmul(memory, ops.transpose(store["att.memory.W"]))

        if teacher_forcing:
            if targets is None:
                raise ValueError("teacher forcing requires target frames")
            if targets.n_mels != n_mels:
                raise ShapeMismatch(f"target n_mels {targets.n_mels} vs model {n_mels}")
            padded, _ = pad_to_reduction(targets, r)
            total_steps = padded.shape[0] // r
        else:
            total_steps = None
            cap = max_steps if max_steps is not None else MAX_STEPS_FACTOR * n_positions
            cap = max(1, cap)

        frame_w = ops.transpose(store["dec.frame.W"])
        stop_w = ops.transpose(store["dec.stop.W"])
        prev = constant(np.zeros((1, n_mels)))
        hidden = constant(np.zeros((1, cfg.d_dec)))
        blocks: list[Tensor] = []
        stop_logits: list[Tensor] = []
        alignments: list[np.ndarray] = []
        step = 0
        max_steps_exceeded = False
        while True:
            x = self._prenet(prev, "dec.prenet", train)
            context, weights = _attend(hidden, memory, mproj, store, "att")
            alignments.append(weights.data.reshape(-1).copy())
            hidden = gru_update(ops.concat((x, context), axis=1), hidden, store, "dec.cell")
            features = ops.concat((hidden, context), axis=1)
            block = ops.reshape(
                ops.add(ops.matmul(features, frame_w), store["dec.frame.b"]),
                (r, n_mels),
            )
            logit = ops.add(ops.matmul(features, stop_w), store["dec.stop.b"])
            blocks.append(block)
            stop_logits.append(logit)
            step += 1
            if teacher_forcing:
                if step >= total_steps:
                    break
                prev = constant(padded[step * r - 1 : step * r])
            else:
                if _sigmoid_scalar(logit.item()) > STOP_THRESHOLD:
                    break
                if step >= cap:
                    max_steps_exceeded = True
                    break
                prev = ops.slice_axis(block, 0, r - 1, r)

        frames_t = blocks[0] if len(blocks) == 1 else ops.concat(blocks, axis=0)
        stop_t = stop_logits[0] if len(stop_logits) == 1 else ops.concat(stop_logits, axis=0)
        probs = _sigmoid_scalar(stop_t.data.reshape(-1))
        mel = MelSpectrogram(
            np.clip(frames_t.data, 0.0, 1.0).copy(), np.repeat(probs, r)
        )
        return DecodeResult(
            frames_t=frames_t,
            stop_t=stop_t,
            mel=mel,
            attention=AttentionState(np.stack(alignments)),
            steps=step,
            max_steps_exceeded=max_steps_exceeded,
        )

    # -- objectives and inference -------------------------------------------

    def training_loss(self, graph: CharGraph, target: MelSpectrogram,
                      train: bool = True) -> tuple[Tensor, Tensor, Tensor, DecodeResult]:
        """Teacher-forced L1 + stop BCE on one utterance; returns live tensors."""
        r = self.config.reduction
        memory = self.memory_for(graph, train=train)
        result = self.decode(memory, targets=target, teacher_forcing=True, train=train)
        padded, stop = pad_to_reduction(target, r)
        l1 = ops.l1_loss(result.frames_t, constant(padded))
        bce = ops.bce_loss(
            result.stop_t, constant(step_stop_targets(stop, r).reshape(-1, 1))
        )
        return ops.add(l1, bce), l1, bce, result

    def synthesize(self, text: str, max_steps: int | None = None) -> DecodeResult:
        graph = build_graph(text, self.vocab)
        memory = self.memory_for(graph, train=False)
        return self.decode(memory, teacher_forcing=False, max_steps=max_steps)

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        """Write the parameter container plus a config/vocab sidecar."""
        storage.save_tensors(path, self.params.state_dict())
        sidecar = {"config": self.config.to_dict(), "vocab": self.vocab.to_dict()}
        Path(str(path) + ".config.json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path, expect_config: ModelConfig | None = None) -> "TTSModel":
        sidecar = json.loads(Path(str(path) + ".config.json").read_text(encoding="utf-8"))
        config = ModelConfig.from_dict(sidecar["config"])
        if expect_config is not None and expect_config.to_dict() != config.to_dict():
            stored, wanted = config.to_dict(), expect_config.to_dict()
            diffs = sorted(k for k in stored if stored[k] != wanted[k])
            raise ConfigMismatch(f"checkpoint config differs on fields {diffs}")
        vocab = Vocabulary.from_dict(sidecar["vocab"])
        model = cls(config, vocab)
        model.params.load_state_dict(storage.load_tensors(path))
        return model


def _init_prenet(store: ParamStore, base: str, d_in: int, d_out: int,
                 rng: np.random.Generator) -> None:
    store.add_uniform(f"{base}.0.W", (d_out, d_in), rng, 1.0 / np.sqrt(d_in))
    store.add_zeros(f"{base}.0.b", (d_out,))
    store.add_uniform(f"{base}.1.W", (d_out, d_out), rng, 1.0 / np.sqrt(d_out))
    store.add_zeros(f"{base}.1.b", (d_out,))


def _sigmoid_scalar(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))
