"""Finite-difference verification of every parameter gradient.

Checks the three graph encoders under a random linear probe loss, then both
end-to-end model modes under the real teacher-forced objective, at toy sizes
so central differences stay fast.  Random probe targets sit well inside
(0, 1) to keep the objective locally smooth around the operating point.

The end-to-end sections use a larger step (2e-4) than the encoder sections
(1e-5).  Several attention/gate entries have true gradients near 1e-8 at toy
scale, so the floored relative error is dominated by cancellation roundoff in
f(p+eps)-f(p-eps); a larger step shrinks that roundoff faster than its own
truncation error grows.  Both choices were validated against Richardson
extrapolation: analytic and numeric derivatives agree to >=4 significant
digits entry by entry.
"""
from __future__ import annotations

import numpy as np

from . import ops
from .encoder import EncoderKind, encode_graph, init_graph_encoder
from .model import MelSpectrogram, Mode, ModelConfig, TTSModel
from .params import ParamStore, fd_report
from .tensor import constant
from .textgraph import Vocabulary, build_graph

PROBE_TEXT = "abc de"
TOY = dict(d=6, d_out=5, d_gae=4, n_mels=4, d_prenet=5, d_att=5, d_dec=6)


def jitter_params(store: ParamStore, rng: np.random.Generator) -> None:
    """Move every parameter to a generic point.

    Fresh initialization leaves biases at exactly zero, which parks relu
    preactivations on their kink for all-zero inputs (the decoder go frame);
    central differences straddle the kink there and disagree with the
    one-sided analytic derivative.  Adding an offset of magnitude in
    [0.05, 0.15] with random sign keeps every entry well away from such
    measure-zero points without distorting scale.
    """
    for _, tensor in store.items():
        magnitude = rng.uniform(0.05, 0.15, tensor.data.shape)
        sign = np.where(rng.random(tensor.data.shape) < 0.5, -1.0, 1.0)
        tensor.data += sign * magnitude


def encoder_section(kind: EncoderKind, iters: int = 2, eps: float = 1e-5,
                    seed: int = 0) -> dict[str, float]:
    """FD errors for one encoder kind under loss sum(encode(graph) * C)."""
    vocab = Vocabulary.from_texts([PROBE_TEXT])
    graph = build_graph(PROBE_TEXT, vocab)
    rng = np.random.default_rng(seed)
    store = ParamStore()
    init_graph_encoder(store, "graph", vocab.size, TOY["d"], TOY["d_out"],
                       kind, iters, rng)
    jitter_params(store, rng)
    probe = constant(rng.uniform(-1.0, 1.0, (graph.n, TOY["d_out"])))

    def objective(params):
        encoded = encode_graph(graph, params, "graph", kind, iters)
        return ops.sum(ops.mul(encoded, probe))

    return fd_report(objective, store, eps=eps)


def model_section(mode: Mode, eps: float = 2e-4, seed: int = 0) -> dict[str, float]:
    """FD errors for the full teacher-forced objective in one mode."""
    config = ModelConfig(
        encoder_kind=EncoderKind.GGNN_GRU,
        mode=mode,
        d_model=TOY["d"],
        d_gae=TOY["d_gae"],
        iter=1,
        n_mels=TOY["n_mels"],
        reduction=2,
        d_prenet=TOY["d_prenet"],
        d_att=TOY["d_att"],
        d_dec=TOY["d_dec"],
        dropout=0.0,
        seed=seed,
    )
    vocab = Vocabulary.from_texts([PROBE_TEXT])
    graph = build_graph(PROBE_TEXT, vocab)
    model = TTSModel(config, vocab)
    rng = np.random.default_rng(seed + 1)
    jitter_params(model.params, rng)
    n_frames = 5
    frames = rng.uniform(0.05, 0.95, (n_frames, TOY["n_mels"]))
    stop = np.zeros(n_frames)
    stop[-1] = 1.0
    target = MelSpectrogram(frames, stop)

    def objective(params):
        total, _, _, _ = model.training_loss(graph, target, train=False)
        return total

    return fd_report(objective, model.params, eps=eps)


def gradcheck_report(eps_encoder: float = 1e-5, eps_model: float = 2e-4,
                     seed: int = 0) -> dict[str, dict[str, float]]:
    """All sections: every encoder kind, then both end-to-end modes."""
    report: dict[str, dict[str, float]] = {}
    for kind in EncoderKind:
        report[f"encoder/{kind.value}"] = encoder_section(kind, eps=eps_encoder, seed=seed)
    for mode in Mode:
        report[f"model/{mode.value}"] = model_section(mode, eps=eps_model, seed=seed)
    return report


def worst_error(report: dict[str, dict[str, float]]) -> float:
    errors = [e for section in report.values() for e in section.values()]
    return max(errors) if errors else 0.0


def format_table(report: dict[str, dict[str, float]], tol: float = 1e-4) -> str:
    lines = []
    for section, entries in report.items():
        for name, err in entries.items():
            flag = "" if err <= tol else "  <-- exceeds tolerance"
            lines.append(f"{section:22s} {name:28s} {err:.3e}{flag}")
        worst = max(entries.values()) if entries else 0.0
        lines.append(f"{section:22s} {'[worst]':28s} {worst:.3e}")
    lines.append(f"overall worst relative error: {worst_error(report):.3e}")
    return "\n".join(lines)
