"""Training, synthesis, and benchmarking entry points.

Training optimizes with Adam either full-batch (the default: one step
averages the loss over every utterance, giving smooth deterministic descent)
or round-robin over single utterances.  Each step appends one JSON object to
the report, and training can stop early once the sliding mean of the chosen
metric drops under a threshold.  All randomness flows from the model config
seed, so a fixed config reproduces the loss trajectory bit for bit.
"""
from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import ops
from .corpus import SyntheticCorpus
from .errors import ConfigMismatch, DivergenceDetected
from .model import ModelConfig, TTSModel
from .params import ParamStore
from .tensor import Tape, backward
from .textgraph import Vocabulary, build_graph


class Adam(object):
    """Adam with bias correction; state is keyed by parameter name."""

    def __init__(self, params: ParamStore, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        scale = self.lr * np.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for name, p in self.params.items():
            g = self.params.grad(name)
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= scale * m / (np.sqrt(v) + self.eps)


@dataclass
class TrainReport:
    rows: list[dict]
    stopped_early: bool = False

    @property
    def steps_run(self) -> int:
        return len(self.rows)

    def series(self, key: str) -> np.ndarray:
        return np.array([row[key] for row in self.rows])

    def summary(self) -> dict:
        out = {"steps_run": self.steps_run, "stopped_early": self.stopped_early}
        if self.rows:
            last = self.rows[-1]
            out.update(
                final_loss=last["loss"], final_l1=last["l1"], final_bce=last["bce"],
                total_wall_ms=float(self.series("wall_ms").sum()),
            )
        return out

    def save_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for row in self.rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def sliding_mean(values, window: int) -> np.ndarray:
    """Trailing-window means; early entries average what is available."""
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    for i in range(len(values)):
        out[i] = values[max(0, i - window + 1) : i + 1].mean()
    return out


def train(corpus: SyntheticCorpus, config: ModelConfig, steps: int,
          out_dir=None, early_stop: float | None = 1e-3,
          early_stop_metric: str = "loss", window: int = 20,
          batch: str = "full",
          checkpoint_name: str = "model.ckpt") -> tuple[TTSModel, TrainReport]:
    """Fit one model to a corpus.  Returns the model and the step log.

    `batch="full"` averages the loss over the whole corpus each step;
    `batch="roundrobin"` visits one utterance per step in corpus order.
    `early_stop` halts once the mean of the last `window` values of
    `early_stop_metric` ("loss" or "l1") drops below it; pass None to always
    run the full step budget.  With `out_dir` set, writes the checkpoint, a
    JSONL step report, a summary, and a loss curve figure into it.
    """
    if early_stop_metric not in ("loss", "l1"):
        raise ValueError("early_stop_metric must be 'loss' or 'l1'")
    if batch not in ("full", "roundrobin"):
        raise ValueError("batch must be 'full' or 'roundrobin'")
    if config.n_mels != corpus.config.n_mels:
        raise ConfigMismatch(
            f"model n_mels {config.n_mels} vs corpus n_mels {corpus.config.n_mels}"
        )
    vocab = Vocabulary.from_texts(corpus.texts())
    model = TTSModel(config, vocab)
    prepared = [(build_graph(u.text, vocab), u.mel) for u in corpus.utterances]
    optimizer = Adam(model.params, config.learning_rate)

    def corpus_mean(scalars):
        return scalars[0] if len(scalars) == 1 else ops.mean(ops.concat(scalars, axis=0))

    def batch_loss(step):
        if batch == "roundrobin":
            graph, target = prepared[step % len(prepared)]
            return model.training_loss(graph, target, train=True)[:3]
        parts = [model.training_loss(g, t, train=True)[:3] for g, t in prepared]
        return tuple(corpus_mean([p[i] for p in parts]) for i in range(3))

    rows: list[dict] = []
    recent: list[float] = []
    stopped_early = False
    for step in range(steps):
        t0 = time.perf_counter()
        with Tape() as tape:
            total, l1, bce = batch_loss(step)
            loss_value = total.item()
            if not np.isfinite(loss_value):
                raise DivergenceDetected(
                    f"non-finite loss {loss_value} at step {step}"
                )
            model.params.zero_grad()
            backward(total, tape, params=model.params)
        optimizer.step()
        wall_ms = (time.perf_counter() - t0) * 1e3
        rows.append(
            {
                "step": step,
                "loss": loss_value,
                "l1": l1.item(),
                "bce": bce.item(),
                "wall_ms": wall_ms,
            }
        )
        recent.append(rows[-1][early_stop_metric])
        if len(recent) > window:
            recent.pop(0)
        if (
            early_stop is not None
            and len(recent) == window
            and sum(recent) / window < early_stop
        ):
            stopped_early = True
            break

    report = TrainReport(rows=rows, stopped_early=stopped_early)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        model.save(out / checkpoint_name)
        report.save_jsonl(out / "report.jsonl")
        (out / "summary.json").write_text(
            json.dumps(report.summary(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        if report.rows:
            from .plots import save_loss_curve

            save_loss_curve(out / "loss.png", report)
    return model, report


def synth(checkpoint, text: str, out_prefix, max_steps: int | None = None,
          expect_config: ModelConfig | None = None) -> dict:
    """Load a checkpoint, synthesize `text`, and write CSV, binary, and
    figure outputs sharing `out_prefix`."""
    from . import storage
    from .plots import save_mel_figure

    model = TTSModel.load(checkpoint, expect_config=expect_config)
    result = model.synthesize(text, max_steps=max_steps)
    prefix = str(out_prefix)
    storage.save_mel_csv(prefix + ".csv", result.mel.frames)
    storage.save_mel_binary(prefix + ".bin", result.mel.frames, result.mel.stop)
    save_mel_figure(prefix + ".png", result.mel, result.attention)
    return {
        "text": text,
        "n_frames": result.mel.n_frames,
        "steps": result.steps,
        "max_steps_exceeded": result.max_steps_exceeded,
        "files": [prefix + ".csv", prefix + ".bin", prefix + ".png"],
    }


@dataclass
class BenchRow:
    iters: int
    median_step_seconds: float
    steps_to_threshold: int | None
    final_l1: float


def bench_iter(corpus: SyntheticCorpus, config: ModelConfig, iter_values,
               steps: int = 40, threshold: float = 0.05,
               window: int = 10) -> list[BenchRow]:
    """Train once per propagation depth and record cost and convergence.

    Cost is the median seconds per optimization step; convergence is the
    first step whose trailing-window mean L1 drops under `threshold`.
    """
    out = []
    for iters in iter_values:
        _, report = train(corpus, replace(config, iter=iters), steps, early_stop=None)
        walls = report.series("wall_ms") / 1e3
        means = sliding_mean(report.series("l1"), window)
        hits = np.nonzero(means < threshold)[0]
        out.append(
            BenchRow(
                iters=iters,
                median_step_seconds=float(statistics.median(walls)),
                steps_to_threshold=int(hits[0]) if hits.size else None,
                final_l1=float(report.rows[-1]["l1"]),
            )
        )
    return out


def save_bench_csv(path, rows: list[BenchRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iters", "median_step_seconds", "steps_to_threshold", "final_l1"])
        for row in rows:
            writer.writerow(
                [
                    row.iters,
                    f"{row.median_step_seconds:.6g}",
                    "" if row.steps_to_threshold is None else row.steps_to_threshold,
                    f"{row.final_l1:.6g}",
                ]
            )
