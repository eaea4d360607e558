"""Command-line interface.

Subcommands: build-graph, gen-corpus, train, synth, gradcheck, bench-iter.
Model options come from a JSON config file (partial files fill in defaults;
unknown keys are rejected) with --seed as a convenience override.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .corpus import CorpusConfig, SyntheticCorpus, gen_corpus
from .errors import Error
from .model import ModelConfig
from .textgraph import Vocabulary, build_graph, export_dot, serialize_graph


def _model_config(args) -> ModelConfig:
    data = {}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("model config file must hold a JSON object")
    config = ModelConfig.from_dict(data)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    config.validate()
    return config


def _cmd_build_graph(args) -> int:
    vocab = Vocabulary.from_texts([args.text])
    graph = build_graph(args.text, vocab)
    if args.dot:
        Path(args.dot).write_text(export_dot(graph), encoding="utf-8")
    if args.json:
        Path(args.json).write_text(serialize_graph(graph), encoding="utf-8")
    if not args.dot and not args.json:
        sys.stdout.write(serialize_graph(graph))
    else:
        print(f"{graph.n} nodes, {graph.edges.E} edges")
    return 0


def _cmd_gen_corpus(args) -> int:
    config = CorpusConfig(
        n_utterances=args.n_utterances,
        n_mels=args.n_mels,
        alphabet=args.alphabet,
        min_words=args.min_words,
        max_words=args.max_words,
        min_len=args.min_len,
        max_len=args.max_len,
        seed=args.seed,
    )
    corpus = gen_corpus(config)
    corpus.save(args.out)
    print(f"wrote {len(corpus)} utterances to {args.out}")
    return 0


def _cmd_train(args) -> int:
    corpus = SyntheticCorpus.load(args.corpus)
    config = _model_config(args)
    model, report = harness.train(
        corpus,
        config,
        steps=args.steps,
        out_dir=args.out_dir,
        early_stop=args.early_stop,
        early_stop_metric=args.early_stop_metric,
        window=args.window,
    )
    summary = report.summary()
    for key in sorted(summary):
        print(f"{key}: {summary[key]}")
    print(f"artifacts in {args.out_dir}")
    return 0


def _cmd_synth(args) -> int:
    expect = _model_config(args) if args.config else None
    info = harness.synth(
        args.checkpoint,
        args.text,
        args.out_prefix,
        max_steps=args.max_steps,
        expect_config=expect,
    )
    print(
        f"{info['n_frames']} frames in {info['steps']} decoder steps"
        + (" (hit step cap)" if info["max_steps_exceeded"] else "")
    )
    for name in info["files"]:
        print(name)
    return 0


def _cmd_gradcheck(args) -> int:
    from .gradcheck import format_table, gradcheck_report, worst_error

    report = gradcheck_report(eps_encoder=args.eps_encoder,
                              eps_model=args.eps_model, seed=args.seed)
    print(format_table(report, tol=args.tol))
    return 0 if worst_error(report) <= args.tol else 1


def _cmd_bench_iter(args) -> int:
    corpus = SyntheticCorpus.load(args.corpus)
    config = _model_config(args)
    iter_values = [int(v) for v in args.iters.split(",")]
    rows = harness.bench_iter(
        corpus, config, iter_values, steps=args.steps, threshold=args.threshold
    )
    harness.save_bench_csv(args.out_csv, rows)
    if args.figure:
        from .plots import save_bench_figure

        save_bench_figure(args.figure, rows)
    for row in rows:
        reach = row.steps_to_threshold if row.steps_to_threshold is not None else "-"
        print(
            f"iters={row.iters}  {row.median_step_seconds * 1e3:8.2f} ms/step  "
            f"steps-to-threshold={reach}  final L1={row.final_l1:.4f}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="melgraph",
        description="Character-graph text-to-speech laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="text -> character graph (JSON/DOT)")
    p.add_argument("text")
    p.add_argument("--dot", help="write Graphviz DOT here")
    p.add_argument("--json", help="write graph JSON here")
    p.set_defaults(func=_cmd_build_graph)

    p = sub.add_parser("gen-corpus", help="write a deterministic synthetic corpus")
    p.add_argument("out")
    p.add_argument("--n-utterances", type=int, default=20)
    p.add_argument("--n-mels", type=int, default=80)
    p.add_argument("--alphabet", default="abcdef")
    p.add_argument("--min-words", type=int, default=1)
    p.add_argument("--max-words", type=int, default=2)
    p.add_argument("--min-len", type=int, default=1)
    p.add_argument("--max-len", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("train", help="fit a model to a corpus")
    p.add_argument("corpus")
    p.add_argument("out_dir")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--config", help="model config JSON (partial allowed)")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--early-stop", type=float, default=1e-3)
    p.add_argument("--early-stop-metric", choices=("loss", "l1"), default="loss")
    p.add_argument("--window", type=int, default=20)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("synth", help="synthesize a spectrogram from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("text")
    p.add_argument("out_prefix")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--config", help="expected model config; mismatch fails")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("--eps-encoder", type=float, default=1e-5)
    p.add_argument("--eps-model", type=float, default=2e-4)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("bench-iter", help="cost/convergence vs propagation depth")
    p.add_argument("corpus")
    p.add_argument("out_csv")
    p.add_argument("--iters", default="1,2,3,4,5")
    p.add_argument("--steps", type=int, default=40)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--figure", help="also render the benchmark figure here")
    p.add_argument("--config", help="model config JSON (partial allowed)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_bench_iter)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (Error, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
