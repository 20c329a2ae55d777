"""Command-line entry point.

Subcommands: corpus-gen, train-interpreter, train-speaker, synthesize,
eval, bench.  Exit codes: 0 success, 1 runtime failure, 2 usage error,
3 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .acoustic import train_acoustic
from .config import Config, default_config_text, load_config
from .errors import ConfigError
from .evalbench import (
    BenchReport,
    config_hash,
    format_report_table,
    measure_rtf,
    write_reports,
)
from .toyworld import (
    build_corpus,
    generate_utterance,
    random_text,
    read_manifest,
    render_waveform,
    text_to_ids,
    write_manifest,
    write_wav,
)
from .transducer import greedy_decode, train_transducer


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="tokcascade",
        description="Two-stage discrete-token speech synthesis at desk scale.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="config file path")

    p = sub.add_parser("corpus-gen", help="generate the synthetic token corpus")
    common(p)
    p.add_argument("--out", required=True, help="output directory for manifests")

    p = sub.add_parser("init-config", help="write a default config file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=1234)

    p = sub.add_parser("train-interpreter", help="train the text-to-semantic stage")
    common(p)
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--variant", choices=sorted(pipeline.VARIANTS), default="compact")

    p = sub.add_parser("train-speaker", help="train the semantic-to-acoustic stage")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synthesize", help="text plus prompts to WAV and token grids")
    common(p)
    p.add_argument("--interpreter", required=True, help="transducer checkpoint")
    p.add_argument("--speaker", required=True, help="acoustic checkpoint")
    p.add_argument("--text", required=True)
    p.add_argument("--ps-rate", type=int, required=True, help="semantic prompt rate")
    p.add_argument("--ps-pitch", type=int, required=True, help="semantic prompt pitch")
    p.add_argument("--pa-speaker", type=int, required=True, help="acoustic prompt speaker")
    p.add_argument("--pa-rate", type=int, default=None)
    p.add_argument("--pa-pitch", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", default="sample")

    p = sub.add_parser("eval", help="score a trained cascade on the held-out split")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--interpreter", required=True)
    p.add_argument("--speaker", default=None)
    p.add_argument("--out", default=None, help="metrics JSON path")

    p = sub.add_parser("bench", help="throughput and NLL comparison of variants")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--interpreter", required=True, help="compact-variant checkpoint")
    p.add_argument("--baseline", required=True, help="baseline-variant checkpoint")
    p.add_argument("--out", default=None, help="report JSONL path")
    p.add_argument("--utterances", type=int, default=50)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--threaded", action="store_true",
                   help="also time a multi-threaded decode (labeled separately)")
    return top


def _load_corpus_dir(path: str):
    base = Path(path)
    train = read_manifest(base / "train.jsonl")
    evalset = read_manifest(base / "eval.jsonl")
    return train, evalset


def _cmd_corpus_gen(cfg: Config, args) -> int:
    spec = cfg.toy_spec()
    params = cfg.corpus_params()
    corpus = build_corpus(spec, seed=cfg.seed, **params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(corpus.train, out / "train.jsonl")
    write_manifest(corpus.eval, out / "eval.jsonl")
    meta = {
        "seed": cfg.seed,
        "held_out_combinations": sorted(corpus.held_out),
        "n_train": len(corpus.train),
        "n_eval": len(corpus.eval),
        "config_hash": config_hash(cfg.raw_text),
    }
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    print(f"wrote {len(corpus.train)} train / {len(corpus.eval)} eval records to {out}")
    return 0


def _cmd_train_interpreter(cfg: Config, args) -> int:
    spec = cfg.toy_spec()
    train, _ = _load_corpus_dir(args.corpus)
    model = train_transducer(
        spec, train, cfg.transducer_train(),
        variant=pipeline.VARIANTS[args.variant], log_every=5,
    )
    pipeline.save_transducer_checkpoint(args.out, model)
    print(f"saved {args.variant} transducer checkpoint to {args.out}")
    return 0


def _cmd_train_speaker(cfg: Config, args) -> int:
    spec = cfg.toy_spec()
    train, _ = _load_corpus_dir(args.corpus)
    model = train_acoustic(spec, train, cfg.acoustic_train(), log_every=200)
    pipeline.save_acoustic_checkpoint(args.out, model)
    print(f"saved acoustic checkpoint to {args.out}")
    return 0


def _cmd_synthesize(cfg: Config, args) -> int:
    spec = cfg.toy_spec()
    transducer = pipeline.load_transducer_checkpoint(
        args.interpreter, spec, cfg.transducer_train()
    )
    acoustic = pipeline.load_acoustic_checkpoint(args.speaker, spec, cfg.acoustic_train())

    rng = np.random.default_rng(cfg.seed)
    ps_u = generate_utterance(
        spec, random_text(spec, rng, 4, 8), args.ps_rate, args.ps_pitch,
        int(rng.integers(spec.speakers)), seed=cfg.seed,
    )
    pa_rate = args.pa_rate if args.pa_rate is not None else args.ps_rate
    pa_pitch = args.pa_pitch if args.pa_pitch is not None else args.ps_pitch
    pa_u = generate_utterance(
        spec, random_text(spec, rng, 4, 8), pa_rate, pa_pitch,
        args.pa_speaker, seed=cfg.seed + 1,
    )

    result = pipeline.synthesize(
        spec, transducer, acoustic, args.text,
        ps_u.semantic, pipeline.acoustic_prompt_of(pa_u),
        cfg.decode(), cfg.max_symbols_per_frame(),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wav_path = out / f"{args.name}.wav"
    write_wav(wav_path, render_waveform(spec, result.acoustic))
    tokens_path = out / f"{args.name}.tokens.json"
    tokens_path.write_text(
        json.dumps(
            {
                "text": result.text,
                "semantic": result.semantic,
                "acoustic": result.acoustic.transpose(1, 2, 0).tolist(),
                "forward_passes": result.forward_passes,
            },
            sort_keys=True,
        )
        + "\n"
    )
    print(f"wrote {wav_path} ({len(result.semantic)} frames) and {tokens_path}")
    return 0


def _cmd_eval(cfg: Config, args) -> int:
    spec = cfg.toy_spec()
    _, evalset = _load_corpus_dir(args.corpus)
    transducer = pipeline.load_transducer_checkpoint(
        args.interpreter, spec, cfg.transducer_train()
    )
    cap = cfg.max_symbols_per_frame()
    metrics = pipeline.evaluate_intelligibility(spec, transducer, evalset, cap)
    metrics["nll"] = pipeline.evaluate_nll(spec, transducer, evalset)
    if args.speaker:
        acoustic = pipeline.load_acoustic_checkpoint(
            args.speaker, spec, cfg.acoustic_train()
        )
        metrics["speaker_accuracy"] = pipeline.evaluate_speaker_match(
            spec, acoustic, evalset, cfg.decode()
        )
        metrics.update(
            {
                f"disentangled_{k}": v
                for k, v in pipeline.evaluate_disentanglement(
                    spec, transducer, acoustic, evalset, cfg.decode(), cap
                ).items()
            }
        )
    text = json.dumps(metrics, sort_keys=True, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def _cmd_bench(cfg: Config, args) -> int:
    spec = cfg.toy_spec()
    _, evalset = _load_corpus_dir(args.corpus)
    subset = evalset[: args.utterances]
    cap = cfg.max_symbols_per_frame()
    partners = pipeline.prompt_partner(spec, subset)
    chash = config_hash(cfg.raw_text)

    reports = []
    for label, path in [("compact", args.interpreter), ("baseline", args.baseline)]:
        model = pipeline.load_transducer_checkpoint(path, spec, cfg.transducer_train())

        def decode_one(u, model=model):
            return greedy_decode(
                model, text_to_ids(spec, u.text), partners[u.uid].semantic, cap
            )

        rtf = measure_rtf(decode_one, subset, spec.frame_rate, runs=args.runs)
        nll = pipeline.evaluate_nll(spec, model, subset)
        met = pipeline.evaluate_intelligibility(spec, model, subset, cap)
        reports.append(
            BenchReport(
                variant=label, rtf=rtf, nll=nll, ter=met["ter"],
                utterances=len(subset), config_hash=chash,
            )
        )
        if args.threaded:
            rtf_mt = measure_rtf(
                decode_one, subset, spec.frame_rate, runs=args.runs, threaded=True
            )
            reports.append(
                BenchReport(
                    variant=f"{label}-threaded", rtf=rtf_mt, nll=nll,
                    utterances=len(subset), config_hash=chash,
                    extras={"threads": "TOKCASCADE_THREADS"},
                )
            )
    print(format_report_table(reports))
    if args.out:
        write_reports(reports, args.out)
    return 0


def run_command(argv: list[str]) -> int:
    """Parse argv and dispatch; returns the process exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "init-config":
            Path(args.out).write_text(default_config_text(args.seed))
            print(f"wrote default config to {args.out}")
            return 0
        cfg = load_config(args.config)
        cfg.seed  # validate early; mandatory
        handlers = {
            "corpus-gen": _cmd_corpus_gen,
            "train-interpreter": _cmd_train_interpreter,
            "train-speaker": _cmd_train_speaker,
            "synthesize": _cmd_synthesize,
            "eval": _cmd_eval,
            "bench": _cmd_bench,
        }
        return handlers[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
