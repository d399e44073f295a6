"""Command-line entry point: ingest, split, train, evaluate, scan, compare,
and synth (bundled fixture generator).

Exit codes: 0 ok, 2 input error, 3 comparison mismatch, 4 training failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    LABELS,
    apply_split_manifest,
    load_corpus,
    load_split_manifest,
    stratified_split,
)
from .data import encode_with_subword, encode_with_vocab
from .errors import (
    CheckpointError,
    ConfigError,
    DegenerateClass,
    EncodingMismatch,
    LabelError,
    MissingData,
    PipelineError,
    SchemaError,
    SplitMismatch,
    VocabMismatch,
)
from .evaluation import (
    EvaluationReport,
    compare,
    emit_report,
    evaluate,
    render_comparison,
    render_report_table,
)
from .models import RECURRENT_BASELINE, load_checkpoint, read_manifest
from .pipeline import RunConfig, StageFailure, run_training_pipeline
from .preprocess import encode_sequence, preprocess_source
from .synthetic import provenance_path, write_dataset
from .training import TrainingRun

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SPLIT_MISMATCH = 3
EXIT_TRAINING = 4

CLI_SCHEMA_VERSION = 1  # structured-output payloads are versioned

_INPUT_ERRORS = (
    MissingData,
    SchemaError,
    LabelError,
    EncodingMismatch,
    DegenerateClass,
    ConfigError,
    CheckpointError,
    VocabMismatch,
    FileNotFoundError,
    NotADirectoryError,
    IsADirectoryError,
    json.JSONDecodeError,
    ValueError,
)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _emit(payload: dict, human_text: str, fmt: str) -> None:
    if fmt == "structured":
        print(json.dumps(payload, indent=2))
    else:
        print(human_text, end="" if human_text.endswith("\n") else "\n")


def _counts_summary(corpus) -> dict:
    return {label.name: corpus.class_counts[label] for label in LABELS}


# -- subcommands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    try:
        corpus = load_corpus(args.dataset)
    except _INPUT_ERRORS as e:
        return _fail(str(e), EXIT_INPUT)
    counts = _counts_summary(corpus)
    summary = {
        "schema_version": CLI_SCHEMA_VERSION,
        "dataset": str(args.dataset),
        "total": len(corpus),
        "class_counts": counts,
    }
    sidecar = provenance_path(args.dataset)
    if sidecar.is_file():
        with open(sidecar, encoding="utf-8") as f:
            provenance = json.load(f)
        if provenance.get("synthetic"):
            summary["synthetic"] = True
            summary["generator_seed"] = provenance.get("seed")
    lines = [f"dataset: {args.dataset}", f"contracts: {len(corpus)}"]
    lines += [f"  {name}: {count}" for name, count in counts.items()]
    if summary.get("synthetic"):
        lines.append("provenance: SYNTHETIC fixture (not the upstream dataset)")
    _emit(summary, "\n".join(lines), args.format)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "ingest_summary.json", "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2)
            f.write("\n")
    return EXIT_OK


def cmd_split(args) -> int:
    try:
        corpus = load_corpus(args.dataset)
        ratios = tuple(float(r) for r in args.ratios.split(","))
        split = stratified_split(corpus, ratios, args.seed)
    except _INPUT_ERRORS as e:
        return _fail(str(e), EXIT_INPUT)
    out = Path(args.out)
    split.save_manifest(out / "split.json")
    summary = {
        "schema_version": CLI_SCHEMA_VERSION,
        "split_hash": split.split_hash,
        "seed": split.seed,
        "ratios": list(split.ratios),
        "sizes": {p: len(getattr(split, p)) for p in ("train", "val", "test")},
        "test_supports": _counts_summary(split.test),
        "manifest": str(out / "split.json"),
    }
    lines = [
        f"split hash: {split.split_hash}",
        f"train/val/test: {len(split.train)}/{len(split.val)}/{len(split.test)}",
        "test supports: "
        + ", ".join(f"{k}={v}" for k, v in summary["test_supports"].items()),
        f"manifest: {out / 'split.json'}",
    ]
    _emit(summary, "\n".join(lines), args.format)
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        cfg = RunConfig.from_json_file(args.config)
    except _INPUT_ERRORS as e:
        return _fail(str(e), EXIT_INPUT)
    if args.seed is not None:
        cfg.with_master_seed(args.seed)
    if args.out:
        cfg.out_dir = args.out
    log = None if args.format == "structured" else print
    try:
        result = run_training_pipeline(cfg, log=log)
        if args.plots:
            emit_report(result.report, result.training_run, result.run_dir,
                        render_plots=True)
    except StageFailure as e:
        code = EXIT_INPUT if isinstance(e.cause, _INPUT_ERRORS) else EXIT_TRAINING
        return _fail(str(e), code)
    payload = {
        "schema_version": CLI_SCHEMA_VERSION,
        "run_dir": str(result.run_dir),
        "split_hash": result.manifest["split_hash"],
        "best_epoch": result.training_run.best_epoch,
        "epochs_run": len(result.training_run.history),
        "test_accuracy": result.report.accuracy,
        "test_loss": result.report.test_loss,
    }
    human = (
        f"run directory: {result.run_dir}\n"
        + render_report_table(result.report)
    )
    _emit(payload, human, args.format)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        model = load_checkpoint(args.checkpoint)
        corpus = load_corpus(args.dataset)
        manifest = load_split_manifest(args.split)
        split = apply_split_manifest(corpus, manifest)
        if model.config.kind == RECURRENT_BASELINE:
            if model.vocab is None:
                raise CheckpointError(
                    f"{args.checkpoint}: checkpoint carries no vocabulary"
                )
            test_enc = encode_with_vocab(
                split.test, model.vocab, args.max_len, split.split_hash
            )
        else:
            test_enc = encode_with_subword(
                split.test, model.tokenizer, model.effective_max_positions,
                split.split_hash,
            )
        checkpoint_hash = read_manifest(args.checkpoint)["content_hash"]
        report = evaluate(model, test_enc, checkpoint_hash=checkpoint_hash)
    except _INPUT_ERRORS as e:
        return _fail(str(e), EXIT_INPUT)
    if args.out:
        emit_report(report, TrainingRun([], None, None, None), args.out,
                    render_plots=args.plots)
    _emit(report.to_dict(), render_report_table(report), args.format)
    return EXIT_OK


def _collect_scan_paths(paths: list[str]) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            files.extend(sorted(p.rglob("*.sol")))
        else:
            files.append(p)
    return sorted(set(files))


def cmd_scan(args) -> int:
    try:
        model = load_checkpoint(args.checkpoint)
        if model.config.kind == RECURRENT_BASELINE and model.vocab is None:
            raise CheckpointError(
                f"{args.checkpoint}: checkpoint carries no vocabulary; cannot scan"
            )
    except _INPUT_ERRORS as e:
        return _fail(str(e), EXIT_INPUT)

    files = _collect_scan_paths(args.paths)
    if not files:
        return _fail("no files to scan", EXIT_INPUT)

    readable: list[tuple[Path, str]] = []
    failures: list[dict] = []
    for path in files:
        try:
            source = path.read_text(encoding="utf-8")
        except OSError as e:
            failures.append({"file": str(path), "error": str(e)})
            continue
        if not source.strip():
            failures.append({"file": str(path), "error": "empty file"})
            continue
        readable.append((path, source))

    predictions = []
    if readable:
        if model.config.kind == RECURRENT_BASELINE:
            sequences = [
                preprocess_source(source, str(path)) for path, source in readable
            ]
            width = min(max(len(s) for s in sequences) or 1, args.max_len)
            encoded = [encode_sequence(s, model.vocab, max(width, 1)) for s in sequences]
            ids = np.asarray([e.ids for e in encoded], dtype=np.int64)
            lengths = np.asarray([e.true_length for e in encoded], dtype=np.int64)
        else:
            limit = model.effective_max_positions
            rows = [model.tokenizer.encode(source, limit) for _, source in readable]
            ids = np.asarray([r[0] for r in rows], dtype=np.int64)
            lengths = np.asarray([r[1] for r in rows], dtype=np.int64)
        probabilities = model.predict_proba(ids, lengths)
        for (path, _), probs in zip(readable, probabilities):
            best = int(probs.argmax())
            predictions.append(
                {
                    "file": str(path),
                    "label": LABELS[best].name,
                    "probabilities": {
                        label.name: float(p) for label, p in zip(LABELS, probs)
                    },
                    # plumbing, not from the reference results: flag weak calls
                    "low_confidence": bool(probs[best] < args.threshold),
                }
            )

    payload = {
        "schema_version": CLI_SCHEMA_VERSION,
        "predictions": predictions,
        "failures": failures,
    }
    lines = []
    for p in predictions:
        probs = " ".join(f"{k}={v:.4f}" for k, v in p["probabilities"].items())
        flag = "  (low confidence)" if p["low_confidence"] else ""
        lines.append(f"{p['file']}: {p['label']}  [{probs}]{flag}")
    for f_ in failures:
        lines.append(f"{f_['file']}: ERROR {f_['error']}")
    _emit(payload, "\n".join(lines), args.format)
    return EXIT_OK if not failures else EXIT_INPUT


def cmd_compare(args) -> int:
    named: list[tuple[str, EvaluationReport]] = []
    try:
        if len(args.run_dirs) < 2:
            raise ValueError("comparison needs at least two run directories")
        for raw in args.run_dirs:
            run_dir = Path(raw)
            report_path = run_dir / "report.json"
            if not report_path.is_file():
                raise FileNotFoundError(f"{run_dir}: no report.json")
            name = run_dir.name
            if any(n == name for n, _ in named):
                name = str(run_dir)
            named.append((name, EvaluationReport.load(report_path)))
        comparison = compare(named)
    except SplitMismatch as e:
        return _fail(str(e), EXIT_SPLIT_MISMATCH)
    except _INPUT_ERRORS as e:
        return _fail(str(e), EXIT_INPUT)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            json.dump(comparison, f, indent=2)
            f.write("\n")
    _emit(comparison, render_comparison(comparison), args.format)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        corpus = write_dataset(args.out, seed=args.seed)
    except OSError as e:
        return _fail(str(e), EXIT_INPUT)
    summary = {
        "schema_version": CLI_SCHEMA_VERSION,
        "dataset": str(args.out),
        "synthetic": True,
        "seed": args.seed,
        "total": len(corpus),
        "class_counts": _counts_summary(corpus),
    }
    lines = [
        f"wrote SYNTHETIC dataset to {args.out} (seed {args.seed})",
        f"contracts: {len(corpus)}",
    ] + [f"  {k}: {v}" for k, v in summary["class_counts"].items()]
    _emit(summary, "\n".join(lines), args.format)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scvd",
        description="Smart-contract vulnerability classification pipeline",
    )
    parser.add_argument("--version", action="version", version=f"scvd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_format(p):
        p.add_argument(
            "--format", choices=("human", "structured"), default="human",
            help="output mode: human text or stable JSON",
        )

    p = sub.add_parser("ingest", help="load and validate a dataset, print class counts")
    p.add_argument("dataset")
    p.add_argument("--out", help="directory for the validation summary")
    add_format(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="write a reproducible stratified split manifest")
    p.add_argument("dataset")
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--out", required=True)
    add_format(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="run split/preprocess/train/evaluate from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override every seed in the config")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--plots", action="store_true", help="also render plot images")
    add_format(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a split's test partition")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", required=True, help="split manifest JSON")
    p.add_argument("--out", help="directory for report files")
    p.add_argument("--max-len", type=int, default=512)
    p.add_argument("--plots", action="store_true", help="also render plot images")
    add_format(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("scan", help="classify Solidity files with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("paths", nargs="+", help="contract files or directories")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="max-probability below this marks low confidence")
    p.add_argument("--max-len", type=int, default=512)
    add_format(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("compare", help="compare reports from runs on the identical split")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", help="file for the comparison JSON")
    add_format(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="write the bundled synthetic fixture dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    add_format(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as e:
        return _fail(str(e), EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
