"""End-to-end run orchestration: split, preprocess, build, train, evaluate,
report. Shared by the CLI and the acceptance suite so both exercise the same
code path."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .corpus import DatasetSplit, load_corpus, stratified_split
from .data import encode_with_subword, encode_with_vocab
from .errors import CheckpointError, ConfigError, PipelineError
from .evaluation import EvaluationReport, emit_report, evaluate
from .hashutil import sha256_file, sha256_json
from .models import (
    RECURRENT_BASELINE,
    Classifier,
    ModelConfig,
    build_recurrent_classifier,
    build_transformer_classifier,
    initialize_encoder,
    load_checkpoint,
    pretrain_encoder,
    read_manifest,
    save_encoder_checkpoint,
)
from .preprocess import build_vocab, preprocess_source
from .subword import train_subword_tokenizer
from .training import TrainConfig, TrainingRun, train

RUN_MANIFEST_VERSION = 1


class StageFailure(PipelineError):
    """Wraps an exception with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PreprocessConfig:
    max_vocab_size: int = 20000
    min_freq: int = 2
    max_len: int = 512

    def to_dict(self) -> dict:
        return {"max_vocab_size": self.max_vocab_size, "min_freq": self.min_freq,
                "max_len": self.max_len}


@dataclass
class PretrainConfig:
    """How to create a local pretrained encoder when none exists yet."""

    preset: str = "distilled"
    vocab_size: int = 3000
    max_positions: int = 192
    epochs: int = 3
    batch_size: int = 32
    learning_rate: float = 3e-4
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "preset": self.preset, "vocab_size": self.vocab_size,
            "max_positions": self.max_positions, "epochs": self.epochs,
            "batch_size": self.batch_size, "learning_rate": self.learning_rate,
            "seed": self.seed,
        }


@dataclass
class RunConfig:
    """Everything a training run needs; fully determines the run."""

    dataset: str
    out_dir: str
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    split_seed: int = 13
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    model: ModelConfig = field(
        default_factory=lambda: ModelConfig(kind=RECURRENT_BASELINE)
    )
    train: TrainConfig = field(default_factory=TrainConfig)
    pretrain: PretrainConfig | None = None

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "out_dir": self.out_dir,
            "split": {"ratios": list(self.ratios), "seed": self.split_seed},
            "preprocess": self.preprocess.to_dict(),
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "pretrain": self.pretrain.to_dict() if self.pretrain else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {"dataset", "out_dir", "split", "preprocess", "model", "train", "pretrain"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key in ("dataset", "out_dir", "model"):
            if key not in data:
                raise ConfigError(f"config is missing required key {key!r}")
        split = data.get("split", {})
        try:
            return cls(
                dataset=data["dataset"],
                out_dir=data["out_dir"],
                ratios=tuple(split.get("ratios", (0.8, 0.1, 0.1))),
                split_seed=int(split.get("seed", 13)),
                preprocess=PreprocessConfig(**data.get("preprocess", {})),
                model=ModelConfig.from_dict(data["model"]),
                train=TrainConfig.from_dict(data.get("train", {})),
                pretrain=(
                    PretrainConfig(**data["pretrain"])
                    if data.get("pretrain") is not None
                    else None
                ),
            )
        except TypeError as e:
            raise ConfigError(f"bad config: {e}") from None

    @classmethod
    def from_json_file(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def with_master_seed(self, seed: int) -> "RunConfig":
        """Override every seed in the config (split, model, train, pretrain)."""
        self.split_seed = seed
        self.model.seed = seed
        self.train.seed = seed
        if self.pretrain is not None:
            self.pretrain.seed = seed
        return self


@dataclass
class PipelineResult:
    run_dir: Path
    report: EvaluationReport
    training_run: TrainingRun
    split: DatasetSplit
    classifier: Classifier
    manifest: dict


def _resolve_pretrained_checkpoint(cfg: RunConfig, split, out_dir: Path, log) -> str:
    name = cfg.model.checkpoint_name
    if name and Path(name).is_dir():
        return name
    if cfg.pretrain is None:
        raise CheckpointError(
            f"encoder checkpoint {name!r} not found and no pretrain settings given"
        )
    p = cfg.pretrain
    if name:
        dest = Path(name)
    else:
        # cache key covers everything the pretrained weights depend on
        key = sha256_json(
            {
                "dataset": sha256_file(cfg.dataset),
                "ratios": list(cfg.ratios),
                "split_seed": cfg.split_seed,
                "pretrain": p.to_dict(),
            }
        )[:12]
        cache = os.environ.get("SCVD_CHECKPOINT_CACHE")
        base = Path(cache) if cache else out_dir / "pretrained"
        dest = base / f"{p.preset}-{key}"
    if dest.is_dir():
        if log:
            log(f"reusing pretrained encoder at {dest}")
        return str(dest)
    if log:
        log(f"pretraining a {p.preset!r} encoder into {dest}")
    sources = [c.source for c in split.train]
    tokenizer = train_subword_tokenizer(sources, p.vocab_size)
    encoder = initialize_encoder(
        tokenizer, p.preset, max_positions=p.max_positions, seed=p.seed
    )
    encoded = encode_with_subword(split.train, tokenizer, p.max_positions)
    losses = pretrain_encoder(
        encoder, tokenizer, encoded.ids, encoded.lengths,
        epochs=p.epochs, batch_size=p.batch_size,
        learning_rate=p.learning_rate, seed=p.seed, log=log,
    )
    save_encoder_checkpoint(
        encoder, tokenizer, dest,
        extra_manifest={"pretrain": p.to_dict(), "mlm_losses": losses},
    )
    return str(dest)


def run_training_pipeline(cfg: RunConfig, log=None) -> PipelineResult:
    """Execute a full run; raises StageFailure naming the failing stage."""
    started = time.monotonic()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    stage = "load"
    try:
        with open(out_dir / "config.json", "w", encoding="utf-8") as f:
            json.dump(cfg.to_dict(), f, indent=2)
            f.write("\n")
        corpus = load_corpus(cfg.dataset)
        if log:
            log(f"loaded {len(corpus)} contracts from {cfg.dataset}")

        stage = "split"
        split = stratified_split(corpus, cfg.ratios, cfg.split_seed)
        split.save_manifest(out_dir / "split.json")
        split_hash = split.split_hash

        stage = "model"
        if cfg.model.kind == RECURRENT_BASELINE:
            sequences = [
                preprocess_source(c.source, c.filename) for c in split.train
            ]
            vocab = build_vocab(
                sequences, cfg.preprocess.max_vocab_size, cfg.preprocess.min_freq
            )
            cfg.model.vocab_size = len(vocab)
            classifier = build_recurrent_classifier(cfg.model, vocab)
        else:
            cfg.model.checkpoint_name = _resolve_pretrained_checkpoint(
                cfg, split, out_dir, log
            )
            classifier = build_transformer_classifier(cfg.model)
        if log:
            log(f"built {cfg.model.kind} with {classifier.parameter_count} parameters")

        stage = "encode"
        if cfg.model.kind == RECURRENT_BASELINE:
            encode = lambda part: encode_with_vocab(
                part, classifier.vocab, cfg.preprocess.max_len, split_hash
            )
        else:
            encode = lambda part: encode_with_subword(
                part, classifier.tokenizer, classifier.effective_max_positions,
                split_hash,
            )
        train_enc = encode(split.train)
        val_enc = encode(split.val)
        test_enc = encode(split.test)

        stage = "train"
        run = train(classifier, train_enc, val_enc, cfg.train, run_dir=out_dir, log=log)

        stage = "evaluate"
        if run.best_checkpoint:
            eval_model = load_checkpoint(run.best_checkpoint)
            checkpoint_hash = read_manifest(run.best_checkpoint)["content_hash"]
        elif run.last_checkpoint:
            eval_model = load_checkpoint(run.last_checkpoint)
            checkpoint_hash = read_manifest(run.last_checkpoint)["content_hash"]
        else:
            eval_model = classifier
            checkpoint_hash = None
        report = evaluate(eval_model, test_enc, checkpoint_hash=checkpoint_hash)
        if log:
            log(
                f"test accuracy {report.accuracy:.4f}, test loss "
                f"{report.test_loss:.4f}"
            )

        stage = "report"
        emit_report(report, run, out_dir)
        manifest = {
            "version": RUN_MANIFEST_VERSION,
            "package_version": __version__,
            "config": cfg.to_dict(),
            "config_hash": sha256_json(cfg.to_dict()),
            "dataset_hash": sha256_file(cfg.dataset),
            "split_hash": split_hash,
            "parameter_count": classifier.parameter_count,
            "checkpoint_hash": checkpoint_hash,
            "best_epoch": run.best_epoch,
            "epochs_run": len(run.history),
            "wall_clock_seconds": round(time.monotonic() - started, 3),
        }
        with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2)
            f.write("\n")
    except StageFailure:
        raise
    except Exception as e:
        raise StageFailure(stage, e) from e

    return PipelineResult(
        run_dir=out_dir,
        report=report,
        training_run=run,
        split=split,
        classifier=classifier,
        manifest=manifest,
    )
