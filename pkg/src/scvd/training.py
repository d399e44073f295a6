"""Training loop: fixed epoch budget, per-epoch curves, best-val checkpointing.

Deterministic on a fixed single-device runtime: batch shuffling and dropout
streams derive from (config seed, global epoch index), so a resumed run
reproduces the unbroken one exactly.
"""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .data import EncodedDataset, require_nonempty
from .errors import CheckpointError, ConfigError, DivergenceError, ShapeError
from .models import Classifier, load_checkpoint, read_manifest, save_checkpoint

METRICS_COLUMNS = ("epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy", "seconds")

_OPTIMIZERS = {
    "adam": torch.optim.Adam,
    "adamw": torch.optim.AdamW,
    "sgd": torch.optim.SGD,
}


@dataclass
class TrainConfig:
    """Hyperparameters for one run. The loss is categorical cross-entropy."""

    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 1e-3
    optimizer: dict = field(default_factory=lambda: {"name": "adam"})
    seed: int = 0
    early_stop: int | None = None  # patience in epochs; None disables
    class_weights: list[float] | None = None  # off by default

    def validate(self) -> "TrainConfig":
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        name = self.optimizer.get("name", "adam")
        if name not in _OPTIMIZERS:
            raise ConfigError(
                f"unknown optimizer {name!r}; choose from {sorted(_OPTIMIZERS)}"
            )
        if self.early_stop is not None and self.early_stop < 1:
            raise ConfigError(f"early_stop patience must be >= 1, got {self.early_stop}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class EpochRecord:
    epoch: int  # 1-based, global across resumes
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    seconds: float


@dataclass
class TrainingRun:
    history: list[EpochRecord]
    best_epoch: int | None  # epoch with max val_accuracy, earliest on ties
    best_checkpoint: str | None
    last_checkpoint: str | None
    stopped_early: bool = False

    @property
    def best_val_accuracy(self) -> float | None:
        if self.best_epoch is None:
            return None
        return next(r.val_accuracy for r in self.history if r.epoch == self.best_epoch)

    def to_rows(self) -> list[dict]:
        return [asdict(r) for r in self.history]


def _epoch_seed(seed: int, epoch_index: int) -> int:
    return (seed * 1_000_003 + epoch_index) % (2**31)


def _make_optimizer(cfg: TrainConfig, parameters) -> torch.optim.Optimizer:
    options = dict(cfg.optimizer)
    name = options.pop("name", "adam")
    return _OPTIMIZERS[name](parameters, lr=cfg.learning_rate, **options)


def _check_encoding(model: Classifier, dataset: EncodedDataset, what: str) -> None:
    if dataset.encoding != model.encoding:
        raise ShapeError(
            f"{what} dataset encoded as {dataset.encoding!r} but the model "
            f"expects {model.encoding!r}"
        )


def _batch_tensors(dataset: EncodedDataset, idx: np.ndarray):
    lengths = dataset.lengths[idx]
    cut = max(int(lengths.max()), 1)
    ids = torch.from_numpy(dataset.ids[idx][:, :cut].copy())
    return ids, torch.from_numpy(lengths.copy()), torch.from_numpy(dataset.labels[idx].copy())


def evaluate_loss_accuracy(
    model: Classifier, dataset: EncodedDataset, batch_size: int = 64
) -> tuple[float, float]:
    """Mean categorical cross-entropy and accuracy in inference mode."""
    model.net.eval()
    total_loss = 0.0
    correct = 0
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            idx = np.arange(start, min(start + batch_size, len(dataset)))
            ids, lengths, labels = _batch_tensors(dataset, idx)
            logits = model._forward(ids, lengths)
            total_loss += float(F.cross_entropy(logits, labels, reduction="sum"))
            correct += int((logits.argmax(dim=1) == labels).sum())
    n = len(dataset)
    return total_loss / n, correct / n


def _write_metrics_csv(path: Path, history: list[EpochRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_COLUMNS)
        for r in history:
            writer.writerow(
                [r.epoch, f"{r.train_loss:.6f}", f"{r.train_accuracy:.6f}",
                 f"{r.val_loss:.6f}", f"{r.val_accuracy:.6f}", f"{r.seconds:.3f}"]
            )


def _save_train_state(
    model_dir: Path, model: Classifier, optimizer, cfg: TrainConfig,
    history: list[EpochRecord], completed_epochs: int,
) -> None:
    save_checkpoint(model, model_dir)
    torch.save(
        {
            "optimizer": optimizer.state_dict() if optimizer is not None else None,
            "optimizer_name": cfg.optimizer.get("name", "adam"),
            "completed_epochs": completed_epochs,
            "history": [asdict(r) for r in history],
            "model_kind": model.config.kind,
        },
        model_dir / "train_state.pt",
    )


def _fit(
    model: Classifier,
    train_ds: EncodedDataset,
    val_ds: EncodedDataset,
    cfg: TrainConfig,
    run_dir: Path | None,
    start_epoch: int,
    optimizer,
    prior_history: list[EpochRecord],
    log=None,
) -> TrainingRun:
    history = list(prior_history)
    best_epoch = None
    best_acc = -1.0
    for r in history:
        if r.val_accuracy > best_acc:
            best_acc, best_epoch = r.val_accuracy, r.epoch

    weights = None
    if cfg.class_weights is not None:
        weights = torch.tensor(cfg.class_weights, dtype=torch.float32)

    best_dir = last_dir = None
    if run_dir is not None:
        run_dir = Path(run_dir)
        (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
        best_dir = run_dir / "checkpoints" / "best"
        last_dir = run_dir / "checkpoints" / "last"

    n = len(train_ds)
    stopped_early = False
    for epoch_index in range(start_epoch, start_epoch + cfg.epochs):
        epoch_start = time.monotonic()
        seed = _epoch_seed(cfg.seed, epoch_index)
        torch.manual_seed(seed)
        order = np.random.default_rng(seed).permutation(n)

        model.net.train()
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            ids, lengths, labels = _batch_tensors(train_ds, idx)
            optimizer.zero_grad()
            logits = model._forward(ids, lengths)
            loss = F.cross_entropy(logits, labels, weight=weights)
            if not torch.isfinite(loss):
                run = TrainingRun(history, best_epoch,
                                  str(best_dir) if best_epoch and best_dir else None,
                                  str(last_dir) if last_dir else None)
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch_index + 1}",
                    run=run, abort_epoch=epoch_index + 1,
                )
            loss.backward()
            optimizer.step()
            loss_sum += float(loss.detach()) * len(idx)
            correct += int((logits.argmax(dim=1) == labels).sum())

        val_loss, val_acc = evaluate_loss_accuracy(model, val_ds, max(cfg.batch_size, 64))
        record = EpochRecord(
            epoch=epoch_index + 1,
            train_loss=loss_sum / n,
            train_accuracy=correct / n,
            val_loss=val_loss,
            val_accuracy=val_acc,
            seconds=time.monotonic() - epoch_start,
        )
        if not (np.isfinite(val_loss) and np.isfinite(record.train_loss)):
            run = TrainingRun(history, best_epoch, None, None)
            raise DivergenceError(
                f"non-finite loss at epoch {epoch_index + 1}",
                run=run, abort_epoch=epoch_index + 1,
            )
        history.append(record)
        if log:
            log(
                f"epoch {record.epoch}: train_loss {record.train_loss:.4f} "
                f"train_acc {record.train_accuracy:.4f} val_loss {val_loss:.4f} "
                f"val_acc {val_acc:.4f} ({record.seconds:.1f}s)"
            )

        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = record.epoch
            if best_dir is not None:
                save_checkpoint(model, best_dir)
        if run_dir is not None:
            _write_metrics_csv(run_dir / "metrics.csv", history)
        if cfg.early_stop is not None and best_epoch is not None:
            if record.epoch - best_epoch >= cfg.early_stop:
                stopped_early = True
                break

    if last_dir is not None:
        _save_train_state(last_dir, model, optimizer, cfg, history,
                          start_epoch + cfg.epochs if not stopped_early
                          else history[-1].epoch)
        if run_dir is not None:
            _write_metrics_csv(run_dir / "metrics.csv", history)
    return TrainingRun(
        history=history,
        best_epoch=best_epoch,
        best_checkpoint=str(best_dir) if best_epoch is not None and best_dir is not None else None,
        last_checkpoint=str(last_dir) if last_dir is not None else None,
        stopped_early=stopped_early,
    )


def train(
    model: Classifier,
    train_ds: EncodedDataset,
    val_ds: EncodedDataset,
    cfg: TrainConfig,
    run_dir: str | Path | None = None,
    log=None,
) -> TrainingRun:
    """Train for cfg.epochs, recording curves and checkpointing the best epoch.

    The model is updated in place; the best-validation-accuracy checkpoint and
    the final state land under run_dir/checkpoints when run_dir is given.
    """
    cfg.validate()
    if cfg.epochs > 0:
        require_nonempty(train_ds, "train")
        require_nonempty(val_ds, "val")
        _check_encoding(model, train_ds, "train")
        _check_encoding(model, val_ds, "val")
    optimizer = _make_optimizer(cfg, model.net.parameters())
    return _fit(model, train_ds, val_ds, cfg, run_dir,
                start_epoch=0, optimizer=optimizer, prior_history=[], log=log)


def resume(
    checkpoint: str | Path,
    train_ds: EncodedDataset,
    val_ds: EncodedDataset,
    cfg: TrainConfig,
    run_dir: str | Path | None = None,
    log=None,
) -> tuple[Classifier, TrainingRun]:
    """Continue training from a saved state for cfg.epochs more epochs.

    `checkpoint` is a run directory or its checkpoints/last subdirectory.
    Epoch numbering continues; on an identical runtime the resumed run
    reproduces the unbroken one.
    """
    cfg.validate()
    path = Path(checkpoint)
    if (path / "checkpoints" / "last").is_dir():
        path = path / "checkpoints" / "last"
    manifest = read_manifest(path)
    state_path = path / "train_state.pt"
    if not state_path.is_file():
        raise CheckpointError(f"{path}: no training state; cannot resume")
    state = torch.load(state_path, map_location="cpu", weights_only=True)
    if state.get("model_kind") != manifest.get("kind"):
        raise CheckpointError(
            f"{path}: training state is for {state.get('model_kind')!r} but the "
            f"checkpoint is {manifest.get('kind')!r}"
        )
    model = load_checkpoint(path)
    require_nonempty(train_ds, "train")
    require_nonempty(val_ds, "val")
    _check_encoding(model, train_ds, "train")
    _check_encoding(model, val_ds, "val")

    optimizer = _make_optimizer(cfg, model.net.parameters())
    if state["optimizer"] is not None:
        if cfg.optimizer.get("name", "adam") != state.get("optimizer_name"):
            raise CheckpointError(
                f"{path}: saved optimizer is {state.get('optimizer_name')!r}, "
                f"config says {cfg.optimizer.get('name', 'adam')!r}"
            )
        try:
            optimizer.load_state_dict(state["optimizer"])
        except (ValueError, KeyError, RuntimeError) as e:
            raise CheckpointError(f"{path}: optimizer state does not fit ({e})") from None

    prior = [EpochRecord(**row) for row in state["history"]]
    run = _fit(model, train_ds, val_ds, cfg, run_dir,
               start_epoch=state["completed_epochs"], optimizer=optimizer,
               prior_history=prior, log=log)
    return model, run
