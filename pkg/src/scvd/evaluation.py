"""Metrics: accuracy, per-class precision/recall/F1/support, macro/weighted
averages, confusion matrices, and report/curve files.

Axis order everywhere is DD, IO, RE, TD (the fixed label encoding). The
zero-division convention is 0 for precision/recall/F1 with an empty
denominator. Weighted-average recall equals accuracy identically.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import LABELS, NUM_CLASSES, VulnerabilityLabel
from .data import EncodedDataset
from .errors import (
    EmptyDataset,
    EmptyInput,
    LengthMismatch,
    PipelineError,
    ShapeError,
    SplitMismatch,
)
from .models import Classifier

REPORT_SCHEMA_VERSION = 1
COMPARISON_SCHEMA_VERSION = 1
CLASS_NAMES = tuple(label.name for label in LABELS)


def _encode_labels(values) -> np.ndarray:
    encoded = []
    for v in values:
        if isinstance(v, VulnerabilityLabel):
            encoded.append(v.value)
        elif isinstance(v, str):
            encoded.append(VulnerabilityLabel.parse(v).value)
        else:
            i = int(v)
            if not 0 <= i < NUM_CLASSES:
                raise ValueError(f"encoded label {i} out of range")
            encoded.append(i)
    return np.asarray(encoded, dtype=np.int64)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassMetrics":
        return cls(d["precision"], d["recall"], d["f1"], d["support"])


@dataclass
class EvaluationReport:
    accuracy: float
    per_class: dict[VulnerabilityLabel, ClassMetrics]
    macro_avg: ClassMetrics
    weighted_avg: ClassMetrics
    confusion: np.ndarray  # (4, 4) counts, rows true, columns predicted
    test_loss: float | None = None
    split_hash: str | None = None
    checkpoint_hash: str | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, EvaluationReport):
            return NotImplemented
        return (
            self.accuracy == other.accuracy
            and self.per_class == other.per_class
            and self.macro_avg == other.macro_avg
            and self.weighted_avg == other.weighted_avg
            and np.array_equal(self.confusion, other.confusion)
            and self.test_loss == other.test_loss
            and self.split_hash == other.split_hash
            and self.checkpoint_hash == other.checkpoint_hash
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "classes": list(CLASS_NAMES),
            "accuracy": self.accuracy,
            "test_loss": self.test_loss,
            "per_class": {
                label.name: self.per_class[label].to_dict() for label in LABELS
            },
            "macro_avg": self.macro_avg.to_dict(),
            "weighted_avg": self.weighted_avg.to_dict(),
            "confusion": self.confusion.tolist(),
            "split_hash": self.split_hash,
            "checkpoint_hash": self.checkpoint_hash,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationReport":
        if data.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise PipelineError("unsupported report schema version")
        return cls(
            accuracy=data["accuracy"],
            per_class={
                label: ClassMetrics.from_dict(data["per_class"][label.name])
                for label in LABELS
            },
            macro_avg=ClassMetrics.from_dict(data["macro_avg"]),
            weighted_avg=ClassMetrics.from_dict(data["weighted_avg"]),
            confusion=np.asarray(data["confusion"], dtype=np.int64),
            test_loss=data.get("test_loss"),
            split_hash=data.get("split_hash"),
            checkpoint_hash=data.get("checkpoint_hash"),
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "EvaluationReport":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def confusion(y_true, y_pred) -> np.ndarray:
    """Counts by (true, predicted) pair in DD/IO/RE/TD axis order."""
    t = _encode_labels(y_true)
    p = _encode_labels(y_pred)
    if len(t) != len(p):
        raise LengthMismatch(f"y_true has {len(t)} items, y_pred {len(p)}")
    if len(t) == 0:
        raise EmptyInput("need at least one prediction")
    matrix = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(matrix, (t, p), 1)
    return matrix


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def compute_metrics(y_true, y_pred) -> EvaluationReport:
    """Full metric surface from label lists (test_loss left unset)."""
    matrix = confusion(y_true, y_pred)
    tp = np.diag(matrix).astype(np.float64)
    support = matrix.sum(axis=1)
    predicted = matrix.sum(axis=0)
    total = int(matrix.sum())

    precision = _safe_div(tp, predicted)
    recall = _safe_div(tp, support)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    accuracy = float(tp.sum() / total)

    per_class = {
        label: ClassMetrics(
            float(precision[i]), float(recall[i]), float(f1[i]), int(support[i])
        )
        for i, label in enumerate(LABELS)
    }
    macro_avg = ClassMetrics(
        float(precision.mean()), float(recall.mean()), float(f1.mean()), total
    )
    # weighted recall is accuracy by identity: sum(recall_c * support_c) = sum(tp)
    weighted_avg = ClassMetrics(
        float((precision * support).sum() / total),
        accuracy,
        float((f1 * support).sum() / total),
        total,
    )
    return EvaluationReport(
        accuracy=accuracy,
        per_class=per_class,
        macro_avg=macro_avg,
        weighted_avg=weighted_avg,
        confusion=matrix,
    )


def evaluate(
    model: Classifier,
    test: EncodedDataset,
    batch_size: int = 64,
    checkpoint_hash: str | None = None,
) -> EvaluationReport:
    """Run inference over the test set and fill every metric field.

    test_loss is the mean categorical cross-entropy of the model's
    probabilities against the true labels.
    """
    if len(test) == 0:
        raise EmptyDataset("test dataset is empty")
    if test.encoding != model.encoding:
        raise ShapeError(
            f"test dataset encoded as {test.encoding!r} but the model expects "
            f"{model.encoding!r}"
        )
    logits = model.predict_logits(test.ids, test.lengths, batch_size).astype(np.float64)
    peak = logits.max(axis=1, keepdims=True)
    log_z = peak[:, 0] + np.log(np.exp(logits - peak).sum(axis=1))
    log_likelihood = logits[np.arange(len(test)), test.labels] - log_z
    predictions = logits.argmax(axis=1)

    report = compute_metrics(test.labels, predictions)
    report.test_loss = float(-log_likelihood.mean())
    report.split_hash = test.split_hash
    report.checkpoint_hash = checkpoint_hash
    return report


# -- report files ------------------------------------------------------------


def render_report_table(report: EvaluationReport) -> str:
    """Human-readable per-class table mirroring the standard report layout."""
    lines = []
    header = f"{'':<14}{'precision':>10}{'recall':>10}{'f1-score':>10}{'support':>10}"
    lines.append(header)
    lines.append("")
    for label in LABELS:
        m = report.per_class[label]
        lines.append(
            f"{label.name:<14}{m.precision:>10.2f}{m.recall:>10.2f}"
            f"{m.f1:>10.2f}{m.support:>10d}"
        )
    lines.append("")
    total = report.macro_avg.support
    lines.append(f"{'accuracy':<14}{'':>20}{report.accuracy:>10.2f}{total:>10d}")
    for name, m in (("macro avg", report.macro_avg), ("weighted avg", report.weighted_avg)):
        lines.append(
            f"{name:<14}{m.precision:>10.2f}{m.recall:>10.2f}{m.f1:>10.2f}{m.support:>10d}"
        )
    if report.test_loss is not None:
        lines.append("")
        lines.append(f"test loss: {report.test_loss:.4f}")
    return "\n".join(lines) + "\n"


def _write_confusion_csv(report: EvaluationReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["true\\predicted", *CLASS_NAMES])
        for i, label in enumerate(LABELS):
            writer.writerow([label.name, *report.confusion[i].tolist()])


def _write_curves_csv(run, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"])
        for r in run.history:
            writer.writerow(
                [r.epoch, f"{r.train_loss:.6f}", f"{r.train_accuracy:.6f}",
                 f"{r.val_loss:.6f}", f"{r.val_accuracy:.6f}"]
            )


def emit_report(
    report: EvaluationReport,
    run,
    dest: str | Path,
    render_plots: bool = False,
) -> dict[str, Path]:
    """Write the structured report, the human table, curve and confusion files.

    `run` is the TrainingRun whose curves belong with the report (may have an
    empty history). Plot images are optional artifacts; the data tables are
    the canonical outputs.
    """
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    report_path = dest / "report.json"
    report.save(report_path)
    written["report"] = report_path

    table_path = dest / "report.txt"
    table_path.write_text(render_report_table(report), encoding="utf-8")
    written["table"] = table_path

    curves_path = dest / "curves.csv"
    _write_curves_csv(run, curves_path)
    written["curves"] = curves_path

    confusion_path = dest / "confusion.csv"
    _write_confusion_csv(report, confusion_path)
    written["confusion"] = confusion_path

    if render_plots:
        written.update(_render_plots(report, run, dest))
    return written


def _render_plots(report: EvaluationReport, run, dest: Path) -> dict[str, Path]:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        raise PipelineError(
            "plot rendering needs matplotlib (pip install scvd[plots])"
        ) from e
    written = {}
    if run.history:
        epochs = [r.epoch for r in run.history]
        for key, series in (
            ("accuracy", ("train_accuracy", "val_accuracy")),
            ("loss", ("train_loss", "val_loss")),
        ):
            fig, ax = plt.subplots(figsize=(6, 4))
            for attr in series:
                ax.plot(epochs, [getattr(r, attr) for r in run.history], label=attr)
            ax.set_xlabel("epoch")
            ax.set_ylabel(key)
            ax.legend()
            fig.tight_layout()
            path = dest / f"{key}.png"
            fig.savefig(path)
            plt.close(fig)
            written[f"{key}_plot"] = path
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(report.confusion, cmap="Blues")
    ax.set_xticks(range(NUM_CLASSES), CLASS_NAMES)
    ax.set_yticks(range(NUM_CLASSES), CLASS_NAMES)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    for i in range(NUM_CLASSES):
        for j in range(NUM_CLASSES):
            ax.text(j, i, int(report.confusion[i, j]), ha="center", va="center")
    fig.colorbar(im)
    fig.tight_layout()
    path = dest / "confusion.png"
    fig.savefig(path)
    plt.close(fig)
    written["confusion_plot"] = path
    return written


# -- model comparison --------------------------------------------------------

_AGGREGATE_ROWS = (
    ("accuracy", lambda r: r.accuracy),
    ("test_loss", lambda r: r.test_loss),
    ("macro_f1", lambda r: r.macro_avg.f1),
    ("weighted_f1", lambda r: r.weighted_avg.f1),
)
_LOWER_IS_BETTER = {"test_loss"}


def compare(reports: list[tuple[str, EvaluationReport]]) -> dict:
    """Side-by-side table of >= 2 reports evaluated on the identical split.

    Raises SplitMismatch unless every report carries the same split hash.
    """
    if len(reports) < 2:
        raise ValueError("comparison needs at least two reports")
    names = [name for name, _ in reports]
    if len(set(names)) != len(names):
        raise ValueError("model names must be unique")
    hashes = {r.split_hash for _, r in reports}
    if None in hashes or len(hashes) != 1:
        raise SplitMismatch(
            f"reports come from different or unrecorded splits: {sorted(map(str, hashes))}"
        )

    rows = []
    for label in LABELS:
        for metric in ("precision", "recall", "f1"):
            values = {
                name: getattr(r.per_class[label], metric) for name, r in reports
            }
            rows.append(
                {
                    "row": f"{label.name} {metric}",
                    "values": values,
                    "best": _best(values, lower=False),
                }
            )
    for metric_name, getter in _AGGREGATE_ROWS:
        values = {name: getter(r) for name, r in reports}
        if any(v is None for v in values.values()):
            continue
        rows.append(
            {
                "row": metric_name,
                "values": values,
                "best": _best(values, lower=metric_name in _LOWER_IS_BETTER),
            }
        )
    supports = {label.name: reports[0][1].per_class[label].support for label in LABELS}
    return {
        "schema_version": COMPARISON_SCHEMA_VERSION,
        "split_hash": next(iter(hashes)),
        "models": names,
        "supports": supports,
        "rows": rows,
    }


def _best(values: dict[str, float], lower: bool) -> list[str]:
    target = min(values.values()) if lower else max(values.values())
    return [name for name, v in values.items() if v == target]


def render_comparison(comparison: dict) -> str:
    """Text table for a compare() result; best values are starred."""
    names = comparison["models"]
    widths = [max(len(n) + 1, 12) for n in names]
    header = f"{'metric':<16}" + "".join(
        f"{n:>{w}}" for n, w in zip(names, widths)
    )
    lines = [header, "-" * len(header)]
    for row in comparison["rows"]:
        cells = []
        for name, w in zip(names, widths):
            value = row["values"][name]
            flag = "*" if name in row["best"] else " "
            cells.append(f"{value:>{w - 1}.3f}{flag}")
        lines.append(f"{row['row']:<16}" + "".join(cells))
    supports = ", ".join(f"{k}={v}" for k, v in comparison["supports"].items())
    lines.append(f"supports: {supports} (split {comparison['split_hash'][:12]})")
    return "\n".join(lines) + "\n"
