"""Labeled smart-contract corpus: loading, validation and stratified splitting.

The dataset file is a UTF-8 CSV with a header row and the columns
``filename, code, label, encoded_label``. The ``code`` field is quoted and may
contain newlines. An optional leading unnamed/"index" column (pandas-style row
index) is tolerated and ignored.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateClass,
    EncodingMismatch,
    LabelError,
    MissingData,
    SchemaError,
)
from .hashutil import sha256_json

DATASET_COLUMNS = ("filename", "code", "label", "encoded_label")
PARTITIONS = ("train", "val", "test")
SPLIT_MANIFEST_VERSION = 1


class VulnerabilityLabel(Enum):
    """The four vulnerability classes with their fixed integer encodings.

    The encoding is alphabetical; the same order is used for every
    confusion-matrix axis and per-class metric table.
    """

    DD = 0  # dangerous delegatecall
    IO = 1  # integer overflow
    RE = 2  # reentrancy
    TD = 3  # timestamp dependency

    @classmethod
    def parse(cls, text: str) -> "VulnerabilityLabel":
        try:
            return cls[text]
        except KeyError:
            raise LabelError(
                f"unknown label {text!r}; expected one of "
                f"{', '.join(l.name for l in cls)}"
            ) from None


LABELS = tuple(VulnerabilityLabel)  # axis order DD, IO, RE, TD
NUM_CLASSES = len(LABELS)


@dataclass(frozen=True)
class Contract:
    """One labeled Solidity source unit."""

    filename: str
    source: str
    label: VulnerabilityLabel
    encoded_label: int = -1  # -1 means "derive from label"

    def __post_init__(self):
        if not self.source.strip():
            raise SchemaError(f"contract {self.filename!r} has empty source")
        if self.encoded_label == -1:
            object.__setattr__(self, "encoded_label", self.label.value)
        elif self.encoded_label != self.label.value:
            raise EncodingMismatch(
                f"contract {self.filename!r}: encoded_label "
                f"{self.encoded_label} != {self.label.value} ({self.label.name})"
            )


@dataclass
class Corpus:
    """Ordered collection of contracts with per-class counts."""

    contracts: list[Contract]
    class_counts: dict[VulnerabilityLabel, int] = field(init=False)

    def __post_init__(self):
        counts = {label: 0 for label in LABELS}
        for contract in self.contracts:
            counts[contract.label] += 1
        self.class_counts = counts

    def __len__(self) -> int:
        return len(self.contracts)

    def __iter__(self):
        return iter(self.contracts)

    def __getitem__(self, i: int) -> Contract:
        return self.contracts[i]

    def subset(self, indices) -> "Corpus":
        return Corpus([self.contracts[i] for i in indices])

    def labels(self) -> list[VulnerabilityLabel]:
        return [c.label for c in self.contracts]

    def sources(self) -> list[str]:
        return [c.source for c in self.contracts]


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a dataset CSV; row order is preserved."""
    path = Path(path)
    if csv.field_size_limit() < 2**24:
        csv.field_size_limit(2**24)  # real contracts can exceed csv's 128 KiB default
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingData(f"{path}: file is empty") from None

        offset = 0
        if header and header[0].strip().lower() in ("", "index"):
            offset = 1  # tolerated leading row-index column
        if tuple(h.strip() for h in header[offset:]) != DATASET_COLUMNS:
            missing = [c for c in DATASET_COLUMNS if c not in header]
            raise SchemaError(
                f"{path}: expected columns {', '.join(DATASET_COLUMNS)}; "
                f"got {', '.join(header)}"
                + (f" (missing: {', '.join(missing)})" if missing else "")
            )

        contracts = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}"
                )
            filename, code, label_text, encoded_text = row[offset:]
            if not code.strip():
                raise SchemaError(f"{path}:{line_no}: empty code field")
            try:
                label = VulnerabilityLabel.parse(label_text.strip())
            except LabelError as e:
                raise LabelError(f"{path}:{line_no}: {e}") from None
            try:
                encoded = int(encoded_text.strip())
            except ValueError:
                raise EncodingMismatch(
                    f"{path}:{line_no}: encoded_label {encoded_text!r} is not an integer"
                ) from None
            if encoded != label.value:
                raise EncodingMismatch(
                    f"{path}:{line_no}: encoded_label {encoded} != "
                    f"{label.value} ({label.name})"
                )
            contracts.append(Contract(filename, code, label, encoded))

    if not contracts:
        raise MissingData(f"{path}: no data rows")
    return Corpus(contracts)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back to the dataset CSV format (round-trips load_corpus)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(DATASET_COLUMNS)
        for c in corpus:
            writer.writerow([c.filename, c.source, c.label.name, c.encoded_label])


# -- stratified splitting ----------------------------------------------------


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass
class DatasetSplit:
    """Disjoint stratified partitions of a corpus, reproducible from a seed."""

    train: Corpus
    val: Corpus
    test: Corpus
    seed: int
    ratios: tuple[float, float, float]
    indices: dict[str, tuple[int, ...]]  # partition -> source row indices
    source_filenames: tuple[str, ...]

    def manifest(self) -> dict:
        entries = []
        for partition in PARTITIONS:
            for idx in self.indices[partition]:
                entries.append(
                    {
                        "filename": self.source_filenames[idx],
                        "row_index": idx,
                        "partition": partition,
                    }
                )
        entries.sort(key=lambda e: e["row_index"])
        return {
            "version": SPLIT_MANIFEST_VERSION,
            "seed": self.seed,
            "ratios": list(self.ratios),
            "entries": entries,
        }

    @property
    def split_hash(self) -> str:
        return sha256_json(self.manifest())

    def save_manifest(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.manifest(), f, indent=2)
            f.write("\n")


def stratified_split(
    corpus: Corpus,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Split a corpus into train/val/test preserving per-class proportions.

    Per class, the test count is round-half-up of count * test_ratio, then the
    val count likewise (capped so the class is never over-allocated); the
    remainder goes to train. Deterministic for a given (corpus, ratios, seed).

    Raises DegenerateClass if any class would end up absent from a partition
    whose ratio is nonzero.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"need three non-negative ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    train_ratio, val_ratio, test_ratio = ratios

    by_class: dict[VulnerabilityLabel, list[int]] = {label: [] for label in LABELS}
    for i, contract in enumerate(corpus):
        by_class[contract.label].append(i)

    # Allocate counts per class: test first (criterion anchor), then val.
    allocation: dict[VulnerabilityLabel, tuple[int, int, int]] = {}
    degenerate: list[str] = []
    for label in LABELS:
        n = len(by_class[label])
        n_test = min(_round_half_up(n * test_ratio), n)
        n_val = min(_round_half_up(n * val_ratio), n - n_test)
        n_train = n - n_test - n_val
        allocation[label] = (n_train, n_val, n_test)
        for partition, ratio, count in zip(
            PARTITIONS, (train_ratio, val_ratio, test_ratio), (n_train, n_val, n_test)
        ):
            if ratio > 0 and count == 0:
                degenerate.append(
                    f"{label.name} (size {n}) gets no members in {partition!r}"
                )
    if degenerate:
        raise DegenerateClass("; ".join(degenerate))

    rng = np.random.default_rng(seed)
    picked: dict[str, list[int]] = {p: [] for p in PARTITIONS}
    for label in LABELS:
        order = [by_class[label][j] for j in rng.permutation(len(by_class[label]))]
        n_train, n_val, n_test = allocation[label]
        picked["test"].extend(order[:n_test])
        picked["val"].extend(order[n_test : n_test + n_val])
        picked["train"].extend(order[n_test + n_val :])

    indices = {p: tuple(sorted(picked[p])) for p in PARTITIONS}
    return DatasetSplit(
        train=corpus.subset(indices["train"]),
        val=corpus.subset(indices["val"]),
        test=corpus.subset(indices["test"]),
        seed=seed,
        ratios=ratios,
        indices=indices,
        source_filenames=tuple(c.filename for c in corpus),
    )


def load_split_manifest(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("version") != SPLIT_MANIFEST_VERSION:
        raise SchemaError(f"{path}: unsupported split manifest version")
    return manifest


def apply_split_manifest(corpus: Corpus, manifest: dict) -> DatasetSplit:
    """Reconstruct a DatasetSplit from its manifest, verifying filenames."""
    picked: dict[str, list[int]] = {p: [] for p in PARTITIONS}
    for entry in manifest["entries"]:
        idx = entry["row_index"]
        if idx >= len(corpus) or corpus[idx].filename != entry["filename"]:
            raise SchemaError(
                f"manifest row {idx} ({entry['filename']!r}) does not match the corpus"
            )
        if entry["partition"] not in picked:
            raise SchemaError(f"manifest has unknown partition {entry['partition']!r}")
        picked[entry["partition"]].append(idx)
    if sum(len(v) for v in picked.values()) != len(corpus):
        raise SchemaError("manifest does not cover the corpus exactly")
    indices = {p: tuple(sorted(picked[p])) for p in PARTITIONS}
    return DatasetSplit(
        train=corpus.subset(indices["train"]),
        val=corpus.subset(indices["val"]),
        test=corpus.subset(indices["test"]),
        seed=manifest["seed"],
        ratios=tuple(manifest["ratios"]),
        indices=indices,
        source_filenames=tuple(c.filename for c in corpus),
    )
