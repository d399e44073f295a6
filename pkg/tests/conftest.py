import json
from pathlib import Path

import pytest

from scvd.synthetic import write_dataset


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory) -> Path:
    """A small synthetic dataset shared by CLI tests (250 contracts)."""
    from scvd.corpus import VulnerabilityLabel as L

    path = tmp_path_factory.mktemp("data") / "mini.csv"
    counts = {L.RE: 120, L.IO: 60, L.TD: 40, L.DD: 30}
    write_dataset(path, seed=1, counts=counts)
    return path


@pytest.fixture(scope="session")
def tiny_train_config(mini_dataset, tmp_path_factory) -> Path:
    """A quick recurrent-baseline run config against the mini dataset."""
    out = tmp_path_factory.mktemp("cfg")
    config = {
        "dataset": str(mini_dataset),
        "out_dir": str(out / "run"),
        "split": {"ratios": [0.8, 0.1, 0.1], "seed": 3},
        "preprocess": {"max_vocab_size": 5000, "min_freq": 1, "max_len": 192},
        "model": {
            "kind": "recurrent_baseline",
            "embed_dim": 32,
            "conv_filters": 16,
            "conv_kernel": 3,
            "recurrent_units": 16,
            "attention_dim": 16,
            "dropout": 0.1,
            "seed": 5,
        },
        "train": {
            "epochs": 3,
            "batch_size": 16,
            "learning_rate": 0.002,
            "optimizer": {"name": "adam"},
            "seed": 5,
        },
    }
    path = out / "config.json"
    path.write_text(json.dumps(config, indent=2))
    return path
