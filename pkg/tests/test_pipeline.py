
import pytest

from scvd.errors import ConfigError
from scvd.models import ModelConfig
from scvd.pipeline import (
    PretrainConfig,
    PreprocessConfig,
    RunConfig,
    run_training_pipeline,
)
from scvd.training import TrainConfig


def transformer_config(dataset, out_dir) -> RunConfig:
    return RunConfig(
        dataset=str(dataset),
        out_dir=str(out_dir),
        split_seed=3,
        model=ModelConfig(
            kind="transformer_finetune", max_positions=96, head_dropout=0.1,
            seed=5, checkpoint_name=None,
        ),
        train=TrainConfig(epochs=1, batch_size=16, learning_rate=3e-4,
                          optimizer={"name": "adamw"}, seed=5),
        pretrain=PretrainConfig(preset="distilled", vocab_size=600,
                                max_positions=96, epochs=1, seed=5),
    )


def test_run_config_round_trip():
    cfg = RunConfig(
        dataset="d.csv",
        out_dir="out",
        ratios=(0.7, 0.2, 0.1),
        split_seed=5,
        preprocess=PreprocessConfig(max_vocab_size=100, min_freq=1, max_len=64),
        model=ModelConfig(kind="recurrent_baseline", seed=2),
        train=TrainConfig(epochs=2, seed=2),
        pretrain=PretrainConfig(seed=2),
    )
    again = RunConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


def test_run_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown"):
        RunConfig.from_dict({"dataset": "x", "out_dir": "y", "model": {}, "typo": 1})


def test_run_config_requires_dataset():
    with pytest.raises(ConfigError, match="dataset"):
        RunConfig.from_dict({"out_dir": "y", "model": {}})


def test_master_seed_overrides_everything():
    cfg = RunConfig(
        dataset="d", out_dir="o",
        model=ModelConfig(kind="recurrent_baseline", seed=1),
        train=TrainConfig(seed=2),
        pretrain=PretrainConfig(seed=3),
    )
    cfg.with_master_seed(42)
    assert cfg.split_seed == 42
    assert cfg.model.seed == 42
    assert cfg.train.seed == 42
    assert cfg.pretrain.seed == 42


def test_pretrained_encoder_cached_and_reused(mini_dataset, tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setenv("SCVD_CHECKPOINT_CACHE", str(cache))

    logs: list[str] = []
    cfg = transformer_config(mini_dataset, tmp_path / "run1")
    run_training_pipeline(cfg, log=logs.append)
    assert any("pretraining" in line for line in logs)
    checkpoints = list(cache.iterdir())
    assert len(checkpoints) == 1
    assert checkpoints[0].name.startswith("distilled-")

    logs.clear()
    cfg2 = transformer_config(mini_dataset, tmp_path / "run2")
    run_training_pipeline(cfg2, log=logs.append)
    assert any("reusing pretrained encoder" in line for line in logs)
    assert len(list(cache.iterdir())) == 1


def test_explicit_checkpoint_name_is_respected(mini_dataset, tmp_path):
    dest = tmp_path / "my-encoder"
    cfg = transformer_config(mini_dataset, tmp_path / "run")
    cfg.model.checkpoint_name = str(dest)
    result = run_training_pipeline(cfg)
    assert dest.is_dir()
    assert result.manifest["config"]["model"]["checkpoint_name"] == str(dest)
