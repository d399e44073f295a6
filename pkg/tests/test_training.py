import copy

import numpy as np
import pytest
import torch

from scvd.data import LEXER_VOCAB, SUBWORD, EncodedDataset
from scvd.errors import (
    CheckpointError,
    ConfigError,
    DivergenceError,
    EmptyDataset,
    ShapeError,
)
from scvd.models import ModelConfig, build_recurrent_classifier
from scvd.training import TrainConfig, resume, train

VOCAB = 24


def model_config(seed=0):
    return ModelConfig(
        kind="recurrent_baseline",
        seed=seed,
        vocab_size=VOCAB,
        embed_dim=12,
        conv_filters=8,
        conv_kernel=3,
        recurrent_units=8,
        attention_dim=8,
        dropout=0.1,
    )


def learnable_dataset(n=40, length=14, seed=0):
    """Class c is marked by token 2+c appearing in the first three positions."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 4, n).astype(np.int64)
    ids = rng.integers(6, VOCAB, (n, length)).astype(np.int64)
    ids[:, :3] = (2 + labels)[:, None]
    lengths = np.full(n, length, dtype=np.int64)
    return EncodedDataset(ids=ids, lengths=lengths, labels=labels, encoding=LEXER_VOCAB)


def test_history_length_and_epoch_numbering(tmp_path):
    model = build_recurrent_classifier(model_config())
    ds = learnable_dataset()
    run = train(model, ds, ds, TrainConfig(epochs=3, batch_size=8, seed=1), tmp_path)
    assert [r.epoch for r in run.history] == [1, 2, 3]
    assert run.best_epoch is not None
    metrics = (tmp_path / "metrics.csv").read_text().strip().splitlines()
    assert len(metrics) == 4  # header + 3 epochs


def test_zero_epochs_leaves_model_unchanged(tmp_path):
    model = build_recurrent_classifier(model_config())
    before = copy.deepcopy(model.net.state_dict())
    ds = learnable_dataset()
    run = train(model, ds, ds, TrainConfig(epochs=0), tmp_path)
    assert run.history == []
    assert run.best_epoch is None
    after = model.net.state_dict()
    assert all(torch.equal(before[k], after[k]) for k in before)
    # a loadable final state still exists for evaluating the untrained model
    assert run.last_checkpoint is not None


def test_best_epoch_maximizes_val_accuracy(tmp_path):
    model = build_recurrent_classifier(model_config())
    ds = learnable_dataset()
    run = train(model, ds, ds, TrainConfig(epochs=5, batch_size=8, seed=2), tmp_path)
    best = next(r for r in run.history if r.epoch == run.best_epoch)
    assert all(r.val_accuracy <= best.val_accuracy for r in run.history)
    # earliest epoch wins ties
    first_at_best = min(
        r.epoch for r in run.history if r.val_accuracy == best.val_accuracy
    )
    assert run.best_epoch == first_at_best


def test_training_is_deterministic(tmp_path):
    histories = []
    for attempt in range(2):
        model = build_recurrent_classifier(model_config(seed=3))
        ds = learnable_dataset(seed=4)
        run = train(
            model, ds, ds, TrainConfig(epochs=3, batch_size=8, seed=5),
            tmp_path / str(attempt),
        )
        histories.append([(r.train_loss, r.val_loss, r.val_accuracy) for r in run.history])
    assert histories[0] == histories[1]


def test_loss_decreases_on_learnable_data(tmp_path):
    model = build_recurrent_classifier(model_config())
    ds = learnable_dataset(n=64)
    run = train(model, ds, ds, TrainConfig(epochs=6, batch_size=8, seed=0), tmp_path)
    assert run.history[-1].train_loss < run.history[0].train_loss


def test_empty_dataset_rejected():
    model = build_recurrent_classifier(model_config())
    ds = learnable_dataset()
    empty = ds.subset([])
    with pytest.raises(EmptyDataset):
        train(model, empty, ds, TrainConfig(epochs=1))
    with pytest.raises(EmptyDataset):
        train(model, ds, empty, TrainConfig(epochs=1))


def test_encoding_mismatch_rejected():
    model = build_recurrent_classifier(model_config())
    ds = learnable_dataset()
    wrong = EncodedDataset(
        ids=ds.ids, lengths=ds.lengths, labels=ds.labels, encoding=SUBWORD
    )
    with pytest.raises(ShapeError):
        train(model, wrong, wrong, TrainConfig(epochs=1))


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=-1).validate()
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(optimizer={"name": "lion"}).validate()


def test_divergence_raises_with_partial_history(tmp_path):
    model = build_recurrent_classifier(model_config())
    ds = learnable_dataset()
    cfg = TrainConfig(
        epochs=6, batch_size=8, learning_rate=1e18,
        optimizer={"name": "sgd"}, seed=0,
    )
    with pytest.raises(DivergenceError) as info:
        train(model, ds, ds, cfg, tmp_path)
    assert info.value.abort_epoch is not None
    assert info.value.run is not None
    assert len(info.value.run.history) < 6


def test_all_ones_class_weights_match_unweighted(tmp_path):
    runs = []
    for weights in (None, [1.0, 1.0, 1.0, 1.0]):
        model = build_recurrent_classifier(model_config(seed=6))
        ds = learnable_dataset(seed=7)
        cfg = TrainConfig(epochs=2, batch_size=8, seed=8, class_weights=weights)
        run = train(model, ds, ds, cfg, tmp_path / str(weights))
        runs.append([(r.train_loss, r.val_loss) for r in run.history])
    assert runs[0] == pytest.approx(runs[1])


def test_early_stop_patience(tmp_path):
    model = build_recurrent_classifier(model_config())
    ds = learnable_dataset(n=64)
    cfg = TrainConfig(epochs=40, batch_size=8, seed=1, early_stop=2)
    run = train(model, ds, ds, cfg, tmp_path)
    if run.stopped_early:
        assert len(run.history) < 40
        assert run.history[-1].epoch - run.best_epoch >= 2


def test_resume_continues_epoch_numbering(tmp_path):
    model = build_recurrent_classifier(model_config(seed=11))
    ds = learnable_dataset(seed=12)
    train(model, ds, ds, TrainConfig(epochs=5, batch_size=8, seed=13), tmp_path / "a")
    _, resumed = resume(
        tmp_path / "a", ds, ds, TrainConfig(epochs=5, batch_size=8, seed=13),
        tmp_path / "a",
    )
    assert [r.epoch for r in resumed.history] == list(range(1, 11))


def test_resume_reproduces_unbroken_run(tmp_path):
    cfg = dict(batch_size=8, seed=21)
    ds = learnable_dataset(seed=20)

    unbroken_model = build_recurrent_classifier(model_config(seed=19))
    unbroken = train(
        unbroken_model, ds, ds, TrainConfig(epochs=10, **cfg), tmp_path / "full"
    )

    split_model = build_recurrent_classifier(model_config(seed=19))
    train(split_model, ds, ds, TrainConfig(epochs=5, **cfg), tmp_path / "half")
    _, resumed = resume(
        tmp_path / "half", ds, ds, TrainConfig(epochs=5, **cfg), tmp_path / "half"
    )

    assert abs(resumed.history[-1].val_accuracy - unbroken.history[-1].val_accuracy) < 1e-6
    for a, b in zip(unbroken.history, resumed.history):
        assert a.epoch == b.epoch
        assert a.val_loss == pytest.approx(b.val_loss, abs=1e-6)


def test_resume_rejects_checkpoint_without_state(tmp_path):
    from scvd.models import save_checkpoint

    model = build_recurrent_classifier(model_config())
    save_checkpoint(model, tmp_path / "bare")
    ds = learnable_dataset()
    with pytest.raises(CheckpointError):
        resume(tmp_path / "bare", ds, ds, TrainConfig(epochs=1))


def test_resume_rejects_wrong_optimizer(tmp_path):
    model = build_recurrent_classifier(model_config())
    ds = learnable_dataset()
    train(model, ds, ds, TrainConfig(epochs=1, batch_size=8), tmp_path)
    with pytest.raises(CheckpointError):
        resume(tmp_path, ds, ds, TrainConfig(epochs=1, optimizer={"name": "sgd"}))
