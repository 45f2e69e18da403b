# Tests for the learning-rate schedule, Adam, checkpoints and the training loop
import numpy as np
import pandas as pd
import pytest

import trainer.loop as loop
from common.errors import ConfigError, MissingArtifactError
from fusion.dataset import (
    ChannelStats,
    DatasetManifest,
    EmptyDatasetError,
    FusionDataset,
    SampleEntry,
)
from geogrid.types import DepthGrid, GeoCoord, GridGeometry, TimeKey
from model.config import ModelParams
from model.init import init_params
from trainer.adam import AdamState, adam_step
from trainer.checkpoint import (
    Checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from trainer.loop import (
    TrainingDivergedError,
    batches,
    epoch_order,
    predict,
    report_model_stats,
    train,
    warm_start_output,
)
from trainer.schedule import TrainConfig, lr_at


def make_dataset(n_train, n_test=0, H=8, seed=0):
    """Random fused inputs whose labels depend on the SST channel."""
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    x = rng.standard_normal((n, H, 6, 8)).astype(np.float32)
    y = (1500.0 + 2.0 * x[:, :, 0, :].mean(axis=-1)).astype(np.float32)
    entries = tuple(
        SampleEntry(
            cell=(1, 1),
            center=GeoCoord(11.0, 151.0),
            time=TimeKey(2020, k + 1) if k < 12 else TimeKey(2021, k - 11),
            split="train" if k < n_train else "test",
            offset=0,
        )
        for k in range(n)
    )
    manifest = DatasetManifest(
        grid=DepthGrid(5.0, 5.0 + H - 1, 1.0),
        geometry=GridGeometry(10.0, 150.0, 1.0, 1.0, 3, 3),
        entries=entries,
        stats=ChannelStats.from_inputs(x[:n_train]),
    )
    return FusionDataset(manifest, x, y)


def test_learning_rate_steps():
    config = TrainConfig()
    assert lr_at(config, 0) == 0.001
    assert lr_at(config, 19) == 0.001
    assert lr_at(config, 20) == pytest.approx(0.0001, rel=1e-12)
    rates = [lr_at(config, e) for e in range(100)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    with pytest.raises(ConfigError):
        lr_at(config, -1)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigError):
        TrainConfig(lr_drop_factor=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(lr_drop_period=0)
    config = TrainConfig(snapshot_epochs=(1, 2))
    assert TrainConfig.from_dict(config.to_dict()) == config


def test_adam_first_step_is_minus_lr():
    params = ModelParams({"w": np.array([0.5])})
    state = AdamState.zeros_like(params)
    config = TrainConfig()
    updated, new_state = adam_step(params, {"w": np.array([1.0])}, state, 0.001, config)
    assert updated["w"][0] == pytest.approx(0.5 - 0.001 / (1 + 1e-8), abs=1e-12)
    assert new_state.step == 1
    assert params["w"][0] == 0.5


def test_adam_zero_gradient():
    params = ModelParams({"w": np.array([0.5, -2.0])})
    fresh = AdamState.zeros_like(params)
    updated, _ = adam_step(params, {"w": np.zeros(2)}, fresh, 0.001, TrainConfig())
    assert updated["w"].tolist() == [0.5, -2.0]

    warm = AdamState({"w": np.ones(2)}, {"w": np.ones(2)}, step=3)
    _, decayed = adam_step(params, {"w": np.zeros(2)}, warm, 0.001, TrainConfig())
    np.testing.assert_allclose(decayed.m["w"], 0.9)
    np.testing.assert_allclose(decayed.v["w"], 0.999)


def test_adam_is_deterministic(tiny_config):
    params = init_params(tiny_config, 0)
    rng = np.random.default_rng(1)
    grads = {k: rng.standard_normal(v.shape) for k, v in params.values.items()}
    state = AdamState.zeros_like(params)
    a, _ = adam_step(params, grads, state, 0.001, TrainConfig())
    b, _ = adam_step(params, grads, state, 0.001, TrainConfig())
    for name in params.names():
        assert a[name].tobytes() == b[name].tobytes()


def test_epoch_order_is_seeded_per_epoch():
    indices = list(range(20))
    first = epoch_order(indices, seed=3, epoch=0)
    assert first.tolist() == epoch_order(indices, seed=3, epoch=0).tolist()
    assert sorted(first.tolist()) == indices
    assert first.tolist() != epoch_order(indices, seed=3, epoch=1).tolist()
    assert first.tolist() != epoch_order(indices, seed=4, epoch=0).tolist()


def test_batches_larger_than_the_dataset():
    order = np.arange(5)
    assert [b.tolist() for b in batches(order, 16)] == [[0, 1, 2, 3, 4]]
    assert [len(b) for b in batches(order, 2)] == [2, 2, 1]


def test_single_sample_overfits(tmp_path, tiny_config):
    dataset = make_dataset(1)
    config = TrainConfig(
        batch_size=1,
        max_epochs=50,
        checkpoint_every=50,
        snapshot_epochs=(),
        seed=1,
        warm_start=False,
    )
    result = train(dataset, tiny_config.with_variant("cnn"), config, tmp_path)
    log = result.loss_log
    assert len(log) == 50
    assert log["train_rmse"].iloc[-1] < log["train_rmse"].iloc[0]
    assert result.checkpoint.epoch == 50


def test_same_seed_gives_identical_checkpoints(tmp_path, tiny_config, tiny_train):
    dataset = make_dataset(10, 2)
    first = train(dataset, tiny_config, tiny_train, tmp_path / "a")
    second = train(dataset, tiny_config, tiny_train, tmp_path / "b")
    assert first.checkpoint_path.read_bytes() == second.checkpoint_path.read_bytes()
    assert first.snapshots[2].read_bytes() == second.snapshots[2].read_bytes()
    assert first.checkpoint_path.name == "attention.ckpt"
    assert first.snapshots[2].name == "attention_epoch002.ckpt"


def test_checkpoint_round_trip_predicts_identically(
    tmp_path, tiny_config, tiny_train
):
    dataset = make_dataset(6, 3)
    result = train(dataset, tiny_config, tiny_train, tmp_path, name="probe")
    loaded = load_checkpoint(result.checkpoint_path)
    probe = dataset.indices("test")

    before = predict(dataset, probe, result.checkpoint.params, tiny_config)
    after = predict(dataset, probe, loaded.params, loaded.model_config)
    assert before.tobytes() == after.tobytes()
    assert loaded.epoch == 3
    assert loaded.adam.step == result.checkpoint.adam.step
    assert loaded.model_config == tiny_config
    assert loaded.train_config == tiny_train
    np.testing.assert_array_equal(loaded.stats.mean, dataset.manifest.stats.mean)
    assert encode_checkpoint(loaded) == result.checkpoint_path.read_bytes()


def test_warm_start_sets_output_bias(tiny_config):
    params = init_params(tiny_config, 0)
    labels = make_dataset(5).labels(list(range(5)))
    warmed = warm_start_output(params, labels)
    np.testing.assert_array_equal(
        warmed["fc.b"], np.asarray(labels, dtype=np.float64).mean(axis=0)
    )
    assert not params["fc.b"].any()
    for name in params.names():
        if name != "fc.b":
            assert warmed[name].tobytes() == params[name].tobytes()


def first_step_params(monkeypatch):
    seen = []
    real = loop.loss_and_gradients

    def recording(x, y, params, config):
        if not seen:
            seen.append(params.copy())
        return real(x, y, params, config)

    monkeypatch.setattr(loop, "loss_and_gradients", recording)
    return seen


@pytest.mark.parametrize("warm_start", [True, False])
def test_training_starts_from_the_configured_bias(
    tmp_path, monkeypatch, tiny_config, warm_start
):
    dataset = make_dataset(4)
    seen = first_step_params(monkeypatch)
    config = TrainConfig(
        batch_size=4, max_epochs=1, checkpoint_every=1, seed=2, warm_start=warm_start
    )
    result = train(dataset, tiny_config, config, tmp_path)

    start = seen[0]
    fresh = init_params(tiny_config, 2)
    labels = dataset.labels(dataset.indices("train"))
    expected = warm_start_output(fresh, labels) if warm_start else fresh
    for name in fresh.names():
        assert start[name].tobytes() == expected[name].tobytes(), name
    initial = result.loss_log["train_rmse"].iloc[0]
    assert (initial < 100.0) if warm_start else (initial > 1000.0)
    assert load_checkpoint(result.checkpoint_path).train_config.warm_start is warm_start


def test_warm_start_is_a_train_config_field():
    assert TrainConfig().warm_start is True
    assert TrainConfig.from_dict({"warm_start": False}).warm_start is False
    with pytest.raises(ConfigError):
        TrainConfig(warm_start="yes")


def test_loss_log_columns(tmp_path, tiny_config, tiny_train):
    dataset = make_dataset(5, 2)
    result = train(
        dataset, tiny_config, tiny_train, tmp_path, evaluate_test=True,
        provenance={"seed": 7},
    )
    log = pd.read_csv(result.loss_log_path, comment="#")
    assert list(log.columns) == ["epoch", "lr", "train_rmse", "test_rmse"]
    assert log["epoch"].tolist() == [1, 2, 3]
    assert (log["test_rmse"] > 0).all()
    assert result.loss_log_path.read_text().startswith('# run_config={"seed":7}')


def test_training_needs_training_samples(tmp_path, tiny_config, tiny_train):
    with pytest.raises(EmptyDatasetError):
        train(make_dataset(0, 3), tiny_config, tiny_train, tmp_path)


def test_training_checks_the_depth_grid(tmp_path, tiny_config, tiny_train):
    with pytest.raises(ConfigError):
        train(make_dataset(3, H=9), tiny_config, tiny_train, tmp_path)


def test_divergence_keeps_the_last_checkpoint(
    tmp_path, monkeypatch, tiny_config, tiny_train
):
    dataset = make_dataset(4)
    real = loop.loss_and_gradients
    calls = []

    def failing(x, y, params, config):
        calls.append(1)
        value, grads = real(x, y, params, config)
        return (float("nan") if len(calls) > 1 else value), grads

    monkeypatch.setattr(loop, "loss_and_gradients", failing)
    config = TrainConfig(batch_size=4, max_epochs=3, checkpoint_every=1, seed=0)
    with pytest.raises(TrainingDivergedError) as excinfo:
        train(dataset, tiny_config, config, tmp_path)

    error = excinfo.value
    assert error.epoch == 2
    assert error.last_checkpoint == tmp_path / "attention.ckpt"
    assert load_checkpoint(error.last_checkpoint).epoch == 1
    assert len(pd.read_csv(tmp_path / "attention_loss.csv", comment="#")) == 1


def test_load_missing_checkpoint(tmp_path):
    with pytest.raises(MissingArtifactError, match="missing artifact: checkpoint"):
        load_checkpoint(tmp_path / "attention.ckpt")


def test_checkpoint_rejects_params_of_another_config(tmp_path, tiny_config):
    cnn = tiny_config.with_variant("cnn")
    params = init_params(cnn, 0)
    checkpoint = Checkpoint(
        model_config=tiny_config,
        train_config=TrainConfig(),
        params=params,
        adam=AdamState.zeros_like(params),
    )
    path = save_checkpoint(tmp_path / "bad.ckpt", checkpoint)
    with pytest.raises(ConfigError):
        load_checkpoint(path)


def test_model_stats_report_both_variants(tiny_config):
    report = report_model_stats(tiny_config, {"attention": [1.0, 3.0]})
    assert report["variant"].tolist() == ["attention", "cnn"]
    counts = dict(zip(report["variant"], report["parameters"]))
    assert counts["attention"] == tiny_config.parameter_count()
    assert counts["cnn"] < counts["attention"]
    attention = report.iloc[0]
    assert attention["timed_epochs"] == 2
    assert attention["mean_epoch_seconds"] == 2.0
    assert attention["total_train_seconds"] == 4.0
    assert pd.isna(report.iloc[1]["mean_epoch_seconds"])
    assert (report["probe_step_seconds"] > 0).all()
