# Tests for the run configuration, the command stages and the entry point
import json
from unittest.mock import patch

import pandas as pd
import pytest

from cli.commands import PIPELINE, split_months, stages_of
from cli.config import RunConfig, RunPaths, load_run_config
from cli.main import EXIT_CODES, error_line, main
from common.errors import ConfigError, InputDataError, SspFusionError
from common.report_io import read_provenance
from evalkit.render import read_svg_provenance
from geogrid.types import DepthGrid, TimeKey
from trainer.loop import TIMING_NOTE, report_model_stats

MINI_RUN = {
    "grid": "5:12:1",
    "basis_scope": "region",
    "n_test_months": 2,
    "seed": 5,
    "synth": {
        "n_lat": 4,
        "n_lon": 4,
        "n_months": 8,
        "days_per_month": 2,
        "subgrid": 2,
    },
    "model": {
        "n_heads": 2,
        "d_k": 4,
        "d_v": 4,
        "conv_filters": 4,
        "adaptive_pool": [2, 2],
    },
    "train": {
        "batch_size": 4,
        "max_epochs": 2,
        "checkpoint_every": 1,
        "snapshot_epochs": [],
    },
    "attn_epochs": [1, 2],
    "attn_samples": 2,
    "slice_depths": [8.0, 12.0],
}


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps({**data, "out_dir": str(tmp_path / "run")}))
    return str(path)


def test_overrides_win_over_the_file(tmp_path):
    path = write_config(tmp_path, MINI_RUN)
    config = load_run_config(path, {"epochs": 7, "seed": 9, "months": None})
    assert config.train.max_epochs == 7
    assert config.train.batch_size == 4
    assert config.seed == config.train.seed == config.synth.seed == 9
    assert config.grid == DepthGrid(5.0, 12.0, 1.0)
    assert config.synth.grid == config.grid
    assert config.model_config().H == 8
    assert config.model_config("cnn").variant == "cnn"


def test_run_config_round_trips_through_json(tmp_path):
    config = load_run_config(write_config(tmp_path, MINI_RUN))
    again = RunConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert again.to_dict() == config.to_dict()
    cold = RunConfig.from_dict({"train": {"warm_start": False}})
    assert cold.train.warm_start is False
    assert cold.to_dict()["train"]["warm_start"] is False


def test_run_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(str(tmp_path / "absent.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_run_config(str(broken))
    with pytest.raises(ConfigError, match="unknown run config"):
        RunConfig.from_dict({"colour": "blue"})
    with pytest.raises(ConfigError):
        RunConfig(model={"H": 10})
    with pytest.raises(ConfigError):
        RunConfig(months=("2020-13",))
    with pytest.raises(ConfigError):
        RunConfig(variants=("transformer",))
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"grid": "5:1:1"})


def months_of(n):
    return [TimeKey(2020, m + 1) for m in range(n)]


def test_split_holds_out_the_last_months():
    train, test = split_months(months_of(6), RunConfig(n_test_months=2))
    assert train == months_of(4)
    assert test == [TimeKey(2020, 5), TimeKey(2020, 6)]
    train, test = split_months(months_of(3), RunConfig(n_test_months=0))
    assert (len(train), test) == (3, [])


def test_split_with_explicit_months():
    config = RunConfig(
        months=("2020-01", "2020-02", "2020-04"), test_months=("2020-02",)
    )
    train, test = split_months(months_of(6), config)
    assert train == [TimeKey(2020, 1), TimeKey(2020, 4)]
    assert test == [TimeKey(2020, 2)]


def test_split_errors():
    with pytest.raises(ConfigError, match="no training month"):
        split_months(months_of(6), RunConfig())
    with pytest.raises(ConfigError, match="not in the profile data"):
        split_months(months_of(2), RunConfig(months=("2021-01",)))
    with pytest.raises(ConfigError, match="outside the selected"):
        split_months(
            months_of(4), RunConfig(months=("2020-01",), test_months=("2020-03",))
        )


def test_stages():
    assert stages_of("pipeline") == PIPELINE
    assert stages_of("eval") == ("eval",)
    with pytest.raises(ConfigError):
        stages_of("deploy")


def test_error_lines_name_the_category():
    assert error_line(InputDataError("bad row"), "fuse") == "input: bad row"
    assert error_line(SspFusionError("boom"), "train") == "stage: train: boom"
    assert EXIT_CODES == {"config": 2, "missing-artifact": 3, "input": 4, "stage": 5}


def test_train_without_a_dataset(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    code = main(["train", "--config", write_config(tmp_path, MINI_RUN)])
    assert code == 3
    assert "missing artifact: dataset" in capsys.readouterr().err


def test_invalid_config_exits_with_two(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    path = write_config(tmp_path, {**MINI_RUN, "basis_scope": "ocean"})
    assert main(["eof", "--config", path]) == 2
    assert capsys.readouterr().err.strip().endswith(
        "basis_scope must be one of ('cell', 'region'), got 'ocean'"
    )
    assert main(["predict", "--config", write_config(tmp_path, MINI_RUN)]) == 2


def test_missing_profile_table(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["eof", "--config", write_config(tmp_path, MINI_RUN)]) == 3
    assert "missing artifact: profiles" in capsys.readouterr().err


@pytest.fixture
def mini_run(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    path = write_config(tmp_path, MINI_RUN)
    assert main(["pipeline", "--config", path]) == 0
    return path, RunPaths(load_run_config(path))


def test_pipeline_writes_every_artifact(mini_run, capsys):
    _, paths = mini_run
    for artifact in (
        paths.sst_csv,
        paths.profiles_csv,
        paths.profiles_raster,
        paths.bases,
        paths.modes_csv,
        paths.variance_csv,
        paths.sst_raster,
        paths.dataset,
        paths.checkpoint("attention"),
        paths.checkpoint("cnn"),
        paths.snapshot("attention", 1),
        paths.loss_log("cnn"),
        paths.timing_csv,
        paths.loss_svg,
        paths.report / "rmse_by_location.csv",
        paths.report / "rmse_by_depth_band.csv",
        paths.attention / "epoch002.csv",
        paths.attention / "summary.csv",
        paths.stats_csv,
    ):
        assert artifact.exists(), artifact
    assert "parameters" in capsys.readouterr().out

    table = pd.read_csv(paths.report / "rmse_by_location.csv", comment="#")
    assert table["location"].iloc[-1] == "Average"
    assert list(table.columns[1:]) == ["SA-MDF-CNN", "CNN", "SITP", "MEAN"]
    header = read_provenance(paths.report / "rmse_by_location.csv")
    assert header["command"] == "eval"
    assert header["seed"] == 5
    assert len(header["test_digest"]) == 64

    timings = pd.read_csv(paths.timing_csv, comment="#")
    assert timings.groupby("variant").size().to_dict() == {"attention": 2, "cnn": 2}
    assert read_provenance(paths.timing_csv)["timing"] == TIMING_NOTE
    assert read_provenance(paths.stats_csv)["timing"] == TIMING_NOTE
    assert "timing" not in read_provenance(paths.loss_log("attention"))

    for figure in (paths.loss_svg, paths.attention / "received.svg"):
        assert read_svg_provenance(figure)["seed"] == 5
    assert read_svg_provenance(paths.report / "field_slice.svg") == header


def test_predict_at_an_interior_cell(mini_run, tmp_path, capsys):
    path, paths = mini_run
    code = main(
        [
            "predict",
            "--config",
            path,
            "--lat",
            "8.5",
            "--lon",
            "151.5",
            "--month",
            "2018-08",
            "--profiles",
            str(paths.profiles_csv),
        ]
    )
    assert code == 0
    frame = pd.read_csv(paths.predict_csv, comment="#")
    assert list(frame.columns) == ["depth_m", "speed_mps", "truth", "error"]
    assert len(frame) == 8
    assert (frame["error"] - (frame["speed_mps"] - frame["truth"])).abs().max() < 1e-9


def test_predict_at_a_boundary_cell(mini_run, capsys):
    path, _ = mini_run
    argv = ["predict", "--config", path, "--lat", "7.5", "--lon", "150.5"]
    code = main([*argv, "--month", "2018-08"])
    assert code == 4
    assert "is on the boundary of a 4x4 grid" in capsys.readouterr().err


def test_training_one_variant(mini_run, capsys):
    path, paths = mini_run
    assert main(["train", "--config", path, "--variant", "cnn", "--epochs", "1"]) == 0
    log = pd.read_csv(paths.loss_log("cnn"), comment="#")
    assert log["epoch"].tolist() == [1]


@pytest.mark.slow
def test_synthetic_benchmark(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    run = {
        "grid": "5:68:1",
        "n_test_months": 6,
        "train": {"batch_size": 16, "max_epochs": 100},
        "attn_epochs": [10, 50, 100],
        "slice_depths": [20.0, 40.0, 60.0],
    }
    path = write_config(tmp_path, run)
    assert main(["pipeline", "--config", path]) == 0
    paths = RunPaths(load_run_config(path))

    table = pd.read_csv(paths.report / "rmse_by_location.csv", comment="#")
    average = table[table["location"] == "Average"].iloc[0]
    assert average["SA-MDF-CNN"] <= 0.7 * average["MEAN"]
    assert average["SA-MDF-CNN"] <= average["CNN"]

    log = pd.read_csv(paths.loss_log("attention"), comment="#")
    assert log["train_rmse"].iloc[-1] <= 0.5 * log["train_rmse"].iloc[0]

    summary = pd.read_csv(paths.attention / "summary.csv", comment="#")
    assert summary["epoch"].tolist() == [10, 50, 100]
    assert set(summary["shallow_dominates"]) <= {True, False}


def test_stats_without_training_timings(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    path = write_config(tmp_path, MINI_RUN)
    with patch("cli.commands.report_model_stats", wraps=report_model_stats) as stats:
        assert main(["stats", "--config", path]) == 0
    config, timings = stats.call_args.args
    assert timings == {}
    assert config.H == 8
    assert "probe_step_seconds" in capsys.readouterr().out
    frame = pd.read_csv(tmp_path / "run" / "model_stats.csv", comment="#")
    assert frame["variant"].tolist() == ["attention", "cnn"]
