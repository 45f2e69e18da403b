# Tests for the reference methods, error metrics and the comparison report
import numpy as np
import pandas as pd
import pytest

from common.errors import ConfigError, InputDataError, MissingArtifactError
from common.report_io import read_provenance
from eof.basis import ProfileMatrix, mean_profile
from eof.store import compute_bases
from evalkit.base_estimator import EvalContext
from evalkit.baselines import (
    NoHistoryError,
    NoNeighborsError,
    haversine_km,
    idw_weights,
    mean_method,
    sitp,
)
from evalkit.factory import EstimatorFactory
from evalkit.metrics import DepthRangeError, depth_mask, mae_by_depth, rmse, rmse_rows
from evalkit.render import read_svg_provenance
from evalkit.report import (
    ALL_METHODS,
    attention_summary,
    compare_methods,
    depth_slice_report,
    field_grids,
    field_slice,
    improvement_table,
    input_digest,
    profile_comparison,
    write_report,
)
from fusion.dataset import EmptyDatasetError, SplitRule, slide_dataset
from geogrid.types import DepthGrid, GeoCoord, Profile, TimeKey
from model.init import init_params
from trainer.adam import AdamState
from trainer.checkpoint import Checkpoint
from trainer.loop import predict
from trainer.schedule import TrainConfig


def test_haversine_of_one_degree_of_latitude():
    a, b = GeoCoord(10.0, 150.0), GeoCoord(11.0, 150.0)
    assert haversine_km(a, b) == pytest.approx(2 * np.pi * 6371.0 / 360.0, rel=1e-12)
    assert haversine_km(a, a) == 0.0


def test_idw_weights():
    np.testing.assert_allclose(idw_weights(np.array([1.0, 2.0])), [0.8, 0.2])
    np.testing.assert_allclose(idw_weights(np.full(8, 3.0)), 0.125, rtol=1e-15)
    with pytest.raises(InputDataError):
        idw_weights(np.array([0.0, 1.0]))


def test_sitp_of_identical_neighbors():
    grid = DepthGrid(5.0, 12.0, 1.0)
    shared = Profile(grid, np.linspace(1540.0, 1500.0, grid.H))
    target = GeoCoord(11.0, 151.0)
    coords = [
        GeoCoord(11.0 + di, 151.0 + dj)
        for di in (-1, 0, 1)
        for dj in (-1, 0, 1)
        if (di, dj) != (0, 0)
    ]
    estimate = sitp([shared] * 8, coords, target)
    np.testing.assert_allclose(estimate.speeds, shared.speeds, rtol=0, atol=1e-9)


def test_sitp_of_two_equidistant_neighbors():
    grid = DepthGrid(0.0, 0.0, 1.0)
    estimate = sitp(
        [Profile(grid, np.array([1500.0])), Profile(grid, np.array([1510.0]))],
        [GeoCoord(10.0, 151.0), GeoCoord(12.0, 151.0)],
        GeoCoord(11.0, 151.0),
    )
    assert estimate.speeds[0] == pytest.approx(1505.0, abs=1e-9)


def test_sitp_stays_within_neighbor_range():
    rng = np.random.default_rng(4)
    grid = DepthGrid(5.0, 12.0, 1.0)
    profiles = [Profile(grid, 1500.0 + rng.normal(0, 5, grid.H)) for _ in range(8)]
    coords = [GeoCoord(10.0 + k % 3, 150.0 + k // 3 + 0.5) for k in range(8)]
    estimate = sitp(profiles, coords, GeoCoord(11.2, 151.1)).speeds
    stack = np.stack([p.speeds for p in profiles])
    assert (estimate >= stack.min(axis=0) - 1e-9).all()
    assert (estimate <= stack.max(axis=0) + 1e-9).all()


def test_sitp_input_errors():
    grid = DepthGrid(0.0, 0.0, 1.0)
    with pytest.raises(NoNeighborsError):
        sitp([], [], GeoCoord(0.0, 0.0))
    with pytest.raises(InputDataError):
        sitp([Profile(grid, np.array([1500.0]))], [], GeoCoord(0.0, 0.0))


def test_mean_method_matches_the_eof_mean():
    grid = DepthGrid(0.0, 0.0, 1.0)
    matrix = ProfileMatrix(grid, np.array([[1500.0, 1504.0]]))
    assert mean_method(matrix).speeds.tolist() == [1502.0]

    rng = np.random.default_rng(9)
    wide = ProfileMatrix(DepthGrid(0.0, 5.0, 1.0), 1500.0 + rng.normal(size=(6, 11)))
    np.testing.assert_allclose(
        mean_method(wide).speeds, mean_profile(wide).speeds, rtol=0, atol=1e-12
    )
    with pytest.raises(NoHistoryError):
        mean_method(ProfileMatrix(grid, np.zeros((1, 0))))


def test_rmse_over_a_depth_range():
    grid = DepthGrid(0.0, 3.0, 1.0)
    truth = Profile(grid, np.array([1500.0, 1500.0, 1500.0, 1500.0]))
    pred = Profile(grid, np.array([1501.0, 1499.0, 1510.0, 1510.0]))
    assert rmse(pred, truth, (0.0, 1.0)) == 1.0
    assert rmse(pred, truth) == pytest.approx(np.sqrt(50.5))
    assert rmse(truth, truth) == 0.0
    with pytest.raises(InputDataError):
        rmse(Profile(DepthGrid(0.0, 0.0, 1.0), np.array([1500.0])), truth)


def test_depth_band_from_the_surface():
    grid = DepthGrid(5.0, 1980.0, 1.0)
    assert depth_mask(grid, (0.0, 200.0)).sum() == 196
    assert depth_mask(grid).sum() == grid.H
    with pytest.raises(DepthRangeError):
        depth_mask(grid, (0.0, 4.0))


def test_row_metrics():
    pred = np.array([[1.0, 2.0], [3.0, 5.0]])
    truth = np.array([[1.0, 0.0], [3.0, 3.0]])
    np.testing.assert_allclose(rmse_rows(pred, truth), [np.sqrt(2.0), np.sqrt(2.0)])
    assert rmse_rows(pred, truth, np.array([True, False])).tolist() == [0.0, 0.0]
    assert mae_by_depth(pred, truth).tolist() == [0.0, 2.0]


def evaluation_setup(profile_stack, sst_stack, grid, config, test_month=3):
    """4x4 region over three months with untrained checkpoints."""
    rng = np.random.default_rng(11)
    profiles = profile_stack(
        1500.0 + rng.standard_normal((3, 4, 4, grid.H)), grid
    )
    sst = sst_stack(rng.uniform(20.0, 30.0, size=(3, 4, 4)))
    bases = compute_bases(profiles, profiles.times, scope="region")
    split = SplitRule.from_months([TimeKey(2020, test_month)] if test_month else [])
    dataset = slide_dataset(sst, profiles, profiles.times, bases, split)
    checkpoints = {}
    for seed, variant in enumerate(("attention", "cnn")):
        cfg = config.with_variant(variant)
        params = init_params(cfg, seed)
        checkpoints[variant] = Checkpoint(
            model_config=cfg,
            train_config=TrainConfig(),
            params=params,
            adam=AdamState.zeros_like(params),
            stats=dataset.manifest.stats,
        )
    return dataset, profiles, checkpoints


@pytest.fixture
def evaluation(profile_stack, sst_stack, small_grid, tiny_config):
    dataset, profiles, checkpoints = evaluation_setup(
        profile_stack, sst_stack, small_grid, tiny_config
    )
    return dataset, profiles, checkpoints, compare_methods(
        dataset, profiles, checkpoints
    )


def test_compare_methods_runs_every_method(evaluation):
    dataset, profiles, checkpoints, report = evaluation
    index = dataset.indices("test")
    assert report.methods == ALL_METHODS
    assert len(report.entries) == 4
    for method in ALL_METHODS:
        assert report.predictions[method].shape == (4, 8)
    np.testing.assert_array_equal(report.truth, dataset.labels(index))

    attention = checkpoints["attention"]
    expected = predict(dataset, index, attention.params, attention.model_config)
    np.testing.assert_array_equal(report.predictions["SA-MDF-CNN"], expected)

    first = report.entries[0]
    history = profiles.history(*first.cell, [TimeKey(2020, 1), TimeKey(2020, 2)])
    np.testing.assert_allclose(
        report.predictions["MEAN"][0], history.mean(axis=0), atol=1e-12
    )


def test_report_stamps_the_test_digest(evaluation):
    dataset, _, _, report = evaluation
    index = dataset.indices("test")
    assert report.test_digest == input_digest(dataset, index)
    assert report.test_digest != input_digest(dataset, index[:-1])


def test_location_table_has_an_average_row(evaluation):
    report = evaluation[3]
    table = report.location_table()
    assert list(table.columns) == ["location", *ALL_METHODS]
    assert len(table) == 5
    assert table["location"].iloc[-1] == "Average"
    for method in ALL_METHODS:
        assert table[method].iloc[-1] == pytest.approx(table[method].iloc[:4].mean())
    samples = report.sample_rows()
    assert len(samples) == 4 * len(ALL_METHODS)


def test_depth_slices_skip_depths_outside_the_grid(evaluation):
    report = evaluation[3]
    slices = depth_slice_report(report, (8.0, 100.0))
    assert slices["band"].tolist() == ["0-8 m"]
    assert slices["layers"].tolist() == [4]
    mask = report.grid.band(0.0, 8.0)
    expected = rmse_rows(report.predictions["SITP"], report.truth, mask).mean()
    assert slices["SITP"].iloc[0] == pytest.approx(expected)


def test_improvement_table(evaluation):
    report = evaluation[3]
    locations = report.location_table()
    slices = depth_slice_report(report, (8.0,))
    table = improvement_table(locations, slices, report.methods)
    assert len(table) == 2 * 3 * 2
    row = table[
        (table["method"] == "CNN")
        & (table["reference"] == "MEAN")
        & (table["scope"] == "full")
    ].iloc[0]
    average = locations.iloc[-1]
    assert row["improvement_pct"] == pytest.approx(
        100.0 * (1.0 - average["CNN"] / average["MEAN"])
    )


def test_field_slice_and_grids(evaluation):
    report = evaluation[3]
    frame = field_slice(report, TimeKey(2020, 3), 7.0)
    assert len(frame) == 5 * 4
    truth = frame[frame["method"] == "TRUTH"]["speed_mps"].to_numpy()
    np.testing.assert_array_equal(truth, report.truth[:, 2])
    lats, lons, grids = field_grids(frame)
    assert lats.tolist() == [11.0, 12.0]
    assert lons.tolist() == [151.0, 152.0]
    assert set(grids) == {"TRUTH", *ALL_METHODS}
    assert grids["TRUTH"].shape == (2, 2)
    with pytest.raises(InputDataError):
        field_slice(report, TimeKey(2020, 1), 7.0)
    with pytest.raises(DepthRangeError):
        field_slice(report, TimeKey(2020, 3), 50.0)


def test_profile_comparison_errors(evaluation):
    report = evaluation[3]
    frame = profile_comparison(report, (1, 1), TimeKey(2020, 3))
    assert list(frame.columns[:4]) == [
        "depth_m",
        "truth",
        "sa_mdf_cnn",
        "err_sa_mdf_cnn",
    ]
    np.testing.assert_allclose(frame["err_sitp"], frame["sitp"] - frame["truth"])
    with pytest.raises(InputDataError):
        profile_comparison(report, (0, 0), TimeKey(2020, 3))


def test_write_report_files(tmp_path, evaluation):
    report = evaluation[3]
    written = write_report(report, tmp_path, {"seed": 1}, depths=(8.0, 12.0))
    for name in (
        "rmse_by_location",
        "rmse_samples",
        "rmse_by_depth_band",
        "mae_by_depth",
        "improvement",
        "field_slice",
        "profile_comparison",
    ):
        assert written[name] == tmp_path / f"{name}.csv"
        assert read_provenance(written[name])["test_digest"] == report.test_digest
    assert read_provenance(written["rmse_by_depth_band"])["depth_band"]
    assert written["field_slice_svg"].read_text().lstrip().startswith("<?xml")
    expected = {"seed": 1, "test_digest": report.test_digest}
    for name in ("mae_by_depth_svg", "field_slice_svg", "profile_comparison_svg"):
        assert read_svg_provenance(written[name]) == expected
    mae = pd.read_csv(written["mae_by_depth"], comment="#")
    assert list(mae.columns) == [
        "depth_m",
        "mae_sa_mdf_cnn",
        "mae_cnn",
        "mae_sitp",
        "mae_mean",
    ]


def test_svg_output_is_reproducible(tmp_path, evaluation):
    report = evaluation[3]
    a = write_report(report, tmp_path / "a", depths=(8.0,))
    b = write_report(report, tmp_path / "b", depths=(8.0,))
    assert a["mae_by_depth_svg"].read_bytes() == b["mae_by_depth_svg"].read_bytes()
    assert read_svg_provenance(a["mae_by_depth_svg"]) == {
        "test_digest": report.test_digest
    }


def test_network_method_without_checkpoint(evaluation):
    dataset, profiles, checkpoints, _ = evaluation
    with pytest.raises(MissingArtifactError, match="CNN"):
        compare_methods(dataset, profiles, {"attention": checkpoints["attention"]})


def test_unknown_method_is_a_config_error(evaluation):
    dataset, profiles, checkpoints, _ = evaluation
    with pytest.raises(ConfigError, match="No estimator registered"):
        compare_methods(dataset, profiles, checkpoints, methods=("KRIGING",))
    assert EstimatorFactory.methods()[:4] == list(ALL_METHODS)
    assert EstimatorFactory.variant("SITP") is None


def test_evaluation_needs_test_samples(
    profile_stack, sst_stack, small_grid, tiny_config
):
    dataset, profiles, checkpoints = evaluation_setup(
        profile_stack, sst_stack, small_grid, tiny_config, test_month=None
    )
    assert not dataset.indices("test")
    with pytest.raises(EmptyDatasetError):
        compare_methods(dataset, profiles, checkpoints)


def test_context_rejects_another_depth_grid(evaluation, profile_stack):
    dataset = evaluation[0]
    other = profile_stack(np.full((1, 4, 4, 3), 1500.0), DepthGrid(0.0, 2.0, 1.0))
    with pytest.raises(InputDataError, match="depth grids"):
        EvalContext(dataset, other)


def test_attention_summary_flags_the_shallow_quartile():
    shallow = np.array([0.3, 0.3, 0.1, 0.1, 0.05, 0.05, 0.05, 0.05])
    flat = np.full(8, 0.125)
    table = attention_summary({10: shallow, 20: flat})
    assert table["epoch"].tolist() == [10, 20]
    assert table["shallow_dominates"].tolist() == [True, False]
    assert table["shallow_quartile_mean"].iloc[0] == pytest.approx(0.3)
