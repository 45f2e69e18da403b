# Tests for the synthetic ocean generator
from dataclasses import replace

import numpy as np
import pytest

from common.errors import ConfigError
from eof.basis import ProfileMatrix, decompose_profiles
from geogrid.profiles import parse_profile_table
from geogrid.sst import monthly_mean, parse_sst_table, regrid_block_mean
from geogrid.types import DepthGrid, TimeKey
from synth.fields import (
    DegenerateRegionError,
    SynthConfig,
    month_range,
    profile_noise,
    synth_fields,
    synth_sst,
    write_synth,
)
from synth.munk import MunkParams, munk


def test_munk_axis_and_surface():
    assert munk(np.array([1300.0]))[0] == pytest.approx(1500.0, abs=1e-12)
    assert munk(np.array([0.0]))[0] == pytest.approx(1548.52, abs=0.01)


def test_munk_has_its_minimum_on_the_axis():
    z = np.arange(0.0, 5001.0, 10.0)
    c = munk(z)
    above, below = c[z <= 1300.0], c[z >= 1300.0]
    assert (np.diff(above) < 0).all()
    assert (np.diff(below) > 0).all()
    assert z[np.argmin(c)] == 1300.0


def test_munk_parameters_are_validated():
    with pytest.raises(ConfigError):
        MunkParams(scale=0.0)
    with pytest.raises(ConfigError):
        MunkParams(epsilon=-0.1)


def test_month_range_crosses_years():
    assert month_range("2019-11", 3) == (
        TimeKey(2019, 11),
        TimeKey(2019, 12),
        TimeKey(2020, 1),
    )


def test_synth_config_validation_and_round_trip(mini_synth):
    with pytest.raises(ConfigError):
        SynthConfig(days_per_month=29)
    with pytest.raises(ConfigError):
        SynthConfig(coupling_gain=-1.0)
    with pytest.raises(ConfigError, match="unknown synth config"):
        SynthConfig.from_dict({"depth": 3})
    assert SynthConfig.from_dict(mini_synth.to_dict()) == mini_synth


def test_sst_grid_nests_inside_profile_cells(mini_synth):
    fine = mini_synth.sst_geometry()
    assert (fine.n_lat, fine.n_lon) == (8, 8)
    assert fine.dlat == 0.5
    assert fine.lat0 == mini_synth.lat0 - 0.25


def test_daily_sst_times(mini_synth):
    sst = synth_sst(mini_synth)
    assert len(sst.times) == 12
    assert sst.times[:2] == (TimeKey(2018, 1, 1), TimeKey(2018, 1, 15))
    assert sst.values.shape == (12, 8, 8)


def test_noise_free_profiles_follow_munk(mini_synth, small_grid):
    config = replace(mini_synth, coupling_gain=0.0, profile_noise_amplitude=0.0)
    _, profiles = synth_fields(config)
    expected = munk(small_grid.depths())
    for t in range(config.n_months):
        np.testing.assert_allclose(
            profiles.values[t, 2, 1], expected, rtol=0, atol=1e-12
        )


def test_profiles_carry_the_sst_anomaly(mini_synth, small_grid):
    config = replace(mini_synth, profile_noise_amplitude=0.0)
    sst, profiles = synth_fields(config)
    coarse = regrid_block_mean(monthly_mean(sst), config.profile_geometry())
    z = small_grid.depths()
    offset = profiles.values[3, 1, 2] - munk(z)
    anomaly = coarse.values[3, 1, 2] - config.sst_ref
    np.testing.assert_allclose(
        offset, config.coupling_gain * anomaly * np.exp(-z / 80.0), atol=1e-9
    )


def test_profile_noise_is_bounded(mini_synth):
    for cell in range(4):
        noise = profile_noise(mini_synth, cell, 0)
        assert np.abs(noise).max() <= mini_synth.profile_noise_amplitude + 1e-15


def test_same_seed_same_ocean(mini_synth):
    sst_a, prof_a = synth_fields(mini_synth)
    sst_b, prof_b = synth_fields(mini_synth)
    assert sst_a.values.tobytes() == sst_b.values.tobytes()
    assert prof_a.values.tobytes() == prof_b.values.tobytes()
    other = replace(mini_synth, seed=4)
    assert synth_fields(other)[0].values.tobytes() != sst_a.values.tobytes()


def test_degenerate_region(mini_synth):
    config = replace(mini_synth, n_lat=2)
    with pytest.raises(DegenerateRegionError):
        synth_fields(config)


def test_written_tables_parse_back(tmp_path, mini_synth, small_grid):
    sst, profiles = synth_fields(mini_synth)
    sst_path, profile_path = write_synth(
        tmp_path / "sst.csv", tmp_path / "profiles.csv", mini_synth, {"seed": 3}
    )
    parsed_sst = parse_sst_table(str(sst_path))
    assert parsed_sst.times == sst.times
    assert parsed_sst.geometry.lat0 == pytest.approx(sst.geometry.lat0)
    np.testing.assert_array_equal(parsed_sst.values, sst.values)

    parsed = parse_profile_table(str(profile_path), small_grid)
    assert parsed.times == profiles.times
    np.testing.assert_allclose(parsed.values, profiles.values, rtol=0, atol=1e-9)


def test_leading_mode_lives_near_the_surface():
    config = SynthConfig(
        n_lat=3,
        n_lon=3,
        n_months=24,
        grid=DepthGrid(5.0, 400.0, 5.0),
        days_per_month=1,
        subgrid=1,
        seed=1,
    )
    _, profiles = synth_fields(config)
    history = profiles.history(1, 1)
    basis = decompose_profiles(ProfileMatrix.from_history(config.grid, history))
    e1 = np.abs(basis.mode(1))
    quarter = config.grid.H // 4
    assert e1[:quarter].mean() > e1[-quarter:].mean()
    assert basis.explained_variance()[0] > 0.9
