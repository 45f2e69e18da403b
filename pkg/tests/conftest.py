# Shared fixtures: small grids, tiny networks and a miniature synthetic ocean
import numpy as np
import pytest

from geogrid.types import DepthGrid, GridGeometry, RasterStack, TimeKey
from model.config import ModelConfig
from synth.fields import SynthConfig
from trainer.schedule import TrainConfig


@pytest.fixture
def small_grid():
    return DepthGrid(5.0, 12.0, 1.0)


@pytest.fixture
def tiny_config():
    return ModelConfig(
        H=8,
        n_heads=2,
        d_k=4,
        d_v=4,
        conv_filters=4,
        adaptive_pool=(2, 2),
    )


@pytest.fixture
def tiny_train():
    return TrainConfig(
        batch_size=4,
        max_epochs=3,
        checkpoint_every=1,
        snapshot_epochs=(2,),
        seed=7,
    )


@pytest.fixture
def mini_synth(small_grid):
    return SynthConfig(
        n_lat=4,
        n_lon=4,
        n_months=6,
        grid=small_grid,
        days_per_month=2,
        subgrid=2,
        seed=3,
    )


def make_profile_stack(values, grid, lat0=10.0, lon0=150.0, months=None):
    """Profile stack with ``values[T, n_lat, n_lon, H]`` on a 1 degree grid."""
    values = np.asarray(values, dtype=np.float64)
    T, n_lat, n_lon, _ = values.shape
    months = months or [TimeKey(2020, m + 1) for m in range(T)]
    return RasterStack(
        geometry=GridGeometry(lat0, lon0, 1.0, 1.0, n_lat, n_lon),
        times=tuple(months),
        values=values,
        variable="sound_speed",
        units="m/s",
        grid=grid,
    )


def make_sst_stack(values, lat0=10.0, lon0=150.0, months=None):
    """Monthly SST stack with ``values[T, n_lat, n_lon]`` on a 1 degree grid."""
    values = np.asarray(values, dtype=np.float64)
    T = values.shape[0]
    months = months or [TimeKey(2020, m + 1) for m in range(T)]
    return RasterStack(
        geometry=GridGeometry(lat0, lon0, 1.0, 1.0, values.shape[1], values.shape[2]),
        times=tuple(months),
        values=values,
    )


@pytest.fixture
def profile_stack():
    return make_profile_stack


@pytest.fixture
def sst_stack():
    return make_sst_stack
