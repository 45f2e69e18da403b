"""Deterministic synthetic ocean: daily fine SST rasters and monthly profiles.

Sound speed follows a Munk curve plus a surface perturbation proportional to
the monthly 1 deg SST anomaly, decaying with depth over the mixed-layer
scale, plus smooth vertical noise. The SST used for the coupling is derived
from the emitted daily rasters exactly as the ingestion pipeline derives it
(monthly mean, then block mean onto the profile grid).
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from common.blob_io import PathLike
from common.errors import ConfigError
from config.defaults import GridDefaults, SynthDefaults
from geogrid.raster_io import write_profile_table, write_sst_table
from geogrid.sst import monthly_mean, regrid_block_mean
from geogrid.types import DepthGrid, GridGeometry, RasterStack, TimeKey
from synth.munk import MunkParams, munk

logger = logging.getLogger(__name__)


class DegenerateRegionError(ConfigError):
    """Raised when the synthetic region is smaller than 3x3 cells."""


def month_range(start: str, count: int) -> tuple[TimeKey, ...]:
    """``count`` consecutive monthly keys from ``start`` (``YYYY-MM``)."""
    first = TimeKey.parse(start)
    keys = []
    for n in range(count):
        offset = first.month - 1 + n
        keys.append(TimeKey(first.year + offset // 12, offset % 12 + 1))
    return tuple(keys)


@dataclass(frozen=True)
class SynthConfig:
    """Recipe of a synthetic region."""

    lat0: float = SynthDefaults.LAT0
    lon0: float = SynthDefaults.LON0
    n_lat: int = SynthDefaults.N_LAT
    n_lon: int = SynthDefaults.N_LON
    cell_deg: float = GridDefaults.PROFILE_CELL_DEG
    start_month: str = SynthDefaults.START_MONTH
    n_months: int = SynthDefaults.N_MONTHS
    seed: int = 0
    grid: DepthGrid = field(default_factory=DepthGrid)
    munk: MunkParams = field(default_factory=MunkParams)
    coupling_gain: float = SynthDefaults.COUPLING_GAIN
    mixed_layer_depth: float = SynthDefaults.MIXED_LAYER_DEPTH
    sst_ref: float = SynthDefaults.SST_BASE
    sst_base: float = SynthDefaults.SST_BASE
    sst_lat_gradient: float = SynthDefaults.SST_LAT_GRADIENT
    sst_seasonal_amplitude: float = SynthDefaults.SST_SEASONAL_AMPLITUDE
    sst_noise_amplitude: float = SynthDefaults.SST_NOISE_AMPLITUDE
    sst_daily_jitter: float = SynthDefaults.SST_DAILY_JITTER
    days_per_month: int = SynthDefaults.SST_DAYS_PER_MONTH
    subgrid: int = SynthDefaults.SST_SUBGRID
    profile_noise_amplitude: float = SynthDefaults.PROFILE_NOISE_AMPLITUDE
    noise_order: int = SynthDefaults.NOISE_ORDER

    def __post_init__(self) -> None:
        """Validate scales and amplitudes."""
        if self.cell_deg <= 0 or self.mixed_layer_depth <= 0:
            raise ConfigError("cell size and mixed-layer depth must be positive")
        if not 1 <= self.days_per_month <= 28:
            raise ConfigError("days_per_month must be in 1..28")
        if self.subgrid < 1 or self.noise_order < 1 or self.n_months < 1:
            raise ConfigError("subgrid, noise_order and n_months must be >= 1")
        amplitudes = (
            self.sst_noise_amplitude,
            self.sst_daily_jitter,
            self.profile_noise_amplitude,
            self.coupling_gain,
        )
        if any(a < 0 for a in amplitudes):
            raise ConfigError("noise amplitudes and coupling gain must be >= 0")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    @property
    def months(self) -> tuple[TimeKey, ...]:
        """Generated months."""
        return month_range(self.start_month, self.n_months)

    def profile_geometry(self) -> GridGeometry:
        """The 1 deg (``cell_deg``) profile grid."""
        return GridGeometry(
            self.lat0, self.lon0, self.cell_deg, self.cell_deg, self.n_lat, self.n_lon
        )

    def sst_geometry(self) -> GridGeometry:
        """The fine SST grid, ``subgrid`` cells per profile cell and axis."""
        step = self.cell_deg / self.subgrid
        offset = (self.cell_deg - step) / 2
        return GridGeometry(
            self.lat0 - offset,
            self.lon0 - offset,
            step,
            step,
            self.n_lat * self.subgrid,
            self.n_lon * self.subgrid,
        )

    def to_dict(self) -> dict[str, Any]:
        """Serialise for run configs."""
        data = asdict(self)
        data["grid"] = self.grid.to_dict()
        data["munk"] = self.munk.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SynthConfig":
        """Inverse of :meth:`to_dict`; unknown keys are rejected."""
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synth config fields: {sorted(unknown)}")
        values = dict(data)
        if isinstance(values.get("grid"), dict):
            values["grid"] = DepthGrid.from_dict(values["grid"])
        if isinstance(values.get("munk"), dict):
            values["munk"] = MunkParams(**values["munk"])
        return cls(**values)


def cosine_series(
    u: np.ndarray, v: np.ndarray, coeffs: np.ndarray
) -> np.ndarray:
    """``sum a_pq cos(pi p u) cos(pi q v)`` over a ``[K, K]`` coefficient table."""
    p = np.arange(coeffs.shape[0])[:, None]
    cu = np.cos(np.pi * p * np.ravel(u)[None, :])
    cv = np.cos(np.pi * p * np.ravel(v)[None, :])
    return np.einsum("pq,pn,qn->n", coeffs, cu, cv).reshape(np.shape(u))


def sst_month_field(
    config: SynthConfig, lat: np.ndarray, lon: np.ndarray, month_index: int
) -> np.ndarray:
    """Smooth monthly SST (degC) at arbitrary points of the region."""
    month = config.months[month_index]
    span_lat = config.n_lat * config.cell_deg
    span_lon = config.n_lon * config.cell_deg
    u = (lat - (config.lat0 - config.cell_deg / 2)) / span_lat
    v = (lon - (config.lon0 - config.cell_deg / 2)) / span_lon
    rng = np.random.default_rng([config.seed, 0, month_index])
    K = config.noise_order
    coeffs = rng.uniform(-1.0, 1.0, size=(K, K)) / K
    seasonal = np.sin(2.0 * np.pi * (month.month - 1) / 12.0)
    return (
        config.sst_base
        + config.sst_lat_gradient * (lat - config.lat0)
        + config.sst_seasonal_amplitude * seasonal
        + config.sst_noise_amplitude * cosine_series(u, v, coeffs)
    )


def synth_sst(config: SynthConfig) -> RasterStack:
    """Daily SST on the fine grid, ``days_per_month`` days per month."""
    geometry = config.sst_geometry()
    lat, lon = np.meshgrid(geometry.latitudes(), geometry.longitudes(), indexing="ij")
    spacing = 28 // config.days_per_month
    times: list[TimeKey] = []
    rasters: list[np.ndarray] = []
    for t, month in enumerate(config.months):
        base = sst_month_field(config, lat, lon, t)
        for d in range(config.days_per_month):
            jitter = np.random.default_rng([config.seed, 1, t, d]).standard_normal(
                base.shape
            )
            times.append(TimeKey(month.year, month.month, 1 + d * spacing))
            rasters.append(base + config.sst_daily_jitter * jitter)
    return RasterStack(
        geometry=geometry,
        times=tuple(times),
        values=np.stack(rasters),
        variable="sst",
        units="degC",
        provenance={"synth": config.to_dict()},
    )


def profile_noise(config: SynthConfig, cell_index: int, month_index: int) -> np.ndarray:
    """Smooth vertical noise of one cell and month, bounded by its amplitude."""
    z = config.grid.depths()
    span = config.grid.z_max - config.grid.z_min
    w = (z - config.grid.z_min) / span if span > 0 else np.zeros_like(z)
    rng = np.random.default_rng([config.seed, 2, cell_index, month_index])
    K = config.noise_order
    b = rng.uniform(-1.0, 1.0, size=K) / K
    k = np.arange(1, K + 1)
    series = (b[:, None] * np.cos(np.pi * k[:, None] * w[None, :])).sum(axis=0)
    return config.profile_noise_amplitude * series


def synth_fields(config: SynthConfig) -> tuple[RasterStack, RasterStack]:
    """Generate the daily SST stack and the monthly profile stack.

    Raises:
        DegenerateRegionError: If the region is smaller than 3x3 cells.
    """
    if config.n_lat < 3 or config.n_lon < 3:
        raise DegenerateRegionError(
            f"synthetic region {config.n_lat}x{config.n_lon} is smaller than 3x3"
        )
    sst = synth_sst(config)
    coarse = regrid_block_mean(monthly_mean(sst), config.profile_geometry())

    z = config.grid.depths()
    base = munk(z, config.munk)
    decay = np.exp(-z / config.mixed_layer_depth)
    T = len(config.months)
    values = np.empty((T, config.n_lat, config.n_lon, config.grid.H))
    for t in range(T):
        for i in range(config.n_lat):
            for j in range(config.n_lon):
                anomaly = coarse.values[t, i, j] - config.sst_ref
                values[t, i, j] = (
                    base
                    + config.coupling_gain * anomaly * decay
                    + profile_noise(config, i * config.n_lon + j, t)
                )
    profiles = RasterStack(
        geometry=config.profile_geometry(),
        times=config.months,
        values=values,
        variable="sound_speed",
        units="m/s",
        grid=config.grid,
        provenance={"synth": config.to_dict()},
    )
    logger.info(
        f"Synthesised {T} months over {config.n_lat}x{config.n_lon} cells, "
        f"H={config.grid.H}, {len(sst.times)} daily SST rasters"
    )
    return sst, profiles


def write_synth(
    sst_path: PathLike,
    profiles_path: PathLike,
    config: SynthConfig,
    provenance: Optional[dict[str, Any]] = None,
) -> tuple[Path, Path]:
    """Write the daily SST and monthly profile tables in the ingestion formats."""
    sst, profiles = synth_fields(config)
    return (
        write_sst_table(sst_path, sst, provenance),
        write_profile_table(profiles_path, profiles, provenance),
    )
