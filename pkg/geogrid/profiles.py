"""Profile ingestion and vertical resampling."""

import logging
from typing import IO, Optional, Union

import numpy as np
import pandas as pd

from common.errors import InputDataError
from config.defaults import GridDefaults
from geogrid.sst import infer_geometry
from geogrid.tables import (
    MalformedRowError,
    check_coordinates,
    check_duplicates,
    parse_dates,
    parse_numbers,
    read_rows,
)
from geogrid.types import DepthGrid, GeometryError, Profile, RasterStack, TimeKey

logger = logging.getLogger(__name__)

PROFILE_COLUMNS = ("date", "lat", "lon", "depth_m", "speed_mps")

_SPAN_TOLERANCE = 1e-9


class ExtrapolationError(InputDataError):
    """Raised when the target grid reaches outside the sampled depth span."""


class DepthOrderError(InputDataError):
    """Raised when profile depths are not strictly increasing."""


def resample_linear(
    depths: np.ndarray, speeds: np.ndarray, grid: DepthGrid
) -> Profile:
    """Piecewise-linear interpolation of knots onto a uniform grid.

    Knot values are reproduced exactly where grid layers coincide with knots.

    Raises:
        DepthOrderError: Depths not strictly increasing or fewer than 2 knots.
        ExtrapolationError: Grid extends beyond the first or last knot.
    """
    z = np.asarray(depths, dtype=np.float64)
    c = np.asarray(speeds, dtype=np.float64)
    if z.ndim != 1 or z.shape != c.shape:
        raise InputDataError("depths and speeds must be 1-D arrays of equal length")
    if z.size < 2:
        raise DepthOrderError(f"need at least 2 depth samples, got {z.size}")
    if not (np.isfinite(z).all() and np.isfinite(c).all()):
        raise InputDataError("depth samples must be finite")
    if (np.diff(z) <= 0).any():
        raise DepthOrderError("depth samples must be strictly increasing")
    if grid.z_min < z[0] - _SPAN_TOLERANCE or grid.z_max > z[-1] + _SPAN_TOLERANCE:
        raise ExtrapolationError(
            f"grid {grid.z_min}..{grid.z_max} m outside sampled span "
            f"{z[0]}..{z[-1]} m"
        )
    return Profile(grid, np.interp(grid.depths(), z, c))


def parse_profile_table(
    stream: Union[IO[str], str],
    grid: DepthGrid,
    missing_value: float = GridDefaults.MISSING_VALUE,
    cell_deg: Optional[float] = None,
    check_physical: bool = True,
) -> RasterStack:
    """Parse a long-form ``date,lat,lon,depth_m,speed_mps`` table.

    Each ``(date, lat, lon)`` group is one profile whose rows must list depths
    in strictly increasing order. Profiles are resampled onto ``grid`` and
    stored under their monthly key; cells without a profile hold
    ``missing_value`` at every layer.

    Raises:
        MalformedRowError: Wrong field count or non-numeric value.
        DuplicateKeyError: Repeated ``(date, lat, lon, depth)``, or two
            profiles of the same cell within one month.
        DepthOrderError: Depths out of order within a profile.
        ExtrapolationError: Profile does not span the grid.
    """
    frame = read_rows(stream, PROFILE_COLUMNS)
    if frame.empty:
        raise MalformedRowError(2, "table holds no data rows")
    dates = parse_dates(frame, "date")
    lat = parse_numbers(frame, "lat")
    lon = parse_numbers(frame, "lon")
    depth = parse_numbers(frame, "depth_m")
    speed = parse_numbers(frame, "speed_mps")
    check_coordinates(frame, lat, lon)

    rows = frame["row"].to_numpy()
    keyed = pd.DataFrame(
        {
            "date": dates,
            "lat": lat,
            "lon": lon,
            "depth": depth,
            "speed": speed,
            "row": rows,
        }
    )
    check_duplicates(keyed, ("date", "lat", "lon", "depth"))
    keyed["month"] = dates.year * 100 + dates.month
    profile_keys = keyed.drop_duplicates(subset=["date", "lat", "lon"])
    check_duplicates(profile_keys, ("month", "lat", "lon"))

    try:
        geometry, lat_idx, lon_idx = infer_geometry(
            lat, lon, cell_deg, GridDefaults.PROFILE_CELL_DEG
        )
    except InputDataError as e:
        raise GeometryError(f"profile table: {e}") from e
    keyed["i"] = lat_idx
    keyed["j"] = lon_idx

    months = sorted({TimeKey(int(m) // 100, int(m) % 100) for m in keyed["month"]})
    position = {(t.year * 100 + t.month): n for n, t in enumerate(months)}
    values = np.full(
        (len(months), geometry.n_lat, geometry.n_lon, grid.H), missing_value
    )

    for (month, i, j), group in keyed.groupby(["month", "i", "j"], sort=True):
        z = group["depth"].to_numpy()
        if (np.diff(z) <= 0).any():
            raise DepthOrderError(
                f"rows {int(group['row'].iloc[0])}-{int(group['row'].iloc[-1])}: "
                "depths must be strictly increasing"
            )
        try:
            profile = resample_linear(z, group["speed"].to_numpy(), grid)
        except InputDataError as e:
            raise type(e)(f"row {int(group['row'].iloc[0])}: {e}") from e
        if check_physical:
            profile.check_physical()
        values[position[int(month)], int(i), int(j)] = profile.speeds

    logger.info(
        f"Parsed profile table: {len(frame)} rows, {len(months)} months, "
        f"{geometry.n_lat}x{geometry.n_lon} cells, H={grid.H}"
    )
    return RasterStack(
        geometry=geometry,
        times=tuple(months),
        values=values,
        missing_value=missing_value,
        variable="sound_speed",
        units="m/s",
        grid=grid,
    )
