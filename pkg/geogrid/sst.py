"""Sea-surface temperature ingestion, monthly averaging and regridding."""

import logging
from typing import IO, Optional, Union

import numpy as np
import pandas as pd

from common.errors import InputDataError
from config.defaults import GridDefaults
from geogrid.tables import (
    MalformedRowError,
    axis_step,
    check_coordinates,
    check_duplicates,
    parse_dates,
    parse_numbers,
    read_rows,
    snap_indices,
)
from geogrid.types import GeometryError, GridGeometry, RasterStack, TimeKey

logger = logging.getLogger(__name__)

SST_COLUMNS = ("date", "lat", "lon", "sst")


class EmptyMonthError(InputDataError):
    """Raised when a month has no rasters to average."""


def masked_mean(
    values: np.ndarray, valid: np.ndarray, axis: tuple[int, ...]
) -> tuple[np.ndarray, np.ndarray]:
    """Mean of ``values`` over ``axis`` counting only ``valid`` entries.

    Returns:
        ``(mean, count)``; ``mean`` is undefined (zero) where ``count == 0``.
    """
    sums = np.where(valid, values, 0.0).sum(axis=axis)
    counts = valid.sum(axis=axis)
    return sums / np.maximum(counts, 1), counts


def infer_geometry(
    lat: np.ndarray, lon: np.ndarray, cell_deg: Optional[float], default_deg: float
) -> tuple[GridGeometry, np.ndarray, np.ndarray]:
    """Derive grid geometry from row coordinates and index every row.

    Spacing per axis is ``cell_deg`` when given, else the smallest spacing
    seen on that axis, else the other axis' spacing, else ``default_deg``.
    """
    lat_step = axis_step(lat)
    lon_step = axis_step(lon)
    dlat = cell_deg or lat_step or lon_step or default_deg
    dlon = cell_deg or lon_step or lat_step or default_deg
    lat0, lon0 = float(lat.min()), float(lon.min())
    rows = snap_indices(lat, lat0, dlat, "latitude")
    cols = snap_indices(lon, lon0, dlon, "longitude")
    geometry = GridGeometry(
        lat0, lon0, dlat, dlon, int(rows.max()) + 1, int(cols.max()) + 1
    )
    return geometry, rows, cols


def parse_sst_table(
    stream: Union[IO[str], str],
    missing_value: float = GridDefaults.MISSING_VALUE,
    cell_deg: Optional[float] = None,
) -> RasterStack:
    """Parse a ``date,lat,lon,sst`` table into daily rasters.

    Rows may arrive in any order. Cells absent from the file, and rows with an
    empty ``sst`` field, hold ``missing_value``.

    Raises:
        MalformedRowError: Wrong field count, non-numeric value, coordinate
            out of range, or a value equal to the missing sentinel.
        DuplicateKeyError: Two rows share ``(date, lat, lon)``.
    """
    frame = read_rows(stream, SST_COLUMNS)
    if frame.empty:
        raise MalformedRowError(2, "table holds no data rows")
    dates = parse_dates(frame, "date")
    lat = parse_numbers(frame, "lat")
    lon = parse_numbers(frame, "lon")
    sst = parse_numbers(frame, "sst", allow_empty=True)
    check_coordinates(frame, lat, lon)

    collide = sst == missing_value
    if collide.any():
        first = int(np.flatnonzero(collide)[0])
        raise MalformedRowError(
            int(frame["row"].iloc[first]),
            f"sst equals the reserved missing sentinel {missing_value}",
        )

    keys = pd.DataFrame(
        {"date": dates, "lat": lat, "lon": lon, "row": frame["row"].to_numpy()}
    )
    check_duplicates(keys, ("date", "lat", "lon"))

    try:
        geometry, rows, cols = infer_geometry(
            lat, lon, cell_deg, GridDefaults.SST_CELL_DEG
        )
    except InputDataError as e:
        raise GeometryError(f"SST table: {e}") from e

    distinct = sorted(set(zip(dates.year, dates.month, dates.day)))
    times = tuple(TimeKey(int(y), int(m), int(d)) for y, m, d in distinct)
    position = {key: n for n, key in enumerate(distinct)}
    t_idx = np.array(
        [position[k] for k in zip(dates.year, dates.month, dates.day)], dtype=np.int64
    )

    values = np.full((len(times), geometry.n_lat, geometry.n_lon), missing_value)
    present = ~np.isnan(sst)
    values[t_idx[present], rows[present], cols[present]] = sst[present]
    logger.info(
        f"Parsed SST table: {len(frame)} rows, {len(times)} days, "
        f"{geometry.n_lat}x{geometry.n_lon} cells"
    )
    return RasterStack(
        geometry=geometry,
        times=times,
        values=values,
        missing_value=missing_value,
        variable="sst",
        units="degC",
    )


def monthly_mean(stack: RasterStack) -> RasterStack:
    """Average daily rasters into monthly rasters, ignoring missing cells.

    A cell missing on every day of a month stays missing.

    Raises:
        EmptyMonthError: If the stack holds no rasters.
    """
    if not stack.times:
        raise EmptyMonthError("cannot average an empty raster stack")
    months = sorted({t.month_key() for t in stack.times})
    out = np.full((len(months), *stack.values.shape[1:]), stack.missing_value)
    valid = stack.valid_mask()
    for n, month in enumerate(months):
        members = [k for k, t in enumerate(stack.times) if t.month_key() == month]
        if not members:
            raise EmptyMonthError(f"no rasters for {month.label()}")
        mean, counts = masked_mean(
            stack.values[members], valid[members], axis=(0,)
        )
        out[n] = np.where(counts > 0, mean, stack.missing_value)
    logger.info(f"Averaged {len(stack.times)} rasters into {len(months)} months")
    return stack.with_values(out, times=tuple(months))


def block_geometry(src: GridGeometry, cell_deg: float) -> GridGeometry:
    """The coarse grid whose cells are aligned blocks of ``src`` cells.

    Raises:
        GeometryError: If ``cell_deg`` is not an integer multiple of the
            source spacing.
    """
    ratio_lat = cell_deg / src.dlat
    ratio_lon = cell_deg / src.dlon
    r_lat, r_lon = round(ratio_lat), round(ratio_lon)
    if abs(ratio_lat - r_lat) > 1e-9 or abs(ratio_lon - r_lon) > 1e-9:
        raise GeometryError(
            f"{cell_deg} deg cells are not an integer block of "
            f"{src.dlat}x{src.dlon} deg source cells"
        )
    n_lat, n_lon = src.n_lat // r_lat, src.n_lon // r_lon
    if n_lat < 1 or n_lon < 1:
        raise GeometryError("source grid smaller than one destination cell")
    return GridGeometry(
        lat0=src.lat0 + (r_lat - 1) * src.dlat / 2,
        lon0=src.lon0 + (r_lon - 1) * src.dlon / 2,
        dlat=cell_deg,
        dlon=cell_deg,
        n_lat=n_lat,
        n_lon=n_lon,
    )


def _block_offset(
    dst_origin: float,
    dst_step: float,
    src_origin: float,
    src_step: float,
    ratio: int,
    n_dst: int,
    n_src: int,
    axis: str,
) -> int:
    edge = ((dst_origin - dst_step / 2) - (src_origin - src_step / 2)) / src_step
    offset = round(edge)
    if abs(edge - offset) > 1e-6 or offset < 0 or offset + n_dst * ratio > n_src:
        raise GeometryError(
            f"{axis}: destination cells do not cover whole blocks of source cells"
        )
    return offset


def regrid_block_mean(src: RasterStack, dst: GridGeometry) -> RasterStack:
    """Average aligned blocks of fine cells into each coarse cell.

    Each destination cell is the mean of the non-missing source cells in its
    block (4x4 for 0.25 deg to 1 deg); an all-missing block stays missing.

    Raises:
        GeometryError: Non-integer block ratio or misaligned cell edges.
    """
    g = src.geometry
    ratio_lat, ratio_lon = dst.dlat / g.dlat, dst.dlon / g.dlon
    r_lat, r_lon = round(ratio_lat), round(ratio_lon)
    if (
        abs(ratio_lat - r_lat) > 1e-9
        or abs(ratio_lon - r_lon) > 1e-9
        or min(r_lat, r_lon) < 1
    ):
        raise GeometryError(
            f"block ratio {ratio_lat:g}x{ratio_lon:g} is not a positive integer"
        )
    oi = _block_offset(
        dst.lat0, dst.dlat, g.lat0, g.dlat, r_lat, dst.n_lat, g.n_lat, "latitude"
    )
    oj = _block_offset(
        dst.lon0, dst.dlon, g.lon0, g.dlon, r_lon, dst.n_lon, g.n_lon, "longitude"
    )

    window = src.values[
        :, oi : oi + dst.n_lat * r_lat, oj : oj + dst.n_lon * r_lon
    ]
    t = window.shape[0]
    trailing = window.shape[3:]
    blocks = window.reshape(t, dst.n_lat, r_lat, dst.n_lon, r_lon, *trailing)
    valid = blocks != src.missing_value
    mean, counts = masked_mean(blocks, valid, axis=(2, 4))
    out = np.where(counts > 0, mean, src.missing_value)
    logger.info(
        f"Regridded {g.n_lat}x{g.n_lon} to {dst.n_lat}x{dst.n_lon} "
        f"by {r_lat}x{r_lon} block mean"
    )
    return src.with_values(out, geometry=dst)
