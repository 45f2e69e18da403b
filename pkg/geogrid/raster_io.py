"""Raster container files and the CSV forms of SST and profile stacks."""

import logging
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from common.blob_io import BlobConfig, BlobFileHandler, PathLike
from common.errors import ContainerFormatError
from common.report_io import write_table
from geogrid.profiles import PROFILE_COLUMNS
from geogrid.sst import SST_COLUMNS
from geogrid.types import DepthGrid, GridGeometry, RasterStack, TimeKey

logger = logging.getLogger(__name__)


def _handler(artifact: str = "raster") -> BlobFileHandler:
    return BlobFileHandler(BlobConfig(kind="raster", artifact=artifact))


def raster_header(stack: RasterStack) -> dict[str, Any]:
    """Header fields describing ``stack``; values follow time-major order."""
    return {
        "geometry": stack.geometry.to_dict(),
        "variable": stack.variable,
        "units": stack.units,
        "missing_value": stack.missing_value,
        "times": [t.label() for t in stack.times],
        "grid": None if stack.grid is None else stack.grid.to_dict(),
        "provenance": stack.provenance,
    }


def encode_raster(stack: RasterStack) -> bytes:
    """Serialise a stack to the raster container byte stream."""
    return _handler().encode(raster_header(stack), [stack.values])


def decode_raster(raw: bytes, source: str = "<bytes>") -> RasterStack:
    """Inverse of :func:`encode_raster`."""
    header, payload = _handler().decode(raw, source)
    return _stack_from(header, payload, source)


def write_raster(path: PathLike, stack: RasterStack) -> Path:
    """Atomically write a raster file."""
    target = _handler().write(path, raster_header(stack), [stack.values])
    logger.info(
        f"Wrote {stack.variable} raster ({len(stack.times)} times, "
        f"{stack.n_lat}x{stack.n_lon}) to {target}"
    )
    return target


def read_raster(path: PathLike, artifact: str = "raster") -> RasterStack:
    """Read a raster file.

    Raises:
        MissingArtifactError: If the file does not exist.
        ContainerFormatError: If the header and payload disagree.
    """
    header, payload = _handler(artifact).read(path)
    return _stack_from(header, payload, str(path))


def _stack_from(
    header: dict[str, Any], payload: np.ndarray, source: str
) -> RasterStack:
    try:
        geometry = GridGeometry.from_dict(header["geometry"])
        times = tuple(TimeKey.parse(t) for t in header["times"])
        grid_fields = header.get("grid")
        grid = None if grid_fields is None else DepthGrid.from_dict(grid_fields)
        shape: tuple[int, ...] = (len(times), geometry.n_lat, geometry.n_lon)
        if grid is not None:
            shape = (*shape, grid.H)
        if int(np.prod(shape)) != payload.size:
            raise ContainerFormatError(
                f"{source}: payload holds {payload.size} values, geometry needs "
                f"{int(np.prod(shape))}"
            )
        return RasterStack(
            geometry=geometry,
            times=times,
            values=payload.astype(np.float64).reshape(shape),
            missing_value=float(header["missing_value"]),
            variable=str(header["variable"]),
            units=str(header["units"]),
            grid=grid,
            provenance=dict(header.get("provenance") or {}),
        )
    except KeyError as e:
        raise ContainerFormatError(f"{source}: header lacks field {e}") from e


def _cell_frame(stack: RasterStack) -> pd.DataFrame:
    """One row per (time, lat, lon) in time-major, lat-major order."""
    t, i, j = np.meshgrid(
        np.arange(len(stack.times)),
        np.arange(stack.n_lat),
        np.arange(stack.n_lon),
        indexing="ij",
    )
    dates = np.array([time.iso_date() for time in stack.times], dtype=object)
    return pd.DataFrame(
        {
            "date": dates[t.ravel()],
            "lat": stack.geometry.latitudes()[i.ravel()],
            "lon": stack.geometry.longitudes()[j.ravel()],
        }
    )


def write_sst_table(
    path: PathLike, stack: RasterStack, provenance: Optional[dict[str, Any]] = None
) -> Path:
    """Write a scalar stack as a ``date,lat,lon,sst`` CSV; missing cells are empty."""
    frame = _cell_frame(stack)
    values = stack.values.ravel()
    frame["sst"] = np.where(values == stack.missing_value, np.nan, values)
    frame = frame[list(SST_COLUMNS)]
    return write_table(path, frame, provenance)


def write_profile_table(
    path: PathLike, stack: RasterStack, provenance: Optional[dict[str, Any]] = None
) -> Path:
    """Write a profile stack in long form, one row per depth sample.

    Missing profiles are omitted; dates are the first of each month.
    """
    if stack.grid is None:
        raise ContainerFormatError("write_profile_table needs a profile stack")
    cells = _cell_frame(stack)
    keep = ~stack.cell_missing().ravel()
    cells = cells[keep].reset_index(drop=True)
    speeds = stack.values.reshape(-1, stack.grid.H)[keep]
    depths = stack.grid.depths()
    frame = cells.loc[cells.index.repeat(stack.grid.H)].reset_index(drop=True)
    frame["depth_m"] = np.tile(depths, len(cells))
    frame["speed_mps"] = speeds.ravel()
    frame = frame[list(PROFILE_COLUMNS)]
    return write_table(path, frame, provenance)
