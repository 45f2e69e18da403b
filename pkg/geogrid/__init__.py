"""Ingestion, regridding and resampling of SST rasters and profile grids."""

from geogrid.profiles import (
    DepthOrderError,
    ExtrapolationError,
    parse_profile_table,
    resample_linear,
)
from geogrid.raster_io import (
    decode_raster,
    encode_raster,
    read_raster,
    write_profile_table,
    write_raster,
    write_sst_table,
)
from geogrid.sst import (
    EmptyMonthError,
    block_geometry,
    monthly_mean,
    parse_sst_table,
    regrid_block_mean,
)
from geogrid.tables import DuplicateKeyError, MalformedRowError
from geogrid.types import (
    DepthGrid,
    GeoCoord,
    GeometryError,
    GridGeometry,
    Profile,
    RasterStack,
    TimeKey,
)

__all__ = [
    "DepthGrid",
    "DepthOrderError",
    "DuplicateKeyError",
    "EmptyMonthError",
    "ExtrapolationError",
    "GeoCoord",
    "GeometryError",
    "GridGeometry",
    "MalformedRowError",
    "Profile",
    "RasterStack",
    "TimeKey",
    "block_geometry",
    "decode_raster",
    "encode_raster",
    "monthly_mean",
    "parse_profile_table",
    "parse_sst_table",
    "read_raster",
    "regrid_block_mean",
    "resample_linear",
    "write_profile_table",
    "write_raster",
    "write_sst_table",
]
