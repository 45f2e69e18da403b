"""Fused input tensors and their labels."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from common.errors import InputDataError
from config.defaults import ModelDefaults
from eof.basis import EofBasis
from eof.store import BasisSet
from fusion.neighbors import neighbor_coords
from geogrid.types import (
    GeoCoord,
    GeometryError,
    GridGeometry,
    Profile,
    RasterStack,
    TimeKey,
)

logger = logging.getLogger(__name__)

CHANNELS = ("sst", "lat", "lon", "e1", "e2", "e3")
N_EOF_CHANNELS = 3

_GEOMETRY_TOLERANCE = 1e-6


class SampleSkipError(InputDataError):
    """Raised when a sample lacks an ingredient; the sample is skipped."""

    def __init__(self, reason: str, detail: str = "") -> None:
        """Initialise with a short reason tag such as ``missing-sst``."""
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


@dataclass(frozen=True, eq=False)
class FusionSample:
    """Fused input ``x`` of shape ``[H, 6, 8]`` and the centre profile ``y``."""

    x: np.ndarray
    y: Profile
    center: GeoCoord
    time: TimeKey
    cell: tuple[int, int]

    def __post_init__(self) -> None:
        """Check the tensor shape against the label grid."""
        expected = (self.y.grid.H, len(CHANNELS), ModelDefaults.N_NEIGHBORS)
        if self.x.shape != expected:
            raise GeometryError(
                f"sample x has shape {self.x.shape}, expected {expected}"
            )


def same_geometry(a: GridGeometry, b: GridGeometry) -> bool:
    """Geometry equality up to float rounding of the origin and spacing."""
    return (
        a.n_lat == b.n_lat
        and a.n_lon == b.n_lon
        and all(
            abs(x - y) <= _GEOMETRY_TOLERANCE
            for x, y in (
                (a.lat0, b.lat0),
                (a.lon0, b.lon0),
                (a.dlat, b.dlat),
                (a.dlon, b.dlon),
            )
        )
    )


def build_feature_block(
    coord: GeoCoord, sst_value: Optional[float], basis: Optional[EofBasis]
) -> np.ndarray:
    """The ``[H, 6]`` block of one neighbour.

    Columns are SST, latitude and longitude repeated down the depth axis,
    then the first three eigenvectors of the neighbour's basis.

    Raises:
        SampleSkipError: ``missing-sst``, ``missing-basis`` or ``basis-order``.
    """
    if sst_value is None:
        raise SampleSkipError("missing-sst", coord.label())
    if basis is None:
        raise SampleSkipError("missing-basis", coord.label())
    if basis.K_max < N_EOF_CHANNELS:
        raise SampleSkipError(
            "basis-order", f"{coord.label()} has K_max={basis.K_max}"
        )
    block = np.empty((basis.H, len(CHANNELS)))
    block[:, 0] = sst_value
    block[:, 1] = coord.lat
    block[:, 2] = coord.lon
    block[:, 3:] = basis.eigvecs[:, :N_EOF_CHANNELS]
    return block


def build_input(
    center: tuple[int, int], time: TimeKey, sst: RasterStack, bases: BasisSet
) -> np.ndarray:
    """Fused ``[H, 6, 8]`` tensor for a window centre, neighbours in window order.

    Raises:
        BoundaryCellError: If ``center`` is on the grid boundary.
        SampleSkipError: If any neighbour lacks SST or a usable basis.
    """
    geometry = bases.geometry
    if not same_geometry(sst.geometry, geometry):
        raise GeometryError("SST raster and bases are on different grids")
    neighbors = neighbor_coords(center, (geometry.n_lat, geometry.n_lon))
    if time not in sst.times:
        raise SampleSkipError("missing-sst", f"no SST raster for {time.label()}")
    x = np.empty((bases.grid.H, len(CHANNELS), len(neighbors)))
    for k, (i, j) in enumerate(neighbors):
        x[:, :, k] = build_feature_block(
            geometry.coord(i, j), sst.value(time, i, j), bases.lookup(i, j)
        )
    return x


def build_sample(
    center: tuple[int, int],
    time: TimeKey,
    sst: RasterStack,
    profiles: RasterStack,
    bases: BasisSet,
) -> FusionSample:
    """Pair the fused input of a window with the profile at its centre.

    Raises:
        BoundaryCellError: If ``center`` is on the grid boundary.
        SampleSkipError: Any missing ingredient, ``missing-profile`` for the label.
    """
    if not same_geometry(profiles.geometry, bases.geometry):
        raise GeometryError("profile raster and bases are on different grids")
    if profiles.grid != bases.grid:
        raise GeometryError("profile raster and bases use different depth grids")
    x = build_input(center, time, sst, bases)
    coord = bases.geometry.coord(*center)
    if time not in profiles.times:
        raise SampleSkipError("missing-profile", f"no profiles for {time.label()}")
    label = profiles.profile(time, *center)
    if label is None:
        raise SampleSkipError("missing-profile", f"{coord.label()} {time.label()}")
    return FusionSample(x=x, y=label, center=coord, time=time, cell=center)
