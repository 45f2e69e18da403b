"""Reference estimators: climatological mean and spatial interpolation (SITP)."""

from collections.abc import Sequence

import numpy as np

from common.errors import InputDataError
from config.defaults import EvalDefaults
from eof.basis import ProfileMatrix
from geogrid.types import GeoCoord, Profile


class NoHistoryError(InputDataError):
    """Raised when a cell has no training-period profile to average."""


class NoNeighborsError(InputDataError):
    """Raised when spatial interpolation has no neighbour profile to use."""


def haversine_km(
    a: GeoCoord, b: GeoCoord, radius_km: float = EvalDefaults.EARTH_RADIUS_KM
) -> float:
    """Great-circle distance on a spherical Earth."""
    lat1, lon1, lat2, lon2 = map(np.radians, (a.lat, a.lon, b.lat, b.lon))
    h = (
        np.sin((lat2 - lat1) / 2.0) ** 2
        + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    )
    return float(2.0 * radius_km * np.arcsin(np.sqrt(h)))


def idw_weights(
    distances: np.ndarray, power: float = EvalDefaults.IDW_POWER
) -> np.ndarray:
    """Normalised inverse-distance weights ``d**-power / sum(d**-power)``."""
    distances = np.asarray(distances, dtype=np.float64)
    if (distances <= 0).any():
        raise InputDataError("inverse-distance weighting needs positive distances")
    raw = distances**-power
    return raw / raw.sum()


def sitp(
    profiles: Sequence[Profile],
    coords: Sequence[GeoCoord],
    target: GeoCoord,
    power: float = EvalDefaults.IDW_POWER,
) -> Profile:
    """Per-depth inverse-distance weighting of the available neighbours.

    Args:
        profiles: Neighbour profiles at the estimation month.
        coords: Position of each neighbour, aligned with ``profiles``.
        target: Point to estimate; must differ from every neighbour.
        power: Distance exponent.

    Raises:
        NoNeighborsError: If ``profiles`` is empty.
        InputDataError: On misaligned inputs, differing grids or a neighbour
            located at the target.
    """
    if not profiles:
        raise NoNeighborsError(f"no neighbour profiles around {target.label()}")
    if len(profiles) != len(coords):
        raise InputDataError(
            f"{len(profiles)} neighbour profiles but {len(coords)} coordinates"
        )
    grid = profiles[0].grid
    if any(p.grid != grid for p in profiles):
        raise InputDataError("neighbour profiles do not share a depth grid")
    weights = idw_weights(np.array([haversine_km(c, target) for c in coords]), power)
    speeds = np.stack([p.speeds for p in profiles])
    return Profile(grid, weights @ speeds)


def mean_method(history: ProfileMatrix) -> Profile:
    """Per-depth mean of a cell's training-period profiles.

    Raises:
        NoHistoryError: If the cell has no training profile.
    """
    if history.J == 0:
        raise NoHistoryError("no training-period profile at the target cell")
    return Profile(history.grid, history.columns.mean(axis=1))
