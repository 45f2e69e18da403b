"""In-memory structures for gridded SST and sound speed data."""

import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from common.errors import InputDataError
from config.defaults import GridDefaults

_TIME_PATTERN = re.compile(r"^(\d{4})-(\d{2})(?:-(\d{2}))?$")
_GRID_TOLERANCE = 1e-9


class GeometryError(InputDataError):
    """Raised when grid geometry is inconsistent or out of range."""


@dataclass(frozen=True)
class GeoCoord:
    """A point in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        """Validate latitude and longitude ranges."""
        if not -90.0 <= self.lat <= 90.0:
            raise GeometryError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 < self.lon <= 180.0:
            raise GeometryError(f"longitude {self.lon} outside (-180, 180]")

    def label(self) -> str:
        """Return the table label, e.g. ``7.5N 156.5E``."""
        ns = "N" if self.lat >= 0 else "S"
        ew = "E" if self.lon >= 0 else "W"
        return f"{abs(self.lat):g}{ns} {abs(self.lon):g}{ew}"


@dataclass(frozen=True, order=True)
class TimeKey:
    """Calendar key; ``day == 0`` marks a monthly key."""

    year: int
    month: int
    day: int = 0

    def __post_init__(self) -> None:
        """Validate month and day ranges."""
        if not 1 <= self.month <= 12:
            raise InputDataError(f"month {self.month} outside [1, 12]")
        if not 0 <= self.day <= 31:
            raise InputDataError(f"day {self.day} outside [0, 31]")

    @property
    def is_monthly(self) -> bool:
        """True for monthly keys."""
        return self.day == 0

    def month_key(self) -> "TimeKey":
        """Return the monthly key containing this time."""
        return TimeKey(self.year, self.month)

    def label(self) -> str:
        """Return ``YYYY-MM`` for monthly keys, ``YYYY-MM-DD`` otherwise."""
        if self.is_monthly:
            return f"{self.year:04d}-{self.month:02d}"
        return f"{self.year:04d}-{self.month:02d}-{self.day:02d}"

    def iso_date(self) -> str:
        """Return a full ISO date; monthly keys map to the first of the month."""
        return f"{self.year:04d}-{self.month:02d}-{max(self.day, 1):02d}"

    @classmethod
    def parse(cls, text: str) -> "TimeKey":
        """Parse ``YYYY-MM`` or ``YYYY-MM-DD``."""
        match = _TIME_PATTERN.match(text.strip())
        if not match:
            raise InputDataError(f"unparseable time key: {text!r}")
        year, month, day = match.groups()
        return cls(int(year), int(month), int(day) if day else 0)


@dataclass(frozen=True)
class DepthGrid:
    """Uniform vertical grid, inclusive of both ends."""

    z_min: float = GridDefaults.DEPTH_Z_MIN
    z_max: float = GridDefaults.DEPTH_Z_MAX
    step: float = GridDefaults.DEPTH_STEP

    def __post_init__(self) -> None:
        """Check that the span is an exact multiple of the step."""
        if self.step <= 0:
            raise GeometryError(f"depth step must be positive, got {self.step}")
        if self.z_max < self.z_min:
            raise GeometryError(f"z_max {self.z_max} below z_min {self.z_min}")
        layers = (self.z_max - self.z_min) / self.step
        if abs(layers - round(layers)) > _GRID_TOLERANCE:
            raise GeometryError(
                f"depth span {self.z_min}..{self.z_max} is not a multiple of "
                f"step {self.step}"
            )

    @property
    def H(self) -> int:
        """Number of layers."""
        return round((self.z_max - self.z_min) / self.step) + 1

    def depths(self) -> np.ndarray:
        """Layer depths in metres."""
        return self.z_min + self.step * np.arange(self.H, dtype=np.float64)

    def band(self, top: float, bottom: float) -> np.ndarray:
        """Boolean mask of layers inside ``[top, bottom]``."""
        z = self.depths()
        return (z >= top - _GRID_TOLERANCE) & (z <= bottom + _GRID_TOLERANCE)

    def to_dict(self) -> dict[str, float]:
        """Serialise for file headers."""
        return {"z_min": self.z_min, "z_max": self.z_max, "step": self.step}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DepthGrid":
        """Inverse of :meth:`to_dict`."""
        return cls(float(data["z_min"]), float(data["z_max"]), float(data["step"]))

    @classmethod
    def parse(cls, text: str) -> "DepthGrid":
        """Parse the ``zmin:zmax:step`` flag form."""
        parts = text.split(":")
        if len(parts) != 3:
            raise GeometryError(f"depth grid must be zmin:zmax:step, got {text!r}")
        try:
            z_min, z_max, step = (float(p) for p in parts)
        except ValueError as e:
            raise GeometryError(f"depth grid must be numeric: {text!r}") from e
        return cls(z_min, z_max, step)


@dataclass(frozen=True, eq=False)
class Profile:
    """Sound speed versus depth on a :class:`DepthGrid`."""

    grid: DepthGrid
    speeds: np.ndarray

    def __post_init__(self) -> None:
        """Check length and finiteness."""
        speeds = np.asarray(self.speeds, dtype=np.float64)
        object.__setattr__(self, "speeds", speeds)
        if speeds.shape != (self.grid.H,):
            raise GeometryError(
                f"profile has shape {speeds.shape}, grid expects ({self.grid.H},)"
            )
        if not np.isfinite(speeds).all():
            raise InputDataError("profile contains non-finite values")

    def check_physical(self) -> None:
        """Raise if any value lies outside the plausible sound speed window."""
        low, high = GridDefaults.SPEED_MIN, GridDefaults.SPEED_MAX
        if not ((self.speeds > low) & (self.speeds < high)).all():
            raise InputDataError(
                f"profile values outside ({low}, {high}) m/s: "
                f"min {self.speeds.min():.3f}, max {self.speeds.max():.3f}"
            )


@dataclass(frozen=True)
class GridGeometry:
    """Regular lat/lon grid described by its first cell centre and spacing."""

    lat0: float
    lon0: float
    dlat: float
    dlon: float
    n_lat: int
    n_lon: int

    def __post_init__(self) -> None:
        """Validate spacing, counts and the coordinate range of every centre."""
        if self.dlat <= 0 or self.dlon <= 0:
            raise GeometryError("grid spacing must be positive")
        if self.n_lat < 1 or self.n_lon < 1:
            raise GeometryError("grid must hold at least one cell")
        GeoCoord(self.lat0, self.lon0)
        GeoCoord(self.lat_at(self.n_lat - 1), self.lon_at(self.n_lon - 1))

    def lat_at(self, i: int) -> float:
        """Latitude of row ``i``."""
        return self.lat0 + i * self.dlat

    def lon_at(self, j: int) -> float:
        """Longitude of column ``j``."""
        return self.lon0 + j * self.dlon

    def coord(self, i: int, j: int) -> GeoCoord:
        """Cell centre of ``(i, j)``."""
        return GeoCoord(self.lat_at(i), self.lon_at(j))

    def latitudes(self) -> np.ndarray:
        """All row latitudes."""
        return self.lat0 + self.dlat * np.arange(self.n_lat)

    def longitudes(self) -> np.ndarray:
        """All column longitudes."""
        return self.lon0 + self.dlon * np.arange(self.n_lon)

    def index_of(self, coord: GeoCoord) -> tuple[int, int]:
        """Return the ``(i, j)`` of the cell centred on ``coord``."""
        fi = (coord.lat - self.lat0) / self.dlat
        fj = (coord.lon - self.lon0) / self.dlon
        i, j = round(fi), round(fj)
        if (
            abs(fi - i) > 1e-6
            or abs(fj - j) > 1e-6
            or not (0 <= i < self.n_lat and 0 <= j < self.n_lon)
        ):
            raise GeometryError(f"{coord.label()} is not a cell centre of the grid")
        return i, j

    def to_dict(self) -> dict[str, float]:
        """Serialise for file headers."""
        return {
            "lat0": self.lat0,
            "lon0": self.lon0,
            "dlat": self.dlat,
            "dlon": self.dlon,
            "n_lat": self.n_lat,
            "n_lon": self.n_lon,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GridGeometry":
        """Inverse of :meth:`to_dict`."""
        return cls(
            float(data["lat0"]),
            float(data["lon0"]),
            float(data["dlat"]),
            float(data["dlon"]),
            int(data["n_lat"]),
            int(data["n_lon"]),
        )


@dataclass(frozen=True, eq=False)
class RasterStack:
    """Time-indexed rasters of one variable.

    ``values`` is ``[T, n_lat, n_lon]`` for scalar fields and
    ``[T, n_lat, n_lon, H]`` for profile stacks (``grid`` set). Missing cells
    hold ``missing_value``; a profile cell is missing when every layer is.
    """

    geometry: GridGeometry
    times: tuple[TimeKey, ...]
    values: np.ndarray
    missing_value: float = GridDefaults.MISSING_VALUE
    variable: str = "sst"
    units: str = "degC"
    grid: Optional[DepthGrid] = None
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check array dimensions against geometry, times and grid."""
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", tuple(self.times))
        expected = (len(self.times), self.geometry.n_lat, self.geometry.n_lon)
        if self.grid is not None:
            expected = (*expected, self.grid.H)
        if values.shape != expected:
            raise GeometryError(
                f"raster values have shape {values.shape}, expected {expected}"
            )
        if len(set(self.times)) != len(self.times):
            raise GeometryError("raster times must be distinct")
        if math.isnan(self.missing_value):
            raise GeometryError("missing sentinel must be a finite reserved value")

    @property
    def n_lat(self) -> int:
        """Row count (M)."""
        return self.geometry.n_lat

    @property
    def n_lon(self) -> int:
        """Column count (N)."""
        return self.geometry.n_lon

    @property
    def is_profile_stack(self) -> bool:
        """True when values carry a depth axis."""
        return self.grid is not None

    def valid_mask(self) -> np.ndarray:
        """Element-wise mask of non-missing values."""
        return self.values != self.missing_value

    def cell_missing(self) -> np.ndarray:
        """``[T, n_lat, n_lon]`` mask of missing cells."""
        valid = self.valid_mask()
        if self.is_profile_stack:
            return ~valid.any(axis=-1)
        return ~valid

    def time_index(self, time: TimeKey) -> int:
        """Position of ``time`` in the stack."""
        try:
            return self.times.index(time)
        except ValueError as e:
            raise InputDataError(f"time {time.label()} not in raster stack") from e

    def value(self, time: TimeKey, i: int, j: int) -> Optional[float]:
        """Scalar value at a cell, or None when missing."""
        v = float(self.values[self.time_index(time), i, j])
        return None if v == self.missing_value else v

    def profile(self, time: TimeKey, i: int, j: int) -> Optional[Profile]:
        """Profile at a cell, or None when missing or partially missing."""
        if self.grid is None:
            raise GeometryError(f"{self.variable} stack carries no depth axis")
        speeds = self.values[self.time_index(time), i, j]
        if (speeds == self.missing_value).any():
            return None
        return Profile(self.grid, speeds.copy())

    def history(
        self, i: int, j: int, times: Optional[list[TimeKey]] = None
    ) -> np.ndarray:
        """``[J, H]`` array of the complete profiles at a cell over ``times``."""
        if self.grid is None:
            raise GeometryError(f"{self.variable} stack carries no depth axis")
        wanted = self.times if times is None else times
        rows = []
        for time in wanted:
            if time not in self.times:
                continue
            speeds = self.values[self.times.index(time), i, j]
            if not (speeds == self.missing_value).any():
                rows.append(speeds)
        if not rows:
            return np.zeros((0, self.grid.H))
        return np.vstack(rows)

    def with_values(self, values: np.ndarray, **changes: Any) -> "RasterStack":
        """Copy with new values (and optionally other fields)."""
        fields = {
            "geometry": self.geometry,
            "times": self.times,
            "values": values,
            "missing_value": self.missing_value,
            "variable": self.variable,
            "units": self.units,
            "grid": self.grid,
            "provenance": dict(self.provenance),
        }
        fields.update(changes)
        return RasterStack(**fields)

    def crop(
        self, lat_min: float, lat_max: float, lon_min: float, lon_max: float
    ) -> "RasterStack":
        """Cells whose centres lie inside the closed bounds.

        Raises:
            GeometryError: If no cell centre falls inside the bounds.
        """
        g = self.geometry
        lats, lons = g.latitudes(), g.longitudes()
        tol = _GRID_TOLERANCE
        rows = np.flatnonzero((lats >= lat_min - tol) & (lats <= lat_max + tol))
        cols = np.flatnonzero((lons >= lon_min - tol) & (lons <= lon_max + tol))
        if rows.size == 0 or cols.size == 0:
            raise GeometryError(
                f"bounds {lat_min}..{lat_max}, {lon_min}..{lon_max} hold no cell"
            )
        i0, i1 = int(rows[0]), int(rows[-1]) + 1
        j0, j1 = int(cols[0]), int(cols[-1]) + 1
        geometry = GridGeometry(
            g.lat_at(i0), g.lon_at(j0), g.dlat, g.dlon, i1 - i0, j1 - j0
        )
        return self.with_values(
            self.values[:, i0:i1, j0:j1].copy(), geometry=geometry
        )
