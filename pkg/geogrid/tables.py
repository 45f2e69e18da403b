"""Strict CSV ingestion shared by the SST and profile parsers.

Lines are read whole and split on commas so that a row with too few fields
is rejected instead of being padded; every error names the offending row
(the header is row 1 unless ``#`` provenance lines precede it).
"""

from collections.abc import Sequence
from typing import IO, Union

import numpy as np
import pandas as pd

from common.errors import InputDataError

_DATE_PATTERN = r"\d{4}-\d{2}-\d{2}"
_LINE_SEPARATOR = "\x1f"


class MalformedRowError(InputDataError):
    """Raised for a row with the wrong field count or an unparseable field."""

    def __init__(self, row: int, reason: str) -> None:
        """Initialise with the 1-based row number and a reason."""
        self.row: int = row
        self.reason: str = reason
        super().__init__(f"row {row}: {reason}")


class DuplicateKeyError(InputDataError):
    """Raised when two rows share the same key."""

    def __init__(self, row: int, first_row: int, key: str) -> None:
        """Initialise with both row numbers and the duplicated key."""
        self.row: int = row
        self.first_row: int = first_row
        self.key: str = key
        super().__init__(
            f"row {row}: duplicate key {key} (first seen on row {first_row})"
        )


def read_rows(
    stream: Union[IO[str], str], columns: Sequence[str]
) -> pd.DataFrame:
    """Read a headed CSV into string columns plus a ``row`` column.

    Args:
        stream: Text stream or path.
        columns: Exact expected header.

    Returns:
        DataFrame with one string column per header field and an integer
        ``row`` column holding 1-based row numbers.

    Raises:
        MalformedRowError: On a bad header or a row with the wrong field count.
    """
    try:
        lines = pd.read_csv(
            stream,
            sep=_LINE_SEPARATOR,
            header=None,
            names=["raw"],
            dtype=str,
            na_filter=False,
            skip_blank_lines=True,
            quoting=3,
        )
    except pd.errors.EmptyDataError as e:
        raise MalformedRowError(1, "empty table") from e
    except pd.errors.ParserError as e:
        raise MalformedRowError(0, f"unreadable table: {e}") from e

    # leading "#" lines carry provenance and are not part of the table
    skip = int(lines["raw"].str.startswith("#").astype(int).cumprod().sum())
    if len(lines) <= skip:
        raise MalformedRowError(skip + 1, "empty table")
    header = [h.strip() for h in lines["raw"].iloc[skip].split(",")]
    if header != list(columns):
        raise MalformedRowError(
            skip + 1, f"header must be {','.join(columns)}, got {','.join(header)}"
        )

    body = lines["raw"].iloc[skip + 1 :]
    parts = body.str.split(",")
    counts = parts.str.len().to_numpy()
    bad = np.flatnonzero(counts != len(columns))
    if bad.size:
        first = int(bad[0])
        raise MalformedRowError(
            first + skip + 2,
            f"expected {len(columns)} fields, found {int(counts[first])}",
        )

    if len(body):
        frame = pd.DataFrame(parts.tolist(), columns=list(columns))
    else:
        frame = pd.DataFrame({c: pd.Series(dtype=str) for c in columns})
    for column in columns:
        frame[column] = frame[column].str.strip()
    frame["row"] = np.arange(skip + 2, skip + len(frame) + 2)
    return frame


def parse_numbers(
    frame: pd.DataFrame, column: str, allow_empty: bool = False
) -> np.ndarray:
    """Parse a column to float64; empty fields become NaN when allowed.

    Raises:
        MalformedRowError: On a non-numeric or non-finite field.
    """
    raw = frame[column]
    empty = (raw == "").to_numpy()
    values = pd.to_numeric(raw.where(~empty), errors="coerce").to_numpy(
        dtype=np.float64
    )
    bad = ~np.isfinite(values) & ~(empty & allow_empty)
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise MalformedRowError(
            int(frame["row"].iloc[first]),
            f"{column} is not a finite number: {raw.iloc[first]!r}",
        )
    return values


def parse_dates(frame: pd.DataFrame, column: str) -> pd.DatetimeIndex:
    """Parse a ``YYYY-MM-DD`` column.

    Raises:
        MalformedRowError: On a field that is not a valid calendar date.
    """
    raw = frame[column]
    shaped = raw.str.fullmatch(_DATE_PATTERN).fillna(False).to_numpy()
    dates = pd.to_datetime(raw.where(shaped), format="%Y-%m-%d", errors="coerce")
    bad = ~shaped | dates.isna().to_numpy()
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise MalformedRowError(
            int(frame["row"].iloc[first]),
            f"{column} is not a YYYY-MM-DD date: {raw.iloc[first]!r}",
        )
    return pd.DatetimeIndex(dates)


def check_coordinates(frame: pd.DataFrame, lat: np.ndarray, lon: np.ndarray) -> None:
    """Reject latitudes outside [-90, 90] and longitudes outside (-180, 180]."""
    bad = (lat < -90.0) | (lat > 90.0) | (lon <= -180.0) | (lon > 180.0)
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise MalformedRowError(
            int(frame["row"].iloc[first]),
            f"coordinate ({lat[first]}, {lon[first]}) out of range",
        )


def check_duplicates(frame: pd.DataFrame, keys: Sequence[str]) -> None:
    """Raise on the first row whose key columns repeat an earlier row."""
    dup = frame.duplicated(subset=list(keys), keep="first").to_numpy()
    if not dup.any():
        return
    first = int(np.flatnonzero(dup)[0])
    key_values = tuple(frame[k].iloc[first] for k in keys)
    same = (frame[list(keys)] == pd.Series(key_values, index=list(keys))).all(axis=1)
    original = int(frame["row"][same.to_numpy()].iloc[0])
    raise DuplicateKeyError(
        int(frame["row"].iloc[first]), original, ",".join(map(str, key_values))
    )


def axis_step(values: np.ndarray) -> float:
    """Smallest positive spacing between distinct values; 0 when only one."""
    distinct = np.unique(values)
    if distinct.size < 2:
        return 0.0
    return float(np.diff(distinct).min())


def snap_indices(
    values: np.ndarray, origin: float, step: float, axis: str
) -> np.ndarray:
    """Map coordinates to integer cell indices, rejecting off-grid values."""
    raw = (values - origin) / step
    idx = np.rint(raw)
    if np.abs(raw - idx).max(initial=0.0) > 1e-6:
        raise InputDataError(f"{axis} values do not lie on a regular {step} grid")
    return idx.astype(np.int64)
