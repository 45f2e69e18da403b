"""Per-cell or regional basis sets, their container files and mode export."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from common.blob_io import BlobConfig, BlobFileHandler, PathLike
from common.errors import ConfigError, ContainerFormatError
from common.report_io import write_table
from config.defaults import EofDefaults
from eof.basis import EofBasis, ProfileMatrix, decompose_profiles
from geogrid.types import DepthGrid, GridGeometry, Profile, RasterStack, TimeKey

logger = logging.getLogger(__name__)

BASIS_SCOPES = ("cell", "region")

_BASIS_BLOB = BlobConfig(kind="eof-basis", artifact="basis")
_SET_BLOB = BlobConfig(kind="eof-basis-set", artifact="bases")


def basis_header(basis: EofBasis) -> dict[str, Any]:
    """Header fields of a single basis."""
    return {
        "grid": basis.grid.to_dict(),
        "J": basis.J,
        "K_max": basis.K_max,
        "eigvals": [float(v) for v in basis.eigvals],
    }


def basis_payload(basis: EofBasis) -> np.ndarray:
    """Mean followed by the eigenvectors in column-major order."""
    return np.concatenate([basis.mean.speeds, basis.eigvecs.ravel(order="F")])


def basis_from(header: dict[str, Any], payload: np.ndarray) -> EofBasis:
    """Rebuild a basis from its header fields and payload values."""
    grid = DepthGrid.from_dict(header["grid"])
    H, K = grid.H, int(header["K_max"])
    if payload.size != H * (K + 1):
        raise ContainerFormatError(
            f"basis payload holds {payload.size} values, expected {H * (K + 1)}"
        )
    values = payload.astype(np.float64)
    return EofBasis(
        grid=grid,
        mean=Profile(grid, values[:H].copy()),
        eigvecs=values[H:].reshape((H, K), order="F"),
        eigvals=np.asarray(header["eigvals"], dtype=np.float64),
        J=int(header["J"]),
    )


def write_basis(path: PathLike, basis: EofBasis) -> Path:
    """Write one basis as a container file."""
    return BlobFileHandler(_BASIS_BLOB).write(
        path, basis_header(basis), [basis_payload(basis)]
    )


def read_basis(path: PathLike) -> EofBasis:
    """Read a file written by :func:`write_basis`."""
    header, payload = BlobFileHandler(_BASIS_BLOB).read(path)
    return basis_from(header, payload)


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Bases for the cells of one grid.

    In ``cell`` scope every cell with enough history owns a basis; in
    ``region`` scope one basis is shared by every cell.
    """

    geometry: GridGeometry
    grid: DepthGrid
    scope: str
    bases: dict[tuple[int, int], EofBasis] = field(default_factory=dict)
    train_months: tuple[TimeKey, ...] = ()
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check the scope."""
        if self.scope not in BASIS_SCOPES:
            raise ConfigError(f"basis scope must be one of {BASIS_SCOPES}")

    def lookup(self, i: int, j: int) -> Optional[EofBasis]:
        """Basis for cell ``(i, j)``, or None when the cell has none."""
        if self.scope == "region":
            return self.bases.get((-1, -1))
        return self.bases.get((i, j))

    def __len__(self) -> int:
        """Number of stored bases."""
        return len(self.bases)


def compute_bases(
    profiles: RasterStack,
    train_months: Sequence[TimeKey],
    scope: str = EofDefaults.BASIS_SCOPE,
) -> BasisSet:
    """Decompose the training-month history of every cell, or of the region.

    Cells with fewer than two complete training profiles get no basis.

    Raises:
        ConfigError: Unknown scope, or no training month in the stack.
    """
    if profiles.grid is None:
        raise ConfigError("bases need a profile stack")
    if scope not in BASIS_SCOPES:
        raise ConfigError(f"basis scope must be one of {BASIS_SCOPES}, got {scope!r}")
    months = [t for t in train_months if t in profiles.times]
    if not months:
        raise ConfigError("no training month is present in the profile stack")

    bases: dict[tuple[int, int], EofBasis] = {}
    if scope == "region":
        histories = [
            profiles.history(i, j, months)
            for i in range(profiles.n_lat)
            for j in range(profiles.n_lon)
        ]
        stacked = np.vstack(histories)
        bases[(-1, -1)] = decompose_profiles(
            ProfileMatrix.from_history(profiles.grid, stacked)
        )
        logger.info(f"Computed regional EOF basis from {stacked.shape[0]} profiles")
    else:
        skipped = 0
        for i in range(profiles.n_lat):
            for j in range(profiles.n_lon):
                history = profiles.history(i, j, months)
                if history.shape[0] < 2:
                    skipped += 1
                    continue
                bases[(i, j)] = decompose_profiles(
                    ProfileMatrix.from_history(profiles.grid, history)
                )
        if skipped:
            logger.warning(f"{skipped} cells have fewer than 2 training profiles")
        logger.info(f"Computed {len(bases)} per-cell EOF bases")
    return BasisSet(
        geometry=profiles.geometry,
        grid=profiles.grid,
        scope=scope,
        bases=bases,
        train_months=tuple(months),
    )


def write_basis_set(
    path: PathLike, basis_set: BasisSet, provenance: Optional[dict[str, Any]] = None
) -> Path:
    """Write every basis of a set into one container, cells in row-major order."""
    keys = sorted(basis_set.bases)
    header = {
        "geometry": basis_set.geometry.to_dict(),
        "grid": basis_set.grid.to_dict(),
        "scope": basis_set.scope,
        "train_months": [t.label() for t in basis_set.train_months],
        "cells": [
            {"i": i, "j": j, **basis_header(basis_set.bases[(i, j)])} for i, j in keys
        ],
        "provenance": provenance or basis_set.provenance,
    }
    payloads = [basis_payload(basis_set.bases[k]) for k in keys]
    target = BlobFileHandler(_SET_BLOB).write(path, header, payloads)
    logger.info(f"Wrote {len(keys)} bases ({basis_set.scope} scope) to {target}")
    return target


def read_basis_set(path: PathLike) -> BasisSet:
    """Read a file written by :func:`write_basis_set`."""
    header, payload = BlobFileHandler(_SET_BLOB).read(path)
    grid = DepthGrid.from_dict(header["grid"])
    bases: dict[tuple[int, int], EofBasis] = {}
    offset = 0
    for cell in header["cells"]:
        size = grid.H * (int(cell["K_max"]) + 1)
        chunk = payload[offset : offset + size]
        offset += size
        bases[(int(cell["i"]), int(cell["j"]))] = basis_from(cell, chunk)
    if offset != payload.size:
        raise ContainerFormatError(f"{path}: trailing basis payload values")
    return BasisSet(
        geometry=GridGeometry.from_dict(header["geometry"]),
        grid=grid,
        scope=str(header["scope"]),
        bases=bases,
        train_months=tuple(TimeKey.parse(t) for t in header["train_months"]),
        provenance=dict(header.get("provenance") or {}),
    )


def export_modes(
    path: PathLike,
    basis_set: BasisSet,
    cells: Sequence[tuple[int, int]],
    n_modes: int = EofDefaults.ORDER,
    provenance: Optional[dict[str, Any]] = None,
) -> Path:
    """Write the leading eigenvectors of selected cells versus depth.

    Columns are ``depth_m,lat,lon,e1..eK``; cells without a basis are skipped.
    """
    frames = []
    for i, j in cells:
        basis = basis_set.lookup(i, j)
        if basis is None:
            logger.warning(f"No basis at cell ({i}, {j}); skipped in mode export")
            continue
        k = min(n_modes, basis.K_max)
        frame = pd.DataFrame(
            {
                "depth_m": basis.grid.depths(),
                "lat": basis_set.geometry.lat_at(i) if i >= 0 else np.nan,
                "lon": basis_set.geometry.lon_at(j) if j >= 0 else np.nan,
            }
        )
        for m in range(1, n_modes + 1):
            frame[f"e{m}"] = basis.mode(m) if m <= k else np.nan
        frames.append(frame)
    columns = ["depth_m", "lat", "lon", *(f"e{m}" for m in range(1, n_modes + 1))]
    if frames:
        table = pd.concat(frames, ignore_index=True)[columns]
    else:
        table = pd.DataFrame(columns=columns)
    return write_table(path, table, provenance)


def export_explained_variance(
    path: PathLike,
    basis_set: BasisSet,
    provenance: Optional[dict[str, Any]] = None,
) -> Path:
    """Write ``lat,lon,mode,eigval,explained`` for every stored basis."""
    rows = []
    for (i, j), basis in sorted(basis_set.bases.items()):
        lat = basis_set.geometry.lat_at(i) if i >= 0 else np.nan
        lon = basis_set.geometry.lon_at(j) if j >= 0 else np.nan
        for k, (val, frac) in enumerate(
            zip(basis.eigvals, basis.explained_variance()), start=1
        ):
            rows.append(
                {"lat": lat, "lon": lon, "mode": k, "eigval": val, "explained": frac}
            )
    return write_table(path, pd.DataFrame(rows), provenance)
