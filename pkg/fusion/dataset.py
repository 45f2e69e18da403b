"""Sliding-window datasets, their manifest and the dataset container file.

Each sample is stored as ``x`` (``H * 6 * 8`` values, depth-major, then
channel, then neighbour) followed by ``y`` (``H`` values), as little-endian
float32. Inputs are stored raw; the manifest carries per-channel statistics
from the training split, applied when samples are read back.
"""

import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from common.blob_io import BlobConfig, BlobFileHandler, PathLike
from common.errors import InputDataError
from eof.store import BasisSet
from fusion.neighbors import interior_cells
from fusion.samples import CHANNELS, SampleSkipError, build_sample
from geogrid.types import DepthGrid, GeoCoord, GridGeometry, RasterStack, TimeKey

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")

_DATASET_BLOB = BlobConfig(kind="fusion-dataset", dtype="<f4", artifact="dataset")


class EmptyDatasetError(InputDataError):
    """Raised when a region or month set cannot yield any candidate sample."""


@dataclass(frozen=True)
class SplitRule:
    """Tags months listed in ``test_months`` as test, all others as train."""

    test_months: frozenset[TimeKey] = frozenset()

    @classmethod
    def from_months(cls, months: Iterable[TimeKey]) -> "SplitRule":
        """Build from monthly keys."""
        return cls(frozenset(t.month_key() for t in months))

    def tag(self, time: TimeKey) -> str:
        """``test`` or ``train``."""
        return "test" if time.month_key() in self.test_months else "train"


@dataclass(frozen=True)
class SampleEntry:
    """Index record of one stored sample."""

    cell: tuple[int, int]
    center: GeoCoord
    time: TimeKey
    split: str
    offset: int

    def to_dict(self) -> dict[str, Any]:
        """Serialise for the manifest."""
        return {
            "i": self.cell[0],
            "j": self.cell[1],
            "lat": self.center.lat,
            "lon": self.center.lon,
            "time": self.time.label(),
            "split": self.split,
            "offset": self.offset,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SampleEntry":
        """Inverse of :meth:`to_dict`."""
        return cls(
            cell=(int(data["i"]), int(data["j"])),
            center=GeoCoord(float(data["lat"]), float(data["lon"])),
            time=TimeKey.parse(data["time"]),
            split=str(data["split"]),
            offset=int(data["offset"]),
        )


@dataclass(frozen=True, eq=False)
class ChannelStats:
    """Per-channel z-score statistics; channels with zero spread use std 1."""

    mean: np.ndarray
    std: np.ndarray
    flagged: tuple[str, ...] = ()

    @classmethod
    def from_inputs(cls, x: np.ndarray) -> "ChannelStats":
        """Statistics over samples, depths and neighbours of ``[n, H, 6, 8]``."""
        if x.shape[0] == 0:
            logger.warning("No training samples; channel statistics default to 0/1")
            return cls(np.zeros(len(CHANNELS)), np.ones(len(CHANNELS)), CHANNELS)
        values = np.asarray(x, dtype=np.float64)
        mean = values.mean(axis=(0, 1, 3))
        std = values.std(axis=(0, 1, 3))
        flat = std == 0.0
        flagged = tuple(c for c, f in zip(CHANNELS, flat) if f)
        if flagged:
            logger.warning(f"Channels with zero spread, std set to 1: {flagged}")
        return cls(mean, np.where(flat, 1.0, std), flagged)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        """Z-score ``[..., H, 6, 8]`` inputs."""
        values = np.asarray(x, dtype=np.float64)
        return (values - self.mean[:, None]) / self.std[:, None]

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`normalize`."""
        return z * self.std[:, None] + self.mean[:, None]

    def to_dict(self) -> dict[str, Any]:
        """Serialise for the manifest."""
        return {
            "channels": list(CHANNELS),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "flagged": list(self.flagged),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ChannelStats":
        """Inverse of :meth:`to_dict`."""
        return cls(
            np.asarray(data["mean"], dtype=np.float64),
            np.asarray(data["std"], dtype=np.float64),
            tuple(data.get("flagged", ())),
        )


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    """Sample index, grids, split tags and normalisation statistics."""

    grid: DepthGrid
    geometry: GridGeometry
    entries: tuple[SampleEntry, ...]
    stats: ChannelStats
    candidates: int = 0
    skipped: dict[str, int] = field(default_factory=dict)
    provenance: dict[str, Any] = field(default_factory=dict)

    @property
    def sample_values(self) -> int:
        """Stored values per sample."""
        return self.grid.H * (len(CHANNELS) * 8 + 1)

    def indices(self, split: str) -> list[int]:
        """Positions of the samples tagged ``split``."""
        return [n for n, e in enumerate(self.entries) if e.split == split]

    def to_header(self) -> dict[str, Any]:
        """Serialise for the container header."""
        return {
            "grid": self.grid.to_dict(),
            "geometry": self.geometry.to_dict(),
            "stats": self.stats.to_dict(),
            "candidates": self.candidates,
            "skipped": dict(sorted(self.skipped.items())),
            "samples": [e.to_dict() for e in self.entries],
            "provenance": self.provenance,
        }

    @classmethod
    def from_header(cls, header: dict[str, Any]) -> "DatasetManifest":
        """Inverse of :meth:`to_header`."""
        return cls(
            grid=DepthGrid.from_dict(header["grid"]),
            geometry=GridGeometry.from_dict(header["geometry"]),
            entries=tuple(SampleEntry.from_dict(e) for e in header["samples"]),
            stats=ChannelStats.from_dict(header["stats"]),
            candidates=int(header.get("candidates", 0)),
            skipped={str(k): int(v) for k, v in header.get("skipped", {}).items()},
            provenance=dict(header.get("provenance") or {}),
        )


class FusionDataset:
    """Raw samples plus their manifest.

    ``x`` is ``[n, H, 6, 8]`` and ``y`` is ``[n, H]``, both float32; they may
    be views into a memory-mapped file.
    """

    def __init__(
        self, manifest: DatasetManifest, x: np.ndarray, y: np.ndarray
    ) -> None:
        """Initialise from a manifest and matching sample arrays."""
        n, H = len(manifest.entries), manifest.grid.H
        if x.shape != (n, H, len(CHANNELS), 8) or y.shape != (n, H):
            raise InputDataError(
                f"dataset arrays {x.shape}/{y.shape} do not match "
                f"{n} samples of H={H}"
            )
        self.manifest = manifest
        self.x = x
        self.y = y

    def __len__(self) -> int:
        """Sample count."""
        return len(self.manifest.entries)

    def indices(self, split: str) -> list[int]:
        """Positions of the samples tagged ``split``."""
        return self.manifest.indices(split)

    def inputs(self, index: Sequence[int]) -> np.ndarray:
        """Normalised float64 inputs ``[len(index), H, 6, 8]``."""
        return self.manifest.stats.normalize(self.x[list(index)])

    def raw_inputs(self, index: Sequence[int]) -> np.ndarray:
        """Stored inputs widened to float64."""
        return np.asarray(self.x[list(index)], dtype=np.float64)

    def labels(self, index: Sequence[int]) -> np.ndarray:
        """Labels widened to float64, ``[len(index), H]``."""
        return np.asarray(self.y[list(index)], dtype=np.float64)

    def records(self) -> np.ndarray:
        """``[n, H * 49]`` float32 records in file layout."""
        n, H = len(self), self.manifest.grid.H
        return np.concatenate(
            [
                np.asarray(self.x).reshape(n, H * len(CHANNELS) * 8),
                np.asarray(self.y).reshape(n, H),
            ],
            axis=1,
        ).astype(np.float32)


def slide_dataset(
    sst: RasterStack,
    profiles: RasterStack,
    months: Sequence[TimeKey],
    bases: BasisSet,
    split: SplitRule,
    provenance: Optional[dict[str, Any]] = None,
) -> FusionDataset:
    """Slide a 3x3 window over every interior cell for every month.

    Candidates are visited month by month, cells in row-major order. Samples
    missing any ingredient are skipped and logged with their reason.

    Raises:
        EmptyDatasetError: If the region is smaller than 3x3 or no month is given.
    """
    geometry = bases.geometry
    shape = (geometry.n_lat, geometry.n_lon)
    if shape[0] < 3 or shape[1] < 3:
        raise EmptyDatasetError(f"region {shape[0]}x{shape[1]} is smaller than 3x3")
    ordered = sorted({t.month_key() for t in months})
    if not ordered:
        raise EmptyDatasetError("no months selected")

    cells = interior_cells(shape)
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    entries: list[SampleEntry] = []
    skipped: Counter[str] = Counter()
    record_bytes = bases.grid.H * (len(CHANNELS) * 8 + 1) * 4
    for time in ordered:
        for cell in cells:
            try:
                sample = build_sample(cell, time, sst, profiles, bases)
            except SampleSkipError as e:
                skipped[e.reason] += 1
                logger.warning(f"Skipped sample {cell} {time.label()}: {e}")
                continue
            entries.append(
                SampleEntry(
                    cell=cell,
                    center=sample.center,
                    time=time,
                    split=split.tag(time),
                    offset=len(entries) * record_bytes,
                )
            )
            xs.append(sample.x.astype(np.float32))
            ys.append(sample.y.speeds.astype(np.float32))

    H = bases.grid.H
    x = np.stack(xs) if xs else np.zeros((0, H, len(CHANNELS), 8), np.float32)
    y = np.stack(ys) if ys else np.zeros((0, H), np.float32)
    train = [n for n, e in enumerate(entries) if e.split == "train"]
    manifest = DatasetManifest(
        grid=bases.grid,
        geometry=geometry,
        entries=tuple(entries),
        stats=ChannelStats.from_inputs(x[train]),
        candidates=len(cells) * len(ordered),
        skipped=dict(skipped),
        provenance=dict(provenance or {}),
    )
    logger.info(
        f"Built {len(entries)} of {manifest.candidates} candidate samples "
        f"({len(train)} train, {len(entries) - len(train)} test)"
    )
    return FusionDataset(manifest, x, y)


def write_dataset(path: PathLike, dataset: FusionDataset) -> Path:
    """Write a dataset container; the manifest is the single header line."""
    target = BlobFileHandler(_DATASET_BLOB).write(
        path, dataset.manifest.to_header(), [dataset.records()]
    )
    logger.info(f"Wrote {len(dataset)} samples to {target}")
    return target


def read_dataset(path: PathLike) -> FusionDataset:
    """Memory-map a dataset container.

    Raises:
        MissingArtifactError: If the file does not exist.
        ContainerFormatError: If the header or payload is malformed.
    """
    header, payload = BlobFileHandler(_DATASET_BLOB).open_memmap(path)
    manifest = DatasetManifest.from_header(header)
    n, H = len(manifest.entries), manifest.grid.H
    if payload.size != n * manifest.sample_values:
        raise InputDataError(
            f"{path}: payload holds {payload.size} values, "
            f"manifest describes {n * manifest.sample_values}"
        )
    records = payload.reshape(n, manifest.sample_values)
    x = records[:, : H * len(CHANNELS) * 8].reshape(n, H, len(CHANNELS), 8)
    y = records[:, H * len(CHANNELS) * 8 :]
    return FusionDataset(manifest, x, y)
