"""Sliding-window fusion of SST, coordinates and EOF modes into samples."""

from fusion.dataset import (
    SPLITS,
    ChannelStats,
    DatasetManifest,
    EmptyDatasetError,
    FusionDataset,
    SampleEntry,
    SplitRule,
    read_dataset,
    slide_dataset,
    write_dataset,
)
from fusion.neighbors import (
    NEIGHBOR_OFFSETS,
    BoundaryCellError,
    interior_cells,
    is_interior,
    neighbor_coords,
)
from fusion.samples import (
    CHANNELS,
    FusionSample,
    SampleSkipError,
    build_feature_block,
    build_input,
    build_sample,
    same_geometry,
)

__all__ = [
    "CHANNELS",
    "NEIGHBOR_OFFSETS",
    "SPLITS",
    "BoundaryCellError",
    "ChannelStats",
    "DatasetManifest",
    "EmptyDatasetError",
    "FusionDataset",
    "FusionSample",
    "SampleEntry",
    "SampleSkipError",
    "SplitRule",
    "build_feature_block",
    "build_input",
    "build_sample",
    "interior_cells",
    "is_interior",
    "neighbor_coords",
    "read_dataset",
    "same_geometry",
    "slide_dataset",
    "write_dataset",
]
