"""Estimator base class shared by the network and reference methods."""

import logging
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from common.errors import InputDataError
from fusion.dataset import FusionDataset
from geogrid.types import RasterStack, TimeKey
from trainer.checkpoint import Checkpoint

logger = logging.getLogger(__name__)


@dataclass
class EvalContext:
    """Inputs every estimator may draw on.

    ``profiles`` is the gridded profile stack the dataset was built from;
    the reference methods read neighbour and history profiles from it.
    """

    dataset: FusionDataset
    profiles: RasterStack
    checkpoints: dict[str, Checkpoint] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check that the profile stack matches the dataset grids."""
        if self.profiles.grid != self.dataset.manifest.grid:
            raise InputDataError("profile stack and dataset use different depth grids")
        ours, theirs = self.profiles.geometry, self.dataset.manifest.geometry
        if (ours.n_lat, ours.n_lon) != (theirs.n_lat, theirs.n_lon):
            raise InputDataError("profile stack and dataset cover different regions")

    def train_months(self) -> list[TimeKey]:
        """Months tagged ``train`` in the dataset, ascending."""
        entries = self.dataset.manifest.entries
        return sorted({e.time for e in entries if e.split == "train"})


class BaseEstimator(ABC):
    """Produces one profile estimate per stored sample."""

    def __init__(self, method: str, column: str, context: EvalContext) -> None:
        """Initialise with the report label, the CSV column slug and the inputs."""
        self.method: str = method
        self.column: str = column
        self.context: EvalContext = context

    @abstractmethod
    def estimate(self, index: Sequence[int]) -> np.ndarray:
        """Estimated profiles ``[len(index), H]`` for the samples at ``index``."""

    def handle_error(self, error: Exception) -> None:
        """Log a failed estimation with its method label."""
        error_type = error.__class__.__name__
        logger.error(
            f"Estimator error [{error_type}] {self.method}: {error}", exc_info=True
        )
