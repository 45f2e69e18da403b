"""The four compared methods: two network variants, SITP and MEAN."""

import logging
from collections.abc import Sequence
from typing import Optional

import numpy as np

from common.errors import ConfigError, MissingArtifactError
from config.defaults import EvalDefaults
from eof.basis import ProfileMatrix
from evalkit.base_estimator import BaseEstimator, EvalContext
from evalkit.baselines import NoNeighborsError, mean_method, sitp
from fusion.neighbors import neighbor_coords
from geogrid.types import Profile
from model.network import forward

logger = logging.getLogger(__name__)

PREDICT_BATCH = 64


class NetworkEstimator(BaseEstimator):
    """Runs a trained checkpoint over the stored, normalised inputs."""

    def __init__(
        self, method: str, column: str, context: EvalContext, variant: str
    ) -> None:
        """Initialise with the checkpoint key (``attention`` or ``cnn``)."""
        super().__init__(method, column, context)
        checkpoint = context.checkpoints.get(variant)
        if checkpoint is None:
            raise MissingArtifactError(f"checkpoint for {method} ({variant})")
        if checkpoint.model_config.H != context.dataset.manifest.grid.H:
            raise ConfigError(
                f"{method} checkpoint expects H={checkpoint.model_config.H}, "
                f"dataset has H={context.dataset.manifest.grid.H}"
            )
        self.checkpoint = checkpoint
        self.stats = checkpoint.stats or context.dataset.manifest.stats

    def estimate(self, index: Sequence[int]) -> np.ndarray:
        """Batched forward passes."""
        index = list(index)
        config = self.checkpoint.model_config
        out = np.zeros((len(index), config.H))
        for start in range(0, len(index), PREDICT_BATCH):
            chunk = index[start : start + PREDICT_BATCH]
            x = self.stats.normalize(self.context.dataset.raw_inputs(chunk))
            out[start : start + len(chunk)] = forward(x, self.checkpoint.params, config)
        return out


class SitpEstimator(BaseEstimator):
    """Inverse-distance weighting of the eight neighbours' same-month profiles."""

    def __init__(
        self,
        method: str,
        column: str,
        context: EvalContext,
        power: float = EvalDefaults.IDW_POWER,
    ) -> None:
        """Initialise with the distance exponent."""
        super().__init__(method, column, context)
        self.power = power

    def estimate(self, index: Sequence[int]) -> np.ndarray:
        """One interpolation per sample."""
        profiles = self.context.profiles
        shape = (profiles.n_lat, profiles.n_lon)
        rows = []
        for n in index:
            entry = self.context.dataset.manifest.entries[n]
            found: list[Profile] = []
            coords = []
            for i, j in neighbor_coords(entry.cell, shape):
                profile = profiles.profile(entry.time, i, j)
                if profile is not None:
                    found.append(profile)
                    coords.append(profiles.geometry.coord(i, j))
            if not found:
                raise NoNeighborsError(
                    f"no neighbour profile around {entry.center.label()} "
                    f"in {entry.time.label()}"
                )
            rows.append(sitp(found, coords, entry.center, self.power).speeds)
        return np.array(rows).reshape(len(rows), profiles.grid.H)


class MeanEstimator(BaseEstimator):
    """Training-period mean profile of the target cell."""

    def __init__(self, method: str, column: str, context: EvalContext) -> None:
        """Initialise with an empty per-cell cache."""
        super().__init__(method, column, context)
        self._months = context.train_months()
        self._cache: dict[tuple[int, int], np.ndarray] = {}

    def cell_mean(self, cell: tuple[int, int]) -> np.ndarray:
        """Cached mean profile of ``cell``."""
        cached: Optional[np.ndarray] = self._cache.get(cell)
        if cached is None:
            profiles = self.context.profiles
            history = profiles.history(cell[0], cell[1], self._months)
            matrix = ProfileMatrix.from_history(profiles.grid, history)
            cached = mean_method(matrix).speeds
            self._cache[cell] = cached
        return cached

    def estimate(self, index: Sequence[int]) -> np.ndarray:
        """Look up each sample's cell mean."""
        entries = self.context.dataset.manifest.entries
        rows = [self.cell_mean(entries[n].cell) for n in index]
        return np.array(rows).reshape(len(rows), self.context.profiles.grid.H)
