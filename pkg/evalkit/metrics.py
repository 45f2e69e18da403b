"""Error metrics over depth."""

from typing import Optional

import numpy as np

from common.errors import InputDataError
from geogrid.types import DepthGrid, Profile


class DepthRangeError(InputDataError):
    """Raised when a depth range selects no layer of the grid."""

    def __init__(self, grid: DepthGrid, top: float, bottom: float) -> None:
        """Initialise with the grid and the empty range."""
        self.top: float = top
        self.bottom: float = bottom
        super().__init__(
            f"depth range [{top:g}, {bottom:g}] m holds no layer of "
            f"grid {grid.z_min:g}..{grid.z_max:g} m"
        )


def depth_mask(
    grid: DepthGrid, depth_range: Optional[tuple[float, float]] = None
) -> np.ndarray:
    """Boolean layer mask of ``depth_range``; the whole grid when None."""
    if depth_range is None:
        return np.ones(grid.H, dtype=bool)
    top, bottom = depth_range
    mask = grid.band(top, bottom)
    if not mask.any():
        raise DepthRangeError(grid, top, bottom)
    return mask


def rmse(
    pred: Profile,
    truth: Profile,
    depth_range: Optional[tuple[float, float]] = None,
) -> float:
    """Root-mean-square difference in m/s over the layers inside ``depth_range``."""
    if pred.grid != truth.grid:
        raise InputDataError("prediction and truth use different depth grids")
    mask = depth_mask(truth.grid, depth_range)
    diff = pred.speeds[mask] - truth.speeds[mask]
    return float(np.sqrt(np.mean(diff**2)))


def rmse_rows(
    pred: np.ndarray, truth: np.ndarray, mask: Optional[np.ndarray] = None
) -> np.ndarray:
    """Per-row RMSE of ``[n, H]`` arrays over the masked layers."""
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    if mask is not None:
        diff = diff[:, mask]
    return np.sqrt(np.mean(diff**2, axis=1))


def mae_by_depth(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Mean absolute error per layer over ``[n, H]`` samples."""
    return np.mean(np.abs(np.asarray(pred) - np.asarray(truth)), axis=0)
