"""The canonical Munk deep-ocean sound speed profile."""

from dataclasses import asdict, dataclass

import numpy as np

from common.errors import ConfigError
from config.defaults import SynthDefaults


@dataclass(frozen=True)
class MunkParams:
    """Axis speed ``c1``, perturbation ``epsilon``, axis depth and scale (m)."""

    c1: float = SynthDefaults.MUNK_C1
    epsilon: float = SynthDefaults.MUNK_EPSILON
    z_axis: float = SynthDefaults.MUNK_Z_AXIS
    scale: float = SynthDefaults.MUNK_SCALE

    def __post_init__(self) -> None:
        """Require positive speed and scale."""
        if self.c1 <= 0 or self.scale <= 0 or self.epsilon < 0:
            raise ConfigError(f"invalid Munk parameters: {self}")

    def to_dict(self) -> dict[str, float]:
        """Serialise for run configs."""
        return asdict(self)


def munk(z: np.ndarray, params: MunkParams = MunkParams()) -> np.ndarray:
    """``c1 (1 + eps (t - 1 + exp(-t)))`` with ``t = 2 (z - z_axis) / scale``."""
    t = 2.0 * (np.asarray(z, dtype=np.float64) - params.z_axis) / params.scale
    return params.c1 * (1.0 + params.epsilon * (t - 1.0 + np.exp(-t)))
