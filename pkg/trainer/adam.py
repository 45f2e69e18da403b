"""Bias-corrected Adam."""

from dataclasses import dataclass, field

import numpy as np

from autodiff.tensor import NonFiniteError
from model.config import ModelParams
from trainer.schedule import TrainConfig


@dataclass(eq=False)
class AdamState:
    """First and second moments per parameter plus the step count."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        """Fresh state with zero moments."""
        return cls(
            m={k: np.zeros_like(p) for k, p in params.values.items()},
            v={k: np.zeros_like(p) for k, p in params.values.items()},
        )


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    config: TrainConfig,
) -> tuple[ModelParams, AdamState]:
    """One Adam update; returns new parameters and state, inputs untouched.

    Raises:
        NonFiniteError: If an updated parameter is NaN or infinite.
    """
    step = state.step + 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    new_values, new_m, new_v = {}, {}, {}
    for name, value in params.values.items():
        g = grads[name]
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * g * g
        updated = value - lr * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
        if not np.isfinite(updated).all():
            raise NonFiniteError("adam_step", f"parameter {name}")
        new_values[name], new_m[name], new_v[name] = updated, m, v
    return ModelParams(new_values), AdamState(new_m, new_v, step)
