"""Seeded parameter initialisation."""

import logging

import numpy as np

from model.config import ModelConfig, ModelParams

logger = logging.getLogger(__name__)


def fans(shape: tuple[int, ...]) -> tuple[int, int]:
    """Fan-in and fan-out of a dense ``[in, out]`` or conv ``[kh, kw, in, out]``."""
    if len(shape) == 4:
        kh, kw, c_in, c_out = shape
        return kh * kw * c_in, kh * kw * c_out
    return shape[0], shape[1]


def glorot_bound(shape: tuple[int, ...]) -> float:
    """``sqrt(6 / (fan_in + fan_out))``."""
    fan_in, fan_out = fans(shape)
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Glorot-uniform weights and zero biases, drawn in registration order.

    The same ``(config, seed)`` always yields bitwise-identical parameters.
    """
    rng = np.random.default_rng(seed)
    values: dict[str, np.ndarray] = {}
    for name, shape in config.parameter_shapes().items():
        if len(shape) == 1:
            values[name] = np.zeros(shape)
            continue
        bound = glorot_bound(shape)
        values[name] = rng.uniform(-bound, bound, size=shape)
    params = ModelParams(values)
    logger.debug(
        f"Initialised {config.variant} model: {params.count()} parameters, seed {seed}"
    )
    return params
