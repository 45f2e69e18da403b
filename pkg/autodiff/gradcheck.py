"""Central-difference gradient checking."""

from collections.abc import Callable

import numpy as np

from autodiff.tensor import Tape, Tensor

Builder = Callable[[Tape, dict[str, Tensor]], Tensor]


def numerical_gradient(
    f: Callable[[], float], array: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central differences of ``f`` with respect to every entry of ``array``.

    ``array`` is perturbed in place and restored after each entry.
    """
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for k in range(flat.size):
        original = flat[k]
        flat[k] = original + h
        up = f()
        flat[k] = original - h
        down = f()
        flat[k] = original
        out[k] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``||a - n|| / max(||a||, ||n||)``; zero when both vanish."""
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric)) / scale


def check_gradients(
    build: Builder, values: dict[str, np.ndarray], h: float = 1e-5
) -> dict[str, float]:
    """Compare tape gradients with central differences for every parameter.

    Args:
        build: Records a scalar loss on the given tape from the registered
            parameters.
        values: Parameter arrays by name; perturbed in place and restored.
        h: Finite-difference step.

    Returns:
        Relative error per parameter name.
    """

    def evaluate() -> float:
        tape = Tape()
        params = {k: tape.parameter(k, v) for k, v in values.items()}
        return float(build(tape, params).data)

    tape = Tape()
    params = {k: tape.parameter(k, v) for k, v in values.items()}
    analytic = tape.backward(build(tape, params))
    return {
        name: relative_error(analytic[name], numerical_gradient(evaluate, array, h))
        for name, array in values.items()
    }
