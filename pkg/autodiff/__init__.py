"""Dense float64 tensors with tape-based reverse-mode differentiation."""

from autodiff.gradcheck import check_gradients, numerical_gradient, relative_error
from autodiff.ops import (
    adaptive_avgpool,
    add,
    block_edges,
    concat_last,
    conv2d,
    linear,
    matmul,
    maxpool2d,
    per_sample_rmse,
    relu,
    reshape,
    rmse_loss,
    scale,
    softmax_rows,
    swap_last,
)
from autodiff.tensor import NonFiniteError, ShapeError, Tape, TapeError, Tensor

__all__ = [
    "NonFiniteError",
    "ShapeError",
    "Tape",
    "TapeError",
    "Tensor",
    "adaptive_avgpool",
    "add",
    "block_edges",
    "check_gradients",
    "concat_last",
    "conv2d",
    "linear",
    "matmul",
    "maxpool2d",
    "numerical_gradient",
    "per_sample_rmse",
    "relative_error",
    "relu",
    "reshape",
    "rmse_loss",
    "scale",
    "softmax_rows",
    "swap_last",
]
