"""Differentiable kernels.

Every op accepts leading batch dimensions in front of the shapes named in its
docstring and records itself on the tape of its inputs.
"""

from collections.abc import Sequence
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from autodiff.tensor import ShapeError, Tensor


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ShapeError(message)


def linear(x: Tensor, W: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """``x W + b`` for ``x[..., n, d_in]``, ``W[d_in, d_out]``, ``b[d_out]``."""
    _require(W.data.ndim == 2, f"linear: weight must be 2-D, got {W.shape}")
    d_in, d_out = W.shape
    _require(
        x.data.ndim >= 1 and x.shape[-1] == d_in,
        f"linear: input {x.shape} does not match weight {W.shape}",
    )
    if b is not None:
        _require(b.shape == (d_out,), f"linear: bias {b.shape}, expected ({d_out},)")
    y = x.data @ W.data
    if b is not None:
        y = y + b.data

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        g2 = g.reshape(-1, d_out)
        gx = g @ W.data.T
        gW = x.data.reshape(-1, d_in).T @ g2
        if b is None:
            return [gx, gW]
        return [gx, gW, g2.sum(axis=0)]

    inputs = [x, W] if b is None else [x, W, b]
    return x.tape.record("linear", y, inputs, adjoint)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched ``a[..., n, k] @ b[..., k, m]`` with equal leading dimensions."""
    _require(
        a.data.ndim >= 2
        and a.data.ndim == b.data.ndim
        and a.shape[:-2] == b.shape[:-2]
        and a.shape[-1] == b.shape[-2],
        f"matmul: incompatible shapes {a.shape} and {b.shape}",
    )
    y = a.data @ b.data

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        return [g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g]

    return a.tape.record("matmul", y, [a, b], adjoint)


def swap_last(x: Tensor) -> Tensor:
    """Transpose the last two axes."""
    _require(x.data.ndim >= 2, f"swap_last: need >= 2 dims, got {x.shape}")

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        return [np.swapaxes(g, -1, -2)]

    return x.tape.record("swap_last", np.swapaxes(x.data, -1, -2), [x], adjoint)


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply by a constant."""

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        return [g * factor]

    return x.tape.record("scale", x.data * factor, [x], adjoint)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of equal shapes."""
    _require(a.shape == b.shape, f"add: shapes {a.shape} and {b.shape} differ")

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        return [g, g]

    return a.tape.record("add", a.data + b.data, [a, b], adjoint)


def concat_last(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis."""
    _require(len(parts) > 0, "concat_last: nothing to concatenate")
    lead = parts[0].shape[:-1]
    _require(
        all(p.shape[:-1] == lead for p in parts),
        "concat_last: leading shapes differ",
    )
    widths = [p.shape[-1] for p in parts]
    edges = np.cumsum(widths)[:-1]

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        return list(np.split(g, edges, axis=-1))

    y = np.concatenate([p.data for p in parts], axis=-1)
    return parts[0].tape.record("concat_last", y, list(parts), adjoint)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Row-major reshape."""
    target = tuple(shape)
    try:
        y = x.data.reshape(target)
    except ValueError as e:
        raise ShapeError(f"reshape: cannot view {x.shape} as {target}") from e

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        return [g.reshape(x.data.shape)]

    return x.tape.record("reshape", y, [x], adjoint)


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis, with the row maximum subtracted first."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        return [y * (g - (g * y).sum(axis=-1, keepdims=True))]

    return x.tape.record("softmax_rows", y, [x], adjoint)


def relu(x: Tensor) -> Tensor:
    """``max(x, 0)``; the gradient at 0 is 0."""
    active = x.data > 0

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        return [g * active]

    return x.tape.record("relu", np.where(active, x.data, 0.0), [x], adjoint)


def conv2d(x: Tensor, kernels: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Valid stride-1 convolution of ``x[..., h, w, c_in]``.

    Kernels are ``[kh, kw, c_in, c_out]``; the output is
    ``[..., h - kh + 1, w - kw + 1, c_out]``.
    """
    _require(kernels.data.ndim == 4, f"conv2d: kernels {kernels.shape} not 4-D")
    kh, kw, c_in, c_out = kernels.shape
    _require(
        x.data.ndim >= 3 and x.shape[-1] == c_in,
        f"conv2d: input {x.shape} does not have {c_in} channels",
    )
    h, w = x.shape[-3], x.shape[-2]
    _require(h >= kh and w >= kw, f"conv2d: input {x.shape} smaller than kernel")
    if bias is not None:
        _require(bias.shape == (c_out,), f"conv2d: bias {bias.shape}")
    ho, wo = h - kh + 1, w - kw + 1
    lead = x.shape[:-3]

    # [..., ho, wo, c_in, kh, kw] -> [..., ho, wo, kh, kw, c_in]
    windows = sliding_window_view(x.data, (kh, kw), axis=(-3, -2))
    cols = np.moveaxis(windows, -3, -1).reshape(-1, kh * kw * c_in)
    flat_k = kernels.data.reshape(kh * kw * c_in, c_out)
    y = (cols @ flat_k).reshape(*lead, ho, wo, c_out)
    if bias is not None:
        y = y + bias.data

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        g2 = g.reshape(-1, c_out)
        gk = (cols.T @ g2).reshape(kh, kw, c_in, c_out)
        gx = np.zeros_like(x.data)
        for di in range(kh):
            for dj in range(kw):
                gx[..., di : di + ho, dj : dj + wo, :] += g @ kernels.data[di, dj].T
        if bias is None:
            return [gx, gk]
        return [gx, gk, g2.sum(axis=0)]

    inputs = [x, kernels] if bias is None else [x, kernels, bias]
    return x.tape.record("conv2d", y, inputs, adjoint)


def maxpool2d(x: Tensor, window: tuple[int, int] = (2, 2)) -> Tensor:
    """Non-overlapping max pool of ``x[..., h, w, c]`` with stride equal to window.

    Trailing rows and columns that do not fill a window are dropped. Among
    equal maxima the first in row-major window order receives the gradient.
    """
    ph, pw = window
    _require(x.data.ndim >= 3, f"maxpool2d: need [..., h, w, c], got {x.shape}")
    h, w, c = x.shape[-3:]
    ho, wo = h // ph, w // pw
    _require(ho >= 1 and wo >= 1, f"maxpool2d: input {x.shape} smaller than window")
    lead = x.shape[:-3]
    nl = len(lead)

    cropped = x.data[..., : ho * ph, : wo * pw, :]
    blocks = cropped.reshape(*lead, ho, ph, wo, pw, c)
    # [..., ho, wo, c, ph, pw] flattened to [..., ho, wo, c, ph * pw]
    order = (*range(nl), nl, nl + 2, nl + 4, nl + 1, nl + 3)
    flat = blocks.transpose(order).reshape(*lead, ho, wo, c, ph * pw)
    arg = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        routed = np.zeros_like(flat)
        np.put_along_axis(routed, arg[..., None], g[..., None], axis=-1)
        back = routed.reshape(*lead, ho, wo, c, ph, pw).transpose(
            np.argsort(order)
        )
        gx = np.zeros_like(x.data)
        gx[..., : ho * ph, : wo * pw, :] = back.reshape(cropped.shape)
        return [gx]

    return x.tape.record("maxpool2d", y, [x], adjoint)


def block_edges(size: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous blocks ``[floor(i*size/parts), floor((i+1)*size/parts))``."""
    return [(i * size // parts, (i + 1) * size // parts) for i in range(parts)]


def adaptive_avgpool(x: Tensor, out: tuple[int, int]) -> Tensor:
    """Average ``x[..., h, w, c]`` over a ``p x q`` partition into blocks."""
    p, q = out
    _require(x.data.ndim >= 3, f"adaptive_avgpool: need [..., h, w, c], got {x.shape}")
    h, w, c = x.shape[-3:]
    _require(
        1 <= p <= h and 1 <= q <= w,
        f"adaptive_avgpool: target {out} does not partition {h}x{w}",
    )
    rows, cols = block_edges(h, p), block_edges(w, q)
    y = np.empty((*x.shape[:-3], p, q, c))
    for a, (r0, r1) in enumerate(rows):
        for b, (c0, c1) in enumerate(cols):
            y[..., a, b, :] = x.data[..., r0:r1, c0:c1, :].mean(axis=(-3, -2))

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        gx = np.zeros_like(x.data)
        for a, (r0, r1) in enumerate(rows):
            for b, (c0, c1) in enumerate(cols):
                share = g[..., a, b, :] / ((r1 - r0) * (c1 - c0))
                gx[..., r0:r1, c0:c1, :] = share[..., None, None, :]
        return [gx]

    return x.tape.record("adaptive_avgpool", y, [x], adjoint)


def rmse_loss(pred: Tensor, label: Tensor) -> Tensor:
    """Mean over leading dimensions of the per-sample RMSE along the last axis.

    A sample with zero error contributes a zero gradient.
    """
    _require(pred.shape == label.shape, f"rmse_loss: {pred.shape} vs {label.shape}")
    H = pred.shape[-1]
    diff = pred.data - label.data
    per_sample = np.sqrt((diff * diff).mean(axis=-1))
    n = per_sample.size
    value = per_sample.mean()

    def adjoint(g: np.ndarray) -> list[Optional[np.ndarray]]:
        safe = np.where(per_sample > 0, per_sample, 1.0)
        coef = np.where(per_sample > 0, 1.0 / (H * safe * n), 0.0)
        gp = g * coef[..., None] * diff
        return [gp, -gp]

    return pred.tape.record("rmse_loss", np.asarray(value), [pred, label], adjoint)


def per_sample_rmse(pred: np.ndarray, label: np.ndarray) -> np.ndarray:
    """RMSE along the last axis, without recording."""
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(label, dtype=np.float64)
    result: np.ndarray = np.sqrt((diff * diff).mean(axis=-1))
    return result
