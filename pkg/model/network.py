"""The fusion network: token embedding, multi-head self-attention, CNN trunk.

Tokens are depth layers. Each sample ``x[H, 6, 8]`` becomes ``H`` tokens of
48 features, embedded to ``d_model``, optionally mixed by self-attention, and
then read as an ``H x d_model`` single-channel image by a convolution, ReLU,
max pool, adaptive average pool and a dense output layer of width ``H``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from autodiff import ops
from autodiff.tensor import Tape, Tensor
from common.errors import ConfigError
from model.config import TOKEN_DIM, ModelConfig, ModelParams

logger = logging.getLogger(__name__)


def tokenize(x: np.ndarray) -> np.ndarray:
    """``[..., H, 6, 8]`` to ``[..., H, 48]``, each slab flattened channel-major."""
    x = np.asarray(x)
    if x.shape[-2:] != (6, 8):
        raise ConfigError(f"expected [..., H, 6, 8] input, got {x.shape}")
    return x.reshape(*x.shape[:-2], TOKEN_DIM)


def untokenize(tokens: np.ndarray) -> np.ndarray:
    """Inverse of :func:`tokenize`."""
    tokens = np.asarray(tokens)
    if tokens.shape[-1] != TOKEN_DIM:
        raise ConfigError(f"expected [..., H, 48] tokens, got {tokens.shape}")
    return tokens.reshape(*tokens.shape[:-1], 6, 8)


def attention_head(
    Xe: Tensor, Wq: Tensor, Wk: Tensor, Wv: Tensor
) -> tuple[Tensor, Tensor]:
    """Scaled dot-product self-attention of one head.

    Returns:
        ``(output[..., H, d_v], weights[..., H, H])``; weight rows sum to 1.
    """
    q = ops.linear(Xe, Wq)
    k = ops.linear(Xe, Wk)
    v = ops.linear(Xe, Wv)
    d_k = Wq.shape[1]
    scores = ops.scale(ops.matmul(q, ops.swap_last(k)), 1.0 / np.sqrt(d_k))
    weights = ops.softmax_rows(scores)
    return ops.matmul(weights, v), weights


def multi_head(
    Xe: Tensor, params: dict[str, Tensor], config: ModelConfig
) -> tuple[Tensor, list[Tensor]]:
    """Concatenate every head's output and project with ``W^O``."""
    outputs, weights = [], []
    for i in range(config.n_heads):
        out, w = attention_head(
            Xe, params[f"attn.q.{i}"], params[f"attn.k.{i}"], params[f"attn.v.{i}"]
        )
        outputs.append(out)
        weights.append(w)
    return ops.linear(ops.concat_last(outputs), params["attn.o"]), weights


@dataclass
class ForwardPass:
    """Tape and intermediate results of one forward pass."""

    tape: Tape
    params: dict[str, Tensor]
    prediction: Tensor
    attention: list[Tensor] = field(default_factory=list)


def forward_pass(
    x: np.ndarray, params: ModelParams, config: ModelConfig
) -> ForwardPass:
    """Record a forward pass of ``x[..., H, 6, 8]`` on a fresh tape."""
    params.check(config)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-3:] != (config.H, 6, 8):
        raise ConfigError(
            f"input shape {x.shape} does not match [..., {config.H}, 6, 8]"
        )
    lead = x.shape[:-3]
    tape = Tape()
    p = {name: tape.parameter(name, value) for name, value in params.values.items()}

    tokens = tape.constant(tokenize(x))
    Xe = ops.linear(tokens, p["emb.W"], p["emb.b"])
    attention: list[Tensor] = []
    if config.has_attention:
        mixed, attention = multi_head(Xe, p, config)
        Z = ops.add(Xe, mixed) if config.residual else mixed
    else:
        Z = Xe

    image = ops.reshape(Z, (*lead, config.H, config.d_model, 1))
    feat = ops.relu(ops.conv2d(image, p["conv.W"], p["conv.b"]))
    feat = ops.maxpool2d(feat, config.pool_window)
    feat = ops.adaptive_avgpool(feat, config.adaptive_pool)
    flat = ops.reshape(feat, (*lead, config.fc_in))
    prediction = ops.linear(flat, p["fc.W"], p["fc.b"])
    return ForwardPass(tape, p, prediction, attention)


def forward(x: np.ndarray, params: ModelParams, config: ModelConfig) -> np.ndarray:
    """Predicted profile(s) ``[..., H]`` for input(s) ``[..., H, 6, 8]``."""
    return forward_pass(x, params, config).prediction.numpy()


def loss(pred: Tensor, label: Tensor) -> Tensor:
    """Mean per-sample RMSE."""
    return ops.rmse_loss(pred, label)


def loss_and_gradients(
    x: np.ndarray, y: np.ndarray, params: ModelParams, config: ModelConfig
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch loss (mean per-sample RMSE) and its gradient for every parameter."""
    fp = forward_pass(x, params, config)
    value = loss(fp.prediction, fp.tape.constant(np.asarray(y, dtype=np.float64)))
    grads = fp.tape.backward(value)
    return float(value.data), grads
