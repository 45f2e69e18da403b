"""The attention-assisted fusion network and its attention-free baseline."""

from model.attention import (
    AttentionTrace,
    attention_trace,
    export_trace,
    mean_received,
    quartile_summary,
    read_trace_matrices,
    received_attention,
)
from model.config import TOKEN_DIM, VARIANTS, ModelConfig, ModelParams
from model.init import glorot_bound, init_params
from model.network import (
    ForwardPass,
    attention_head,
    forward,
    forward_pass,
    loss,
    loss_and_gradients,
    multi_head,
    tokenize,
    untokenize,
)

__all__ = [
    "TOKEN_DIM",
    "VARIANTS",
    "AttentionTrace",
    "ForwardPass",
    "ModelConfig",
    "ModelParams",
    "attention_head",
    "attention_trace",
    "export_trace",
    "forward",
    "forward_pass",
    "glorot_bound",
    "init_params",
    "loss",
    "loss_and_gradients",
    "mean_received",
    "multi_head",
    "quartile_summary",
    "read_trace_matrices",
    "received_attention",
    "tokenize",
    "untokenize",
]
