"""Attention weight traces for interpretability."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from common.blob_io import BlobConfig, BlobFileHandler, PathLike
from common.errors import ConfigError
from common.report_io import write_table
from geogrid.types import DepthGrid
from model.config import ModelConfig, ModelParams
from model.network import forward_pass

logger = logging.getLogger(__name__)

_TRACE_BLOB = BlobConfig(kind="attention-trace", artifact="attention trace")


@dataclass(frozen=True, eq=False)
class AttentionTrace:
    """Per-head ``[H, H]`` weights and the per-depth received attention."""

    heads: np.ndarray
    received: np.ndarray

    @property
    def H(self) -> int:
        """Token count."""
        return int(self.received.shape[0])

    @property
    def n_heads(self) -> int:
        """Head count."""
        return int(self.heads.shape[0])


def received_attention(heads: np.ndarray) -> np.ndarray:
    """Column means of the head-averaged weights, normalised to sum to 1."""
    column_means = heads.mean(axis=0).mean(axis=0)
    return column_means / column_means.sum()


def attention_trace(
    x: np.ndarray, params: ModelParams, config: ModelConfig
) -> AttentionTrace:
    """Attention weights of a single input ``x[H, 6, 8]``.

    Raises:
        ConfigError: For the cnn variant, which has no attention block.
    """
    if not config.has_attention:
        raise ConfigError("the cnn variant has no attention to trace")
    if np.shape(x) != (config.H, 6, 8):
        raise ConfigError(
            f"attention trace needs one [H, 6, 8] input, got {np.shape(x)}"
        )
    fp = forward_pass(x, params, config)
    heads = np.stack([w.data for w in fp.attention])
    return AttentionTrace(heads=heads, received=received_attention(heads))


def mean_received(traces: Sequence[AttentionTrace]) -> np.ndarray:
    """Average received-attention vector over several traces, renormalised."""
    if not traces:
        raise ConfigError("no traces to average")
    mean = np.mean([t.received for t in traces], axis=0)
    return mean / mean.sum()


def export_trace(
    csv_path: PathLike,
    blob_path: Optional[PathLike],
    trace: AttentionTrace,
    grid: DepthGrid,
    received: Optional[np.ndarray] = None,
    provenance: Optional[dict[str, Any]] = None,
) -> Path:
    """Write ``depth_m,weight`` and, optionally, the per-head matrices.

    ``received`` overrides the trace's own vector (e.g. a mean over samples).
    """
    weights = trace.received if received is None else received
    frame = pd.DataFrame({"depth_m": grid.depths(), "weight": weights})
    target = write_table(csv_path, frame, provenance)
    if blob_path is not None:
        header = {
            "grid": grid.to_dict(),
            "n_heads": trace.n_heads,
            "H": trace.H,
            "provenance": provenance or {},
        }
        BlobFileHandler(_TRACE_BLOB).write(blob_path, header, [trace.heads])
    logger.info(f"Exported attention trace to {target}")
    return target


def read_trace_matrices(path: PathLike) -> AttentionTrace:
    """Read per-head matrices written by :func:`export_trace`."""
    header, payload = BlobFileHandler(_TRACE_BLOB).read(path)
    n, H = int(header["n_heads"]), int(header["H"])
    heads = payload.astype(np.float64).reshape(n, H, H)
    return AttentionTrace(heads=heads, received=received_attention(heads))


def quartile_summary(received: np.ndarray) -> dict[str, Any]:
    """Mean received attention of the shallowest and deepest depth quartiles."""
    H = received.shape[0]
    q = max(H // 4, 1)
    shallow = float(received[:q].mean())
    deep = float(received[H - q :].mean())
    return {
        "shallow_quartile_mean": shallow,
        "deep_quartile_mean": deep,
        "shallow_dominates": shallow > deep,
    }
