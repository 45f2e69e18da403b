"""Checkpoint containers: configs, parameters, Adam moments and loss history.

Wall-clock time is never stored, so identical training runs produce
identical checkpoint bytes.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from common.blob_io import BlobConfig, BlobFileHandler, PathLike
from common.errors import ContainerFormatError
from fusion.dataset import ChannelStats
from model.config import ModelConfig, ModelParams
from trainer.adam import AdamState
from trainer.schedule import TrainConfig

logger = logging.getLogger(__name__)

_CHECKPOINT_BLOB = BlobConfig(kind="checkpoint", artifact="checkpoint")


@dataclass(eq=False)
class Checkpoint:
    """Everything needed to resume training or run inference."""

    model_config: ModelConfig
    train_config: TrainConfig
    params: ModelParams
    adam: AdamState
    epoch: int = 0
    history: list[dict[str, Any]] = field(default_factory=list)
    stats: Optional[ChannelStats] = None
    provenance: dict[str, Any] = field(default_factory=dict)

    def header(self) -> dict[str, Any]:
        """JSON header of the container."""
        return {
            "model_config": self.model_config.to_dict(),
            "train_config": self.train_config.to_dict(),
            "epoch": self.epoch,
            "step": self.adam.step,
            "history": self.history,
            "params": [
                {"name": name, "shape": list(value.shape)}
                for name, value in self.params.values.items()
            ],
            "stats": self.stats.to_dict() if self.stats is not None else None,
            "provenance": self.provenance,
        }

    def arrays(self) -> list[np.ndarray]:
        """Parameters, first moments, then second moments, each in name order."""
        names = self.params.names()
        return (
            [self.params[n] for n in names]
            + [self.adam.m[n] for n in names]
            + [self.adam.v[n] for n in names]
        )


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """Byte stream of a checkpoint container."""
    return BlobFileHandler(_CHECKPOINT_BLOB).encode(
        checkpoint.header(), checkpoint.arrays()
    )


def save_checkpoint(path: PathLike, checkpoint: Checkpoint) -> Path:
    """Atomically write ``checkpoint``; an interrupted write leaves the old file."""
    target = BlobFileHandler(_CHECKPOINT_BLOB).write(
        path, checkpoint.header(), checkpoint.arrays()
    )
    logger.info(f"Saved checkpoint at epoch {checkpoint.epoch} to {target}")
    return target


def _split_payload(
    header: dict[str, Any], payload: np.ndarray, source: str
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray], dict[str, np.ndarray]]:
    specs = [(p["name"], tuple(int(s) for s in p["shape"])) for p in header["params"]]
    sizes = [int(np.prod(shape)) for _, shape in specs]
    if payload.size != 3 * sum(sizes):
        raise ContainerFormatError(
            f"{source}: payload holds {payload.size} values, "
            f"parameters need {3 * sum(sizes)}"
        )
    groups: list[dict[str, np.ndarray]] = [{}, {}, {}]
    offset = 0
    for group in groups:
        for (name, shape), size in zip(specs, sizes):
            group[name] = np.array(payload[offset : offset + size]).reshape(shape)
            offset += size
    return groups[0], groups[1], groups[2]


def load_checkpoint(path: PathLike) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        MissingArtifactError: If the file does not exist.
        ContainerFormatError: If the container is malformed or inconsistent.
    """
    header, payload = BlobFileHandler(_CHECKPOINT_BLOB).read(path)
    try:
        model_config = ModelConfig.from_dict(header["model_config"])
        train_config = TrainConfig.from_dict(header["train_config"])
        values, m, v = _split_payload(header, payload, str(path))
        stats = header.get("stats")
        checkpoint = Checkpoint(
            model_config=model_config,
            train_config=train_config,
            params=ModelParams(values),
            adam=AdamState(m, v, int(header["step"])),
            epoch=int(header["epoch"]),
            history=list(header.get("history") or []),
            stats=ChannelStats.from_dict(stats) if stats else None,
            provenance=dict(header.get("provenance") or {}),
        )
    except KeyError as e:
        raise ContainerFormatError(f"{path}: header lacks {e}") from e
    checkpoint.params.check(model_config)
    return checkpoint
