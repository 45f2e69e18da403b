"""Mini-batch training loop and the model comparison report."""

import logging
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from autodiff.ops import per_sample_rmse
from autodiff.tensor import NonFiniteError
from common.blob_io import PathLike
from common.errors import ConfigError, SspFusionError
from common.report_io import write_table
from fusion.dataset import EmptyDatasetError, FusionDataset
from model.config import VARIANTS, ModelConfig, ModelParams
from model.init import init_params
from model.network import forward, loss_and_gradients
from trainer.adam import AdamState, adam_step
from trainer.checkpoint import Checkpoint, save_checkpoint
from trainer.schedule import TrainConfig, lr_at

logger = logging.getLogger(__name__)

EVAL_BATCH = 64
TIMING_NOTE = "wall-clock seconds; not reproduced by reruns with the same seed"


class TrainingDivergedError(SspFusionError):
    """Raised when a loss, gradient or parameter stops being finite."""

    def __init__(
        self, epoch: int, batch: int, reason: str, last_checkpoint: Optional[Path]
    ) -> None:
        """Initialise with where training stopped and the last saved checkpoint."""
        self.epoch: int = epoch
        self.batch: int = batch
        self.reason: str = reason
        self.last_checkpoint: Optional[Path] = last_checkpoint
        kept = f"; last checkpoint {last_checkpoint}" if last_checkpoint else ""
        super().__init__(
            f"training diverged in epoch {epoch}, batch {batch}: {reason}{kept}"
        )


@dataclass
class TrainResult:
    """Outcome of :func:`train`."""

    checkpoint: Checkpoint
    checkpoint_path: Path
    loss_log_path: Path
    loss_log: pd.DataFrame
    epoch_seconds: list[float] = field(default_factory=list)
    snapshots: dict[int, Path] = field(default_factory=dict)


def epoch_order(indices: Sequence[int], seed: int, epoch: int) -> np.ndarray:
    """Shuffled sample order of one epoch from a counter-based generator."""
    rng = np.random.Generator(np.random.Philox(key=seed * 2**32 + epoch))
    return rng.permutation(np.asarray(indices, dtype=np.int64))


def batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    """Consecutive slices of ``order``; the last one may be short."""
    return [order[s : s + batch_size] for s in range(0, len(order), batch_size)]


def predict(
    dataset: FusionDataset,
    index: Sequence[int],
    params: ModelParams,
    config: ModelConfig,
    batch_size: int = EVAL_BATCH,
) -> np.ndarray:
    """Network estimates ``[len(index), H]`` for stored samples."""
    index = list(index)
    out = np.zeros((len(index), config.H))
    for start in range(0, len(index), batch_size):
        chunk = index[start : start + batch_size]
        out[start : start + len(chunk)] = forward(dataset.inputs(chunk), params, config)
    return out


def evaluate_rmse(
    dataset: FusionDataset,
    index: Sequence[int],
    params: ModelParams,
    config: ModelConfig,
) -> float:
    """Mean per-sample RMSE over ``index``."""
    pred = predict(dataset, index, params, config)
    return float(per_sample_rmse(pred, dataset.labels(index)).mean())


def warm_start_output(params: ModelParams, labels: np.ndarray) -> ModelParams:
    """Set the output bias to the mean training label profile."""
    warmed = params.copy()
    warmed.values["fc.b"] = np.asarray(labels, dtype=np.float64).mean(axis=0)
    return warmed


def train(
    dataset: FusionDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    out_dir: PathLike,
    name: Optional[str] = None,
    evaluate_test: bool = False,
    provenance: Optional[dict[str, Any]] = None,
) -> TrainResult:
    """Train one network variant on the train split of ``dataset``.

    Each epoch visits the training samples in a freshly seeded order, in
    batches of ``batch_size``; the batch loss is the mean per-sample RMSE. A
    checkpoint named ``<name>.ckpt`` is saved every ``checkpoint_every``
    epochs and at the end, and ``<name>_epochNNN.ckpt`` at snapshot epochs.
    The loss log ``<name>_loss.csv`` holds one row per epoch.

    Raises:
        EmptyDatasetError: If the dataset has no training sample.
        ConfigError: If the dataset depth grid does not match the model.
        TrainingDivergedError: On a non-finite loss, gradient or parameter;
            the last saved checkpoint is left in place.
    """
    train_index = dataset.indices("train")
    if not train_index:
        raise EmptyDatasetError("dataset has no training samples")
    if dataset.manifest.grid.H != model_config.H:
        raise ConfigError(
            f"dataset depth grid has H={dataset.manifest.grid.H}, "
            f"model expects H={model_config.H}"
        )
    test_index = dataset.indices("test") if evaluate_test else []
    name = name or model_config.variant
    out = Path(out_dir)
    ckpt_path = out / f"{name}.ckpt"
    log_path = out / f"{name}_loss.csv"

    params = init_params(model_config, train_config.seed)
    if train_config.warm_start:
        params = warm_start_output(params, dataset.labels(train_index))
        logger.debug(f"Output bias of {name} set to the mean training profile")
    checkpoint = Checkpoint(
        model_config=model_config,
        train_config=train_config,
        params=params,
        adam=AdamState.zeros_like(params),
        stats=dataset.manifest.stats,
        provenance=dict(provenance or {}),
    )
    logger.info(
        f"Training {name} ({params.count()} parameters) on {len(train_index)} "
        f"samples for {train_config.max_epochs} epochs"
    )

    rows: list[dict[str, Any]] = []
    epoch_seconds: list[float] = []
    snapshots: dict[int, Path] = {}
    last_saved: Optional[Path] = None

    def write_log() -> pd.DataFrame:
        frame = pd.DataFrame(rows, columns=_log_columns(evaluate_test))
        write_table(log_path, frame, checkpoint.provenance)
        return frame

    for epoch in range(train_config.max_epochs):
        started = time.perf_counter()
        lr = lr_at(train_config, epoch)
        order = epoch_order(train_index, train_config.seed, epoch)
        total = 0.0
        for b, batch in enumerate(batches(order, train_config.batch_size)):
            index = batch.tolist()
            try:
                value, grads = loss_and_gradients(
                    dataset.inputs(index),
                    dataset.labels(index),
                    checkpoint.params,
                    model_config,
                )
                if not np.isfinite(value):
                    raise NonFiniteError("loss")
                checkpoint.params, checkpoint.adam = adam_step(
                    checkpoint.params, grads, checkpoint.adam, lr, train_config
                )
            except NonFiniteError as e:
                write_log()
                logger.error(f"Training {name} diverged", exc_info=True)
                raise TrainingDivergedError(epoch + 1, b, str(e), last_saved) from e
            total += value * len(index)

        row: dict[str, Any] = {
            "epoch": epoch + 1,
            "lr": lr,
            "train_rmse": total / len(train_index),
        }
        if evaluate_test:
            row["test_rmse"] = (
                evaluate_rmse(dataset, test_index, checkpoint.params, model_config)
                if test_index
                else None
            )
        rows.append(row)
        checkpoint.epoch = epoch + 1
        checkpoint.history = [dict(r) for r in rows]
        epoch_seconds.append(time.perf_counter() - started)
        logger.info(
            f"{name} epoch {epoch + 1}/{train_config.max_epochs}: lr {lr:g}, "
            f"train RMSE {row['train_rmse']:.4f} m/s"
        )

        done = epoch + 1
        if done in train_config.snapshot_epochs:
            snapshots[done] = save_checkpoint(
                out / f"{name}_epoch{done:03d}.ckpt", checkpoint
            )
        if done % train_config.checkpoint_every == 0 or done == train_config.max_epochs:
            last_saved = save_checkpoint(ckpt_path, checkpoint)

    frame = write_log()
    return TrainResult(
        checkpoint=checkpoint,
        checkpoint_path=ckpt_path,
        loss_log_path=log_path,
        loss_log=frame,
        epoch_seconds=epoch_seconds,
        snapshots=snapshots,
    )


def _log_columns(with_test: bool) -> list[str]:
    columns = ["epoch", "lr", "train_rmse"]
    return columns + ["test_rmse"] if with_test else columns


def measure_step_seconds(
    config: ModelConfig, batch_size: int = 4, repeats: int = 3, seed: int = 0
) -> float:
    """Best-of-``repeats`` wall time of one forward and backward pass."""
    rng = np.random.default_rng(seed)
    params = init_params(config, seed)
    x = rng.standard_normal((batch_size, config.H, 6, 8))
    y = rng.standard_normal((batch_size, config.H))
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        loss_and_gradients(x, y, params, config)
        best = min(best, time.perf_counter() - started)
    return best


def report_model_stats(
    config: ModelConfig,
    timings: Optional[Mapping[str, Sequence[float]]] = None,
    probe_batch: int = 4,
) -> pd.DataFrame:
    """Parameter counts and measured times of both variants side by side.

    ``timings`` maps a variant to its per-epoch wall times from a training
    run; variants without timings report only the probe step time.
    """
    timings = timings or {}
    rows = []
    for variant in VARIANTS:
        cfg = config.with_variant(variant)
        epochs = list(timings.get(variant, ()))
        rows.append(
            {
                "variant": variant,
                "parameters": cfg.parameter_count(),
                "timed_epochs": len(epochs),
                "mean_epoch_seconds": float(np.mean(epochs)) if epochs else None,
                "total_train_seconds": float(np.sum(epochs)) if epochs else None,
                "probe_step_seconds": measure_step_seconds(cfg, probe_batch),
            }
        )
    return pd.DataFrame(rows)
