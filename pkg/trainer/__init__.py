"""Adam training, checkpoints and the model comparison report."""

from trainer.adam import AdamState, adam_step
from trainer.checkpoint import (
    Checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from trainer.loop import (
    TrainingDivergedError,
    TrainResult,
    batches,
    epoch_order,
    evaluate_rmse,
    measure_step_seconds,
    predict,
    report_model_stats,
    train,
    warm_start_output,
)
from trainer.schedule import TrainConfig, lr_at

__all__ = [
    "AdamState",
    "Checkpoint",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "adam_step",
    "batches",
    "encode_checkpoint",
    "epoch_order",
    "evaluate_rmse",
    "load_checkpoint",
    "lr_at",
    "measure_step_seconds",
    "predict",
    "report_model_stats",
    "save_checkpoint",
    "train",
    "warm_start_output",
]
