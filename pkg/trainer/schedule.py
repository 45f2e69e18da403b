"""Training configuration and the step learning-rate schedule."""

from dataclasses import asdict, dataclass
from typing import Any

from common.errors import ConfigError
from config.defaults import TrainDefaults


@dataclass(frozen=True)
class TrainConfig:
    """Batching, schedule, optimiser constants and checkpoint cadence.

    ``warm_start`` replaces the zero output bias of a fresh initialisation
    with the mean training label profile before the first step.
    """

    batch_size: int = TrainDefaults.BATCH_SIZE
    max_epochs: int = TrainDefaults.MAX_EPOCHS
    lr: float = TrainDefaults.LEARNING_RATE
    lr_drop_factor: float = TrainDefaults.LR_DROP_FACTOR
    lr_drop_period: int = TrainDefaults.LR_DROP_PERIOD
    beta1: float = TrainDefaults.ADAM_BETA1
    beta2: float = TrainDefaults.ADAM_BETA2
    epsilon: float = TrainDefaults.ADAM_EPSILON
    seed: int = TrainDefaults.SEED
    checkpoint_every: int = TrainDefaults.CHECKPOINT_EVERY
    snapshot_epochs: tuple[int, ...] = TrainDefaults.SNAPSHOT_EPOCHS
    warm_start: bool = TrainDefaults.WARM_START

    def __post_init__(self) -> None:
        """Validate ranges."""
        object.__setattr__(self, "snapshot_epochs", tuple(self.snapshot_epochs))
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0 < self.lr_drop_factor <= 1:
            raise ConfigError(
                f"lr_drop_factor must be in (0, 1], got {self.lr_drop_factor}"
            )
        if self.lr_drop_period < 1:
            raise ConfigError(
                f"lr_drop_period must be >= 1, got {self.lr_drop_period}"
            )
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            raise ConfigError("Adam constants out of range")
        if not 0 <= self.seed < 2**32:
            raise ConfigError(f"seed must be in [0, 2**32), got {self.seed}")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")
        if not isinstance(self.warm_start, bool):
            raise ConfigError(
                f"warm_start must be true or false, got {self.warm_start!r}"
            )

    def to_dict(self) -> dict[str, Any]:
        """Serialise for headers and run configs."""
        data = asdict(self)
        data["snapshot_epochs"] = list(self.snapshot_epochs)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrainConfig":
        """Inverse of :meth:`to_dict`; unknown keys are rejected."""
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown train config fields: {sorted(unknown)}")
        values = dict(data)
        if "snapshot_epochs" in values:
            values["snapshot_epochs"] = tuple(int(e) for e in values["snapshot_epochs"])
        return cls(**values)


def lr_at(config: TrainConfig, epoch: int) -> float:
    """Learning rate for 0-based ``epoch``: ``lr * factor ** (epoch // period)``."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return config.lr * config.lr_drop_factor ** (epoch // config.lr_drop_period)
