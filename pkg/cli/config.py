"""Run configuration: one JSON file, command-line flags override fields."""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from common.errors import ConfigError, SspFusionError
from config.defaults import EofDefaults, EvalDefaults, TrainDefaults
from eof.store import BASIS_SCOPES
from geogrid.types import DepthGrid, TimeKey
from model.config import VARIANTS, ModelConfig
from synth.fields import SynthConfig
from trainer.schedule import TrainConfig

logger = logging.getLogger(__name__)

DEFAULT_TEST_MONTHS = 6


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, echoed into every artifact it writes.

    ``model`` holds :class:`ModelConfig` fields except ``H``, which follows
    ``grid``. ``seed`` overrides the seeds of ``train`` and ``synth``.
    """

    command: str = ""
    out_dir: str = "run"
    sst_csv: Optional[str] = None
    profiles_csv: Optional[str] = None
    grid: DepthGrid = field(default_factory=DepthGrid)
    region: Optional[tuple[float, float, float, float]] = None
    months: tuple[str, ...] = ()
    test_months: tuple[str, ...] = ()
    n_test_months: int = DEFAULT_TEST_MONTHS
    basis_scope: str = EofDefaults.BASIS_SCOPE
    model: dict[str, Any] = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    seed: int = TrainDefaults.SEED
    variants: tuple[str, ...] = VARIANTS
    evaluate_test: bool = True
    slice_depths: tuple[float, ...] = EvalDefaults.SLICE_DEPTHS
    attn_epochs: tuple[int, ...] = TrainDefaults.SNAPSHOT_EPOCHS
    attn_samples: int = 64
    predict_lat: Optional[float] = None
    predict_lon: Optional[float] = None
    predict_month: Optional[str] = None
    predict_variant: str = "attention"
    predict_profiles_csv: Optional[str] = None

    def __post_init__(self) -> None:
        """Normalise sequences and check cross-field consistency."""
        for name in ("months", "test_months", "variants"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(
            self, "slice_depths", tuple(float(d) for d in self.slice_depths)
        )
        object.__setattr__(self, "attn_epochs", tuple(int(e) for e in self.attn_epochs))
        if self.region is not None:
            if len(self.region) != 4:
                raise ConfigError("region must be [lat_min, lat_max, lon_min, lon_max]")
            object.__setattr__(self, "region", tuple(float(v) for v in self.region))
        if self.basis_scope not in BASIS_SCOPES:
            raise ConfigError(
                f"basis_scope must be one of {BASIS_SCOPES}, got {self.basis_scope!r}"
            )
        bad = [v for v in (*self.variants, self.predict_variant) if v not in VARIANTS]
        if bad or not self.variants:
            raise ConfigError(f"variants must be drawn from {VARIANTS}, got {bad}")
        if self.n_test_months < 0 or self.attn_samples < 1:
            raise ConfigError("n_test_months must be >= 0 and attn_samples >= 1")
        try:
            for text in (*self.months, *self.test_months):
                TimeKey.parse(text)
            if self.predict_month is not None:
                TimeKey.parse(self.predict_month)
        except SspFusionError as e:
            raise ConfigError(f"invalid month in run config: {e}") from e
        if "H" in self.model:
            raise ConfigError("model.H follows the depth grid and cannot be set")
        self.model_config()
        if self.train.seed != self.seed or self.synth.seed != self.seed:
            object.__setattr__(self, "train", replace(self.train, seed=self.seed))
            object.__setattr__(self, "synth", replace(self.synth, seed=self.seed))
        if self.synth.grid != self.grid:
            object.__setattr__(self, "synth", replace(self.synth, grid=self.grid))

    def model_config(self, variant: Optional[str] = None) -> ModelConfig:
        """Network shape on this grid, optionally for another variant."""
        fields = {**self.model, "H": self.grid.H}
        if variant is not None:
            fields["variant"] = variant
        return ModelConfig.from_dict(fields)

    def month_keys(self, values: tuple[str, ...]) -> list[TimeKey]:
        """Parsed month labels."""
        return [TimeKey.parse(v).month_key() for v in values]

    def to_dict(self) -> dict[str, Any]:
        """Full JSON form; this is the provenance echoed into artifacts."""
        return {
            "command": self.command,
            "out_dir": self.out_dir,
            "sst_csv": self.sst_csv,
            "profiles_csv": self.profiles_csv,
            "grid": self.grid.to_dict(),
            "region": list(self.region) if self.region else None,
            "months": list(self.months),
            "test_months": list(self.test_months),
            "n_test_months": self.n_test_months,
            "basis_scope": self.basis_scope,
            "model": dict(sorted(self.model.items())),
            "train": self.train.to_dict(),
            "synth": {k: v for k, v in self.synth.to_dict().items() if k != "grid"},
            "seed": self.seed,
            "variants": list(self.variants),
            "evaluate_test": self.evaluate_test,
            "slice_depths": list(self.slice_depths),
            "attn_epochs": list(self.attn_epochs),
            "attn_samples": self.attn_samples,
            "predict_lat": self.predict_lat,
            "predict_lon": self.predict_lon,
            "predict_month": self.predict_month,
            "predict_variant": self.predict_variant,
            "predict_profiles_csv": self.predict_profiles_csv,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        """Build from the JSON form; unknown keys are rejected."""
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown run config fields: {sorted(unknown)}")
        values = dict(data)
        try:
            if isinstance(values.get("grid"), dict):
                values["grid"] = DepthGrid.from_dict(values["grid"])
            elif isinstance(values.get("grid"), str):
                values["grid"] = DepthGrid.parse(values["grid"])
            if isinstance(values.get("train"), dict):
                values["train"] = TrainConfig.from_dict(values["train"])
            if isinstance(values.get("synth"), dict):
                values["synth"] = SynthConfig.from_dict(values["synth"])
            return cls(**values)
        except ConfigError:
            raise
        except (SspFusionError, TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"invalid run config: {e}") from e


def load_run_config(
    path: Optional[str], overrides: Optional[dict[str, Any]] = None
) -> RunConfig:
    """Read ``path`` (if given) and apply flag ``overrides`` on top.

    Overrides use the JSON key names; ``epochs`` maps to
    ``train.max_epochs``.

    Raises:
        ConfigError: If the file is unreadable or any value is invalid.
    """
    data: dict[str, Any] = {}
    if path is not None:
        source = Path(path)
        if not source.exists():
            raise ConfigError(f"config file not found: {source}")
        try:
            data = json.loads(source.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{source}: not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{source}: top level must be an object")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "epochs":
            train = dict(data.get("train") or {})
            train["max_epochs"] = value
            data["train"] = train
        else:
            data[key] = value
    config = RunConfig.from_dict(data)
    logger.debug(f"Run config: {config.to_dict()}")
    return config


class RunPaths:
    """Artifact locations under the output directory."""

    def __init__(self, config: RunConfig) -> None:
        """Initialise from the run configuration."""
        self.out = Path(config.out_dir)
        self.sst_csv = Path(config.sst_csv) if config.sst_csv else self.out / "sst.csv"
        self.profiles_csv = (
            Path(config.profiles_csv)
            if config.profiles_csv
            else self.out / "profiles.csv"
        )
        self.profiles_raster = self.out / "profiles.ras"
        self.sst_raster = self.out / "sst_monthly.ras"
        self.bases = self.out / "bases.eof"
        self.modes_csv = self.out / "eof_modes.csv"
        self.variance_csv = self.out / "eof_explained_variance.csv"
        self.dataset = self.out / "dataset.bin"
        self.models = self.out / "models"
        self.timing_csv = self.models / "epoch_seconds.csv"
        self.loss_svg = self.models / "loss.svg"
        self.report = self.out / "report"
        self.predict_csv = self.out / "predict.csv"
        self.attention = self.out / "attention"
        self.stats_csv = self.out / "model_stats.csv"

    def checkpoint(self, variant: str) -> Path:
        """Final checkpoint of a variant."""
        return self.models / f"{variant}.ckpt"

    def snapshot(self, variant: str, epoch: int) -> Path:
        """Snapshot checkpoint of a variant at ``epoch``."""
        return self.models / f"{variant}_epoch{epoch:03d}.ckpt"

    def loss_log(self, variant: str) -> Path:
        """Loss log of a variant."""
        return self.models / f"{variant}_loss.csv"
