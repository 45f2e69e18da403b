"""Batch command line wiring the pipeline stages together."""

from cli.commands import (
    COMMANDS,
    PIPELINE,
    cmd_attn_export,
    cmd_eof,
    cmd_eval,
    cmd_fuse,
    cmd_predict,
    cmd_stats,
    cmd_synth,
    cmd_train,
    split_months,
)
from cli.config import RunConfig, RunPaths, load_run_config

__all__ = [
    "COMMANDS",
    "PIPELINE",
    "RunConfig",
    "RunPaths",
    "cmd_attn_export",
    "cmd_eof",
    "cmd_eval",
    "cmd_fuse",
    "cmd_predict",
    "cmd_stats",
    "cmd_synth",
    "cmd_train",
    "load_run_config",
    "split_months",
]
