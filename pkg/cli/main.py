"""Command-line entry point.

Usage: python -m cli <command> [--config run.json] [flags]

Progress is logged to standard error; results are written as files under the
output directory. Exit codes: 0 success, 2 configuration, 3 missing
artifact, 4 input data, 5 stage failure.
"""

import argparse
import logging
import sys
from dataclasses import replace
from typing import Any, Optional

from dotenv import load_dotenv

from cli.commands import COMMANDS, stages_of
from cli.config import load_run_config
from common.errors import SspFusionError
from config.defaults import LoggingConfig

logger = logging.getLogger(__name__)

EXIT_CODES = {"config": 2, "missing-artifact": 3, "input": 4, "stage": 5}


def _csv_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser shared by every command."""
    parser = argparse.ArgumentParser(
        prog="ssp-fusion",
        description="Sound speed profile estimation from fused SST and EOF inputs",
    )
    parser.add_argument("command", choices=[*COMMANDS, "pipeline"])
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--depth-grid", dest="grid", help="zmin:zmax:step")
    parser.add_argument("--months", type=_csv_list, help="YYYY-MM,...")
    parser.add_argument("--test-months", type=_csv_list, help="YYYY-MM,...")
    parser.add_argument("--basis-scope", choices=["cell", "region"])
    parser.add_argument(
        "--variant",
        choices=["attention", "cnn"],
        help="train/evaluate one variant; also the variant predict uses",
    )
    parser.add_argument("--lat", dest="predict_lat", type=float)
    parser.add_argument("--lon", dest="predict_lon", type=float)
    parser.add_argument("--month", dest="predict_month")
    parser.add_argument(
        "--profiles", dest="predict_profiles_csv", help="measured profiles CSV"
    )
    parser.add_argument(
        "--attn-epochs", type=lambda s: [int(e) for e in _csv_list(s)]
    )
    return parser


def overrides_from(args: argparse.Namespace) -> dict[str, Any]:
    """Run-config overrides given on the command line."""
    overrides: dict[str, Any] = {
        "seed": args.seed,
        "out_dir": args.out_dir,
        "epochs": args.epochs,
        "grid": args.grid,
        "months": args.months,
        "test_months": args.test_months,
        "basis_scope": args.basis_scope,
        "predict_lat": args.predict_lat,
        "predict_lon": args.predict_lon,
        "predict_month": args.predict_month,
        "predict_profiles_csv": args.predict_profiles_csv,
        "attn_epochs": args.attn_epochs,
    }
    if args.variant is not None:
        overrides["predict_variant"] = args.variant
        if args.command != "predict":
            overrides["variants"] = [args.variant]
    return overrides


def error_line(error: SspFusionError, stage: Optional[str]) -> str:
    """``<category>: <message>``, naming the stage for stage failures."""
    if error.category == "stage" and stage:
        return f"stage: {stage}: {error}"
    return f"{error.category}: {error}"


def main(argv: Optional[list[str]] = None) -> int:
    """Run one command, or the whole pipeline; return the exit code."""
    load_dotenv()
    logging.basicConfig(
        level=LoggingConfig.LEVEL,
        format=LoggingConfig.FORMAT,
        stream=sys.stderr,
        force=True,
    )
    args = build_parser().parse_args(argv)
    stage: Optional[str] = None
    try:
        config = load_run_config(args.config, overrides_from(args))
        for stage in stages_of(args.command):
            logger.info(f"Running {stage}")
            artifacts = COMMANDS[stage](replace(config, command=stage))
            for name, path in artifacts.items():
                logger.info(f"{stage}: {name} -> {path}")
    except SspFusionError as e:
        if e.category == "stage":
            logger.error(f"Stage {stage} failed", exc_info=True)
        print(error_line(e, stage), file=sys.stderr)
        return EXIT_CODES.get(e.category, EXIT_CODES["stage"])
    except Exception as e:
        logger.error(f"Stage {stage} failed", exc_info=True)
        print(f"stage: {stage}: {e}", file=sys.stderr)
        return EXIT_CODES["stage"]
    return 0
