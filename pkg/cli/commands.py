"""Pipeline stages, one function per command.

Each command reads its upstream artifacts from the run directory, writes its
own, and raises a categorised :class:`~common.errors.SspFusionError` on
failure. Every artifact carries the run configuration it was built with.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from cli.config import RunConfig, RunPaths
from common.errors import ConfigError, MissingArtifactError
from common.report_io import write_table
from config.defaults import EofDefaults, GridDefaults
from eof.store import (
    compute_bases,
    export_explained_variance,
    export_modes,
    read_basis_set,
    write_basis_set,
)
from evalkit import render
from evalkit.factory import EstimatorFactory
from evalkit.report import ALL_METHODS, attention_summary, compare_methods, write_report
from fusion.dataset import SplitRule, read_dataset, slide_dataset, write_dataset
from fusion.samples import build_input
from geogrid.profiles import parse_profile_table
from geogrid.raster_io import read_raster, write_raster
from geogrid.sst import monthly_mean, parse_sst_table, regrid_block_mean
from geogrid.types import GeoCoord, RasterStack, TimeKey
from model.attention import attention_trace, export_trace, mean_received
from model.network import forward
from synth.fields import write_synth
from trainer.checkpoint import Checkpoint, load_checkpoint
from trainer.loop import TIMING_NOTE, report_model_stats, train

logger = logging.getLogger(__name__)

PIPELINE = ("synth", "eof", "fuse", "train", "eval", "attn-export", "stats")


def provenance(config: RunConfig) -> dict[str, Any]:
    """The run configuration echoed into artifact headers."""
    return config.to_dict()


def split_months(
    available: Sequence[TimeKey], config: RunConfig
) -> tuple[list[TimeKey], list[TimeKey]]:
    """Selected months split into (train, test).

    Without ``months`` every available month is used; without
    ``test_months`` the last ``n_test_months`` selected months are held out.

    Raises:
        ConfigError: If a requested month is unavailable or no training
            month remains.
    """
    present = sorted({t.month_key() for t in available})
    if config.months:
        months = sorted(set(config.month_keys(config.months)))
        absent = [t.label() for t in months if t not in present]
        if absent:
            raise ConfigError(f"requested months not in the profile data: {absent}")
    else:
        months = present
    if config.test_months:
        test = sorted(set(config.month_keys(config.test_months)))
        outside = [t.label() for t in test if t not in months]
        if outside:
            raise ConfigError(f"test months outside the selected months: {outside}")
    else:
        n = config.n_test_months
        test = months[len(months) - n :] if n else []
    train_months = [t for t in months if t not in test]
    if not train_months:
        raise ConfigError("no training month left after holding out test months")
    return train_months, test


def _open_csv(path: Path, artifact: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(artifact, str(path))
    return path


def _crop(stack: RasterStack, config: RunConfig) -> RasterStack:
    if config.region is None:
        return stack
    return stack.crop(*config.region)


def replace_provenance(stack: RasterStack, header: dict[str, Any]) -> RasterStack:
    """The same stack stamped with ``header``."""
    return stack.with_values(stack.values, provenance=header)


def cmd_synth(config: RunConfig) -> dict[str, Path]:
    """Write a synthetic SST table and profile table."""
    paths = RunPaths(config)
    sst, profiles = write_synth(
        paths.sst_csv, paths.profiles_csv, config.synth, provenance(config)
    )
    return {"sst_csv": sst, "profiles_csv": profiles}


def cmd_eof(config: RunConfig) -> dict[str, Path]:
    """Ingest the profile table and decompose the training-month history."""
    paths = RunPaths(config)
    source = _open_csv(paths.profiles_csv, "profiles")
    profiles = _crop(parse_profile_table(str(source), config.grid), config)
    train_months, test_months = split_months(profiles.times, config)
    logger.info(
        f"{len(train_months)} training months, {len(test_months)} test months"
    )
    header = provenance(config)
    raster = write_raster(paths.profiles_raster, replace_provenance(profiles, header))
    bases = compute_bases(profiles, train_months, config.basis_scope)
    center = (profiles.n_lat // 2, profiles.n_lon // 2)
    cells = [(-1, -1)] if config.basis_scope == "region" else [center]
    return {
        "profiles_raster": raster,
        "bases": write_basis_set(paths.bases, bases, header),
        "modes": export_modes(
            paths.modes_csv, bases, cells, EofDefaults.ORDER, header
        ),
        "explained_variance": export_explained_variance(
            paths.variance_csv, bases, header
        ),
    }


def cmd_fuse(config: RunConfig) -> dict[str, Path]:
    """Average the SST onto the profile grid and slide the sample window."""
    paths = RunPaths(config)
    profiles = read_raster(paths.profiles_raster, "profiles")
    bases = read_basis_set(paths.bases)
    source = _open_csv(paths.sst_csv, "sst")
    daily = parse_sst_table(str(source), GridDefaults.MISSING_VALUE)
    header = provenance(config)
    sst = regrid_block_mean(monthly_mean(daily), profiles.geometry)
    sst_path = write_raster(paths.sst_raster, replace_provenance(sst, header))
    train_months, test_months = split_months(profiles.times, config)
    dataset = slide_dataset(
        sst,
        profiles,
        [*train_months, *test_months],
        bases,
        SplitRule.from_months(test_months),
        header,
    )
    return {"sst_raster": sst_path, "dataset": write_dataset(paths.dataset, dataset)}


def cmd_train(config: RunConfig) -> dict[str, Path]:
    """Train every configured variant; write checkpoints, loss logs and timings."""
    paths = RunPaths(config)
    dataset = read_dataset(paths.dataset)
    snapshots = tuple(sorted({*config.train.snapshot_epochs, *config.attn_epochs}))
    train_config = replace(config.train, snapshot_epochs=snapshots)
    header = provenance(config)
    written: dict[str, Path] = {}
    losses: dict[str, np.ndarray] = {}
    timing_rows = []
    for variant in config.variants:
        result = train(
            dataset,
            config.model_config(variant),
            train_config,
            paths.models,
            name=variant,
            evaluate_test=config.evaluate_test,
            provenance=header,
        )
        written[f"{variant}_checkpoint"] = result.checkpoint_path
        written[f"{variant}_loss"] = result.loss_log_path
        losses[variant] = result.loss_log["train_rmse"].to_numpy(dtype=float)
        timing_rows += [
            {"variant": variant, "epoch": n, "seconds": s}
            for n, s in enumerate(result.epoch_seconds, start=1)
        ]
    written["timing"] = write_table(
        paths.timing_csv, pd.DataFrame(timing_rows), {**header, "timing": TIMING_NOTE}
    )
    epochs = np.arange(1, train_config.max_epochs + 1)
    written["loss_svg"] = render.plot_lines(
        paths.loss_svg,
        epochs,
        losses,
        xlabel="epoch",
        ylabel="train RMSE (m/s)",
        log_y=True,
        provenance=header,
    )
    return written


def _checkpoints(config: RunConfig, paths: RunPaths) -> dict[str, Checkpoint]:
    return {v: load_checkpoint(paths.checkpoint(v)) for v in config.variants}


def cmd_eval(config: RunConfig) -> dict[str, Path]:
    """Compare the trained variants with SITP and MEAN on the test months."""
    paths = RunPaths(config)
    dataset = read_dataset(paths.dataset)
    profiles = read_raster(paths.profiles_raster, "profiles")
    checkpoints = _checkpoints(config, paths)
    methods = [
        m
        for m in ALL_METHODS
        if EstimatorFactory.variant(m) is None
        or EstimatorFactory.variant(m) in checkpoints
    ]
    report = compare_methods(dataset, profiles, checkpoints, methods)
    month = TimeKey.parse(config.predict_month) if config.predict_month else None
    return write_report(
        report,
        paths.report,
        provenance(config),
        depths=config.slice_depths,
        field_month=month,
    )


def cmd_predict(config: RunConfig) -> dict[str, Path]:
    """Estimate one profile at ``predict_lat``/``predict_lon`` for ``predict_month``.

    With ``predict_profiles_csv`` the matching measured profile is added as
    ``truth`` next to the estimate.
    """
    if None in (config.predict_lat, config.predict_lon, config.predict_month):
        raise ConfigError("predict needs --lat, --lon and --month")
    paths = RunPaths(config)
    sst = read_raster(paths.sst_raster, "sst raster")
    bases = read_basis_set(paths.bases)
    checkpoint = load_checkpoint(paths.checkpoint(config.predict_variant))
    if checkpoint.stats is None:
        raise ConfigError("checkpoint carries no input normalisation statistics")
    coord = GeoCoord(float(config.predict_lat), float(config.predict_lon))
    month = TimeKey.parse(str(config.predict_month)).month_key()
    center = bases.geometry.index_of(coord)
    x = checkpoint.stats.normalize(build_input(center, month, sst, bases))
    estimate = forward(x[None], checkpoint.params, checkpoint.model_config)[0]

    frame = pd.DataFrame({"depth_m": bases.grid.depths(), "speed_mps": estimate})
    if config.predict_profiles_csv:
        source = _open_csv(Path(config.predict_profiles_csv), "measured profiles")
        measured = parse_profile_table(str(source), bases.grid)
        i, j = measured.geometry.index_of(coord)
        truth = measured.profile(month, i, j) if month in measured.times else None
        if truth is None:
            logger.warning(f"No measured profile at {coord.label()} {month.label()}")
        else:
            frame["truth"] = truth.speeds
            frame["error"] = estimate - truth.speeds
            rmse = float(np.sqrt(np.mean((estimate - truth.speeds) ** 2)))
            logger.info(f"RMSE against the measured profile: {rmse:.4f} m/s")
    logger.info(
        f"Estimated {coord.label()} {month.label()} with {config.predict_variant}"
    )
    return {"predict": write_table(paths.predict_csv, frame, provenance(config))}


def cmd_attn_export(config: RunConfig) -> dict[str, Path]:
    """Mean received attention per depth at every snapshot epoch."""
    if "attention" not in config.variants:
        logger.warning("The attention variant is not configured; nothing to export")
        return {}
    paths = RunPaths(config)
    dataset = read_dataset(paths.dataset)
    index = dataset.indices("test") or dataset.indices("train")
    index = index[: config.attn_samples]
    header = provenance(config)
    written: dict[str, Path] = {}
    received: dict[int, np.ndarray] = {}
    for epoch in config.attn_epochs:
        checkpoint = load_checkpoint(paths.snapshot("attention", epoch))
        stats = checkpoint.stats or dataset.manifest.stats
        x = stats.normalize(dataset.raw_inputs(index))
        traces = [
            attention_trace(sample, checkpoint.params, checkpoint.model_config)
            for sample in x
        ]
        received[epoch] = mean_received(traces)
        written[f"epoch{epoch:03d}"] = export_trace(
            paths.attention / f"epoch{epoch:03d}.csv",
            paths.attention / f"epoch{epoch:03d}.trace",
            traces[0],
            dataset.manifest.grid,
            received=received[epoch],
            provenance={**header, "epoch": epoch, "samples": len(index)},
        )
    written["summary"] = write_table(
        paths.attention / "summary.csv", attention_summary(received), header
    )
    if received:
        written["received_svg"] = render.plot_lines(
            paths.attention / "received.svg",
            dataset.manifest.grid.depths(),
            {f"epoch {e}": w for e, w in received.items()},
            xlabel="depth (m)",
            ylabel="received attention",
            provenance=header,
        )
    return written


def cmd_stats(config: RunConfig) -> dict[str, Path]:
    """Parameter counts and timings of both variants; printed and written."""
    paths = RunPaths(config)
    timings: dict[str, list[float]] = {}
    if paths.timing_csv.exists():
        frame = pd.read_csv(paths.timing_csv, comment="#")
        for variant, group in frame.groupby("variant", sort=False):
            timings[str(variant)] = group["seconds"].astype(float).tolist()
    else:
        logger.warning(f"No training timings at {paths.timing_csv}")
    stats = report_model_stats(config.model_config(), timings)
    print(stats.to_string(index=False))
    header = {**provenance(config), "timing": TIMING_NOTE}
    return {"stats": write_table(paths.stats_csv, stats, header)}


COMMANDS: dict[str, Callable[[RunConfig], dict[str, Path]]] = {
    "synth": cmd_synth,
    "eof": cmd_eof,
    "fuse": cmd_fuse,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "attn-export": cmd_attn_export,
    "stats": cmd_stats,
}


def stages_of(command: str) -> tuple[str, ...]:
    """Stages a command runs, in order."""
    if command == "pipeline":
        return PIPELINE
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    return (command,)
