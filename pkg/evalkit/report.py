"""Method comparison: RMSE tables, depth bands, error distributions, figures."""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from common.blob_io import PathLike
from common.digest import ArrayDigest
from common.errors import InputDataError
from common.report_io import write_table
from config.defaults import EvalDefaults
from evalkit import render
from evalkit.base_estimator import BaseEstimator, EvalContext
from evalkit.factory import EstimatorFactory
from evalkit.metrics import DepthRangeError, mae_by_depth, rmse_rows
from fusion.dataset import EmptyDatasetError, FusionDataset, SampleEntry
from geogrid.types import DepthGrid, RasterStack, TimeKey
from model.attention import quartile_summary
from trainer.checkpoint import Checkpoint

logger = logging.getLogger(__name__)

ALL_METHODS = (*EvalDefaults.NETWORK_METHODS, *EvalDefaults.BASELINE_METHODS)

BAND_NOTE = "RMSE over the layers from the surface to the named depth"


@dataclass(eq=False)
class EvalReport:
    """Estimates of every method on the same test samples.

    ``truth`` and each ``predictions`` entry are ``[n, H]`` in entry order.
    """

    methods: tuple[str, ...]
    grid: DepthGrid
    entries: tuple[SampleEntry, ...]
    truth: np.ndarray
    predictions: dict[str, np.ndarray]
    test_digest: str
    columns: dict[str, str] = field(default_factory=dict)

    def sample_rmse(self, mask: Optional[np.ndarray] = None) -> dict[str, np.ndarray]:
        """Per-sample RMSE of every method over the masked layers."""
        return {
            m: rmse_rows(self.predictions[m], self.truth, mask) for m in self.methods
        }

    def sample_rows(self) -> pd.DataFrame:
        """Long-form ``method, location, lat, lon, time, rmse`` rows."""
        per_sample = self.sample_rmse()
        rows = [
            {
                "method": method,
                "location": entry.center.label(),
                "lat": entry.center.lat,
                "lon": entry.center.lon,
                "time": entry.time.label(),
                "rmse": float(per_sample[method][n]),
            }
            for method in self.methods
            for n, entry in enumerate(self.entries)
        ]
        return pd.DataFrame(
            rows, columns=["method", "location", "lat", "lon", "time", "rmse"]
        )

    def location_table(self) -> pd.DataFrame:
        """Full-depth RMSE per location (mean over test months) plus ``Average``."""
        per_sample = self.sample_rmse()
        labels = [e.center.label() for e in self.entries]
        order = list(dict.fromkeys(labels))
        rows = []
        for location in order:
            picks = [n for n, label in enumerate(labels) if label == location]
            row: dict[str, Any] = {"location": location}
            for method in self.methods:
                row[method] = float(per_sample[method][picks].mean())
            rows.append(row)
        table = pd.DataFrame(rows, columns=["location", *self.methods])
        average: dict[str, Any] = {"location": "Average"}
        for method in self.methods:
            average[method] = float(table[method].mean())
        return pd.concat([table, pd.DataFrame([average])], ignore_index=True)

    def mae_table(self) -> pd.DataFrame:
        """Per-depth mean absolute error, one ``mae_<method>`` column per method."""
        frame = pd.DataFrame({"depth_m": self.grid.depths()})
        for method in self.methods:
            frame[f"mae_{self.columns[method]}"] = mae_by_depth(
                self.predictions[method], self.truth
            )
        return frame

    def index_of(self, cell: tuple[int, int], time: TimeKey) -> int:
        """Position of the test sample at ``cell`` and ``time``."""
        for n, entry in enumerate(self.entries):
            if entry.cell == cell and entry.time == time:
                return n
        raise InputDataError(f"no test sample at cell {cell} in {time.label()}")


def input_digest(dataset: FusionDataset, index: Sequence[int]) -> str:
    """SHA-256 of the raw test inputs and labels, in sample order."""
    digest = ArrayDigest()
    for n in index:
        digest.update(dataset.raw_inputs([n])[0])
        digest.update(dataset.labels([n])[0])
    return digest.hexdigest()


class EvaluationHandler:
    """Runs every requested estimator over the test split."""

    def __init__(
        self, context: EvalContext, methods: Sequence[str] = ALL_METHODS
    ) -> None:
        """Initialise with the evaluation inputs and method labels."""
        self.context = context
        self.methods: tuple[str, ...] = tuple(methods)
        self._instances: list[BaseEstimator] = []

    def run(self) -> EvalReport:
        """Estimate every test sample with every method.

        Raises:
            EmptyDatasetError: If the dataset has no test sample.
        """
        dataset = self.context.dataset
        index = dataset.indices("test")
        if not index:
            raise EmptyDatasetError("dataset has no test samples")
        digest = input_digest(dataset, index)
        self._instances = EstimatorFactory.create_estimators(
            list(self.methods), self.context
        )
        predictions: dict[str, np.ndarray] = {}
        for estimator in self._instances:
            try:
                predictions[estimator.method] = estimator.estimate(index)
            except Exception as e:
                estimator.handle_error(e)
                raise
            logger.info(f"Estimated {len(index)} test samples with {estimator.method}")
        if input_digest(dataset, index) != digest:
            raise InputDataError("test inputs changed during evaluation")
        entries = dataset.manifest.entries
        return EvalReport(
            methods=self.methods,
            grid=dataset.manifest.grid,
            entries=tuple(entries[n] for n in index),
            truth=dataset.labels(index),
            predictions=predictions,
            test_digest=digest,
            columns={e.method: e.column for e in self._instances},
        )


def compare_methods(
    dataset: FusionDataset,
    profiles: RasterStack,
    checkpoints: Mapping[str, Checkpoint],
    methods: Sequence[str] = ALL_METHODS,
) -> EvalReport:
    """Evaluate the network variants and the reference methods on the test split.

    ``checkpoints`` maps ``attention`` and ``cnn`` to trained checkpoints.
    """
    context = EvalContext(dataset, profiles, dict(checkpoints))
    return EvaluationHandler(context, methods).run()


def depth_slice_report(
    report: EvalReport, depths: Sequence[float] = EvalDefaults.SLICE_DEPTHS
) -> pd.DataFrame:
    """Mean per-sample RMSE over the band from the surface to each depth.

    Depths outside the grid are logged and skipped.
    """
    grid = report.grid
    rows = []
    for depth in depths:
        if not grid.z_min <= depth <= grid.z_max:
            logger.warning(
                f"Depth {depth:g} m outside grid {grid.z_min:g}..{grid.z_max:g} m; "
                f"band skipped"
            )
            continue
        mask = grid.band(0.0, depth)
        per_sample = report.sample_rmse(mask)
        row: dict[str, Any] = {
            "depth_m": depth,
            "band": f"0-{depth:g} m",
            "layers": int(mask.sum()),
        }
        for method in report.methods:
            row[method] = float(per_sample[method].mean())
        rows.append(row)
    return pd.DataFrame(rows, columns=["depth_m", "band", "layers", *report.methods])


def improvement_table(
    location_table: pd.DataFrame,
    slice_table: pd.DataFrame,
    methods: Sequence[str],
    network_methods: Sequence[str] = EvalDefaults.NETWORK_METHODS,
) -> pd.DataFrame:
    """Percentage RMSE reduction of each network method over every other method."""
    average = location_table[location_table["location"] == "Average"].iloc[0]
    scopes: list[tuple[str, Any]] = [("full", average)]
    scopes += [(row["band"], row) for _, row in slice_table.iterrows()]
    rows = []
    for method in (m for m in network_methods if m in methods):
        for reference in (m for m in methods if m != method):
            for scope, values in scopes:
                ref = float(values[reference])
                pct = 100.0 * (1.0 - float(values[method]) / ref) if ref > 0 else None
                rows.append(
                    {
                        "method": method,
                        "reference": reference,
                        "scope": scope,
                        "improvement_pct": pct,
                    }
                )
    return pd.DataFrame(
        rows, columns=["method", "reference", "scope", "improvement_pct"]
    )


def _layer_at(grid: DepthGrid, depth: float) -> int:
    if not grid.z_min <= depth <= grid.z_max:
        raise DepthRangeError(grid, depth, depth)
    return int(round((depth - grid.z_min) / grid.step))


def field_slice(report: EvalReport, month: TimeKey, depth: float) -> pd.DataFrame:
    """Long-form ``lat, lon, method, speed_mps`` of every method at one depth.

    The truth appears under method ``TRUTH``.
    """
    layer = _layer_at(report.grid, depth)
    picks = [n for n, e in enumerate(report.entries) if e.time == month]
    if not picks:
        raise InputDataError(f"no test sample in {month.label()}")
    rows = []
    for name in ("TRUTH", *report.methods):
        values = report.truth if name == "TRUTH" else report.predictions[name]
        for n in picks:
            entry = report.entries[n]
            rows.append(
                {
                    "lat": entry.center.lat,
                    "lon": entry.center.lon,
                    "method": name,
                    "speed_mps": float(values[n, layer]),
                }
            )
    return pd.DataFrame(rows, columns=["lat", "lon", "method", "speed_mps"])


def field_grids(
    frame: pd.DataFrame,
) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Pivot :func:`field_slice` output into ``lat x lon`` grids per method."""
    lats = np.sort(frame["lat"].unique())
    lons = np.sort(frame["lon"].unique())
    grids = {}
    for name, group in frame.groupby("method", sort=False):
        pivot = group.pivot(index="lat", columns="lon", values="speed_mps")
        grids[str(name)] = pivot.reindex(index=lats, columns=lons).to_numpy()
    return lats, lons, grids


def profile_comparison(
    report: EvalReport, cell: tuple[int, int], month: TimeKey
) -> pd.DataFrame:
    """Truth, every estimate and its error versus depth at one sample."""
    n = report.index_of(cell, month)
    frame = pd.DataFrame({"depth_m": report.grid.depths(), "truth": report.truth[n]})
    for method in report.methods:
        column = report.columns[method]
        frame[column] = report.predictions[method][n]
        frame[f"err_{column}"] = report.predictions[method][n] - report.truth[n]
    return frame


def attention_summary(received: Mapping[int, np.ndarray]) -> pd.DataFrame:
    """Shallow versus deep quartile attention per exported epoch."""
    rows = [{"epoch": epoch, **quartile_summary(received[epoch])} for epoch in received]
    for row in rows:
        logger.info(
            f"Epoch {row['epoch']}: shallow quartile "
            f"{'dominates' if row['shallow_dominates'] else 'does not dominate'}"
        )
    return pd.DataFrame(
        rows,
        columns=[
            "epoch",
            "shallow_quartile_mean",
            "deep_quartile_mean",
            "shallow_dominates",
        ],
    )


def write_report(
    report: EvalReport,
    out_dir: PathLike,
    provenance: Optional[dict[str, Any]] = None,
    depths: Sequence[float] = EvalDefaults.SLICE_DEPTHS,
    field_month: Optional[TimeKey] = None,
    field_depth: Optional[float] = None,
    profile_cell: Optional[tuple[int, int]] = None,
    render_svg: bool = True,
) -> dict[str, Path]:
    """Write every report table (and its SVG rendering) under ``out_dir``."""
    out = Path(out_dir)
    header = {**(provenance or {}), "test_digest": report.test_digest}
    band_header = {**header, "depth_band": BAND_NOTE}
    written: dict[str, Path] = {}

    locations = report.location_table()
    slices = depth_slice_report(report, depths)
    mae = report.mae_table()
    written["rmse_by_location"] = write_table(
        out / "rmse_by_location.csv", locations, header
    )
    written["rmse_samples"] = write_table(
        out / "rmse_samples.csv", report.sample_rows(), header
    )
    written["rmse_by_depth_band"] = write_table(
        out / "rmse_by_depth_band.csv", slices, band_header
    )
    written["mae_by_depth"] = write_table(out / "mae_by_depth.csv", mae, header)
    written["improvement"] = write_table(
        out / "improvement.csv",
        improvement_table(locations, slices, report.methods),
        band_header,
    )

    month = field_month or report.entries[0].time
    in_grid = [d for d in depths if report.grid.z_min <= d <= report.grid.z_max]
    depth = field_depth
    if depth is None:
        depth = in_grid[0] if in_grid else report.grid.z_min
    fields = field_slice(report, month, depth)
    written["field_slice"] = write_table(out / "field_slice.csv", fields, header)

    cell = profile_cell or report.entries[0].cell
    profile = profile_comparison(report, cell, month)
    written["profile_comparison"] = write_table(
        out / "profile_comparison.csv", profile, header
    )

    if render_svg:
        depths_m = mae["depth_m"].to_numpy()
        written["mae_by_depth_svg"] = render.plot_profiles(
            out / "mae_by_depth.svg",
            depths_m,
            {m: mae[f"mae_{report.columns[m]}"].to_numpy() for m in report.methods},
            xlabel="mean absolute error (m/s)",
            provenance=header,
        )
        lats, lons, grids = field_grids(fields)
        written["field_slice_svg"] = render.plot_field_panels(
            out / "field_slice.svg",
            lats,
            lons,
            grids,
            title=f"{month.label()} at {depth:g} m",
            provenance=header,
        )
        written["profile_comparison_svg"] = render.plot_profiles(
            out / "profile_comparison.svg",
            depths_m,
            {"truth": profile["truth"].to_numpy()}
            | {m: profile[report.columns[m]].to_numpy() for m in report.methods},
            title=f"{report.entries[report.index_of(cell, month)].center.label()}",
            provenance=header,
        )
    logger.info(f"Wrote {len(written)} report artifacts to {out}")
    return written
