"""SVG renderings of the report tables (matplotlib, Agg backend).

Figures are saved without a creation date and with a fixed id salt so the
same data always yields the same SVG bytes. The run configuration goes into
the Dublin Core description of the SVG metadata block.
"""

import json
import logging
import os
import xml.etree.ElementTree as ET
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Optional

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from common.blob_io import PathLike  # noqa: E402
from common.report_io import provenance_json  # noqa: E402

logger = logging.getLogger(__name__)

SVG_RC = {
    "svg.hashsalt": "ssp-fusion",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (6.0, 4.0),
}

DC_DESCRIPTION = "{http://purl.org/dc/elements/1.1/}description"


def save_svg(
    fig: Any, path: PathLike, provenance: Optional[dict[str, Any]] = None
) -> Path:
    """Atomically save ``fig`` as SVG and close it."""
    metadata: dict[str, Optional[str]] = {"Date": None}
    if provenance is not None:
        metadata["Description"] = provenance_json(provenance)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(f".{target.name}.tmp")
    with mpl.rc_context(SVG_RC):
        fig.savefig(tmp, format="svg", metadata=metadata)
    plt.close(fig)
    os.replace(tmp, target)
    logger.debug(f"Rendered {target}")
    return target


def read_svg_provenance(path: PathLike) -> Optional[dict[str, Any]]:
    """Return the run configuration embedded in an SVG figure, if any."""
    node = ET.parse(path).getroot().find(f".//{DC_DESCRIPTION}")
    if node is None or not node.text:
        return None
    result: dict[str, Any] = json.loads(node.text)
    return result


def plot_lines(
    path: PathLike,
    x: np.ndarray,
    series: Mapping[str, np.ndarray],
    xlabel: str,
    ylabel: str,
    title: str = "",
    log_y: bool = False,
    provenance: Optional[dict[str, Any]] = None,
) -> Path:
    """One line per series over a shared x axis."""
    with mpl.rc_context(SVG_RC):
        fig, ax = plt.subplots()
        for label, values in series.items():
            ax.plot(x, values, label=label, linewidth=1.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if log_y:
            ax.set_yscale("log")
        if title:
            ax.set_title(title)
        ax.legend()
        ax.grid(True, linewidth=0.3)
    return save_svg(fig, path, provenance)


def plot_profiles(
    path: PathLike,
    depths: np.ndarray,
    series: Mapping[str, np.ndarray],
    xlabel: str = "sound speed (m/s)",
    title: str = "",
    provenance: Optional[dict[str, Any]] = None,
) -> Path:
    """Profiles against depth, surface at the top."""
    with mpl.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(4.0, 6.0))
        for label, values in series.items():
            ax.plot(values, depths, label=label, linewidth=1.2)
        ax.invert_yaxis()
        ax.set_xlabel(xlabel)
        ax.set_ylabel("depth (m)")
        if title:
            ax.set_title(title)
        ax.legend()
        ax.grid(True, linewidth=0.3)
    return save_svg(fig, path, provenance)


def plot_field_panels(
    path: PathLike,
    lats: np.ndarray,
    lons: np.ndarray,
    fields: Mapping[str, np.ndarray],
    title: str = "",
    vmin: Optional[float] = None,
    vmax: Optional[float] = None,
    provenance: Optional[dict[str, Any]] = None,
) -> Path:
    """One heat map per field on a shared colour scale."""
    stacked = np.stack(list(fields.values()))
    lo = float(np.nanmin(stacked)) if vmin is None else vmin
    hi = float(np.nanmax(stacked)) if vmax is None else vmax
    with mpl.rc_context(SVG_RC):
        fig, axes = plt.subplots(
            1, len(fields), figsize=(2.6 * len(fields), 2.8), squeeze=False
        )
        image = None
        for ax, (label, values) in zip(axes[0], fields.items()):
            image = ax.pcolormesh(
                lons, lats, values, vmin=lo, vmax=hi, cmap="viridis", shading="nearest"
            )
            ax.set_title(label)
            ax.set_xlabel("lon")
        axes[0][0].set_ylabel("lat")
        if image is not None:
            fig.colorbar(image, ax=list(axes[0]), label="m/s")
        if title:
            fig.suptitle(title)
    return save_svg(fig, path, provenance)
