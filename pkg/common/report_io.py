"""CSV artifacts with a provenance comment line."""

import json
import logging
import os
from pathlib import Path
from typing import Any, Optional, Union

import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PROVENANCE_PREFIX = "# run_config="


def provenance_json(provenance: dict[str, Any]) -> str:
    """Canonical single-line JSON rendering of a run configuration."""
    return json.dumps(provenance, sort_keys=True, separators=(",", ":"))


def provenance_line(provenance: dict[str, Any]) -> str:
    """The comment line that opens a CSV artifact."""
    return PROVENANCE_PREFIX + provenance_json(provenance)


def write_table(
    path: PathLike,
    frame: pd.DataFrame,
    provenance: Optional[dict[str, Any]] = None,
    float_format: Optional[str] = None,
) -> Path:
    """Atomically write ``frame`` as CSV, preceded by the provenance line.

    Args:
        path: Destination file.
        frame: Table to write; the index is dropped.
        provenance: Run configuration echoed into the first line, if given.
        float_format: Optional printf-style float format.

    Returns:
        The written path.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    body = frame.to_csv(index=False, float_format=float_format, lineterminator="\n")
    text = body if provenance is None else provenance_line(provenance) + "\n" + body
    tmp = target.with_name(f".{target.name}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, target)
    logger.debug(f"Wrote {len(frame)} rows to {target}")
    return target


def read_provenance(path: PathLike) -> Optional[dict[str, Any]]:
    """Return the run configuration echoed into a CSV artifact, if any."""
    with open(path, encoding="utf-8") as f:
        first = f.readline().rstrip("\n")
    if not first.startswith(PROVENANCE_PREFIX):
        return None
    result: dict[str, Any] = json.loads(first[len(PROVENANCE_PREFIX) :])
    return result
