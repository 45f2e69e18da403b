"""Container files: one JSON header line followed by a little-endian blob.

Rasters, EOF bases, datasets and checkpoints all share this layout. The
header is written with sorted keys so identical content always produces
identical bytes, and every write lands in a temporary sibling first and is
moved into place with ``os.replace``.
"""

import json
import logging
import os
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np

from common.errors import ContainerFormatError, MissingArtifactError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SUPPORTED_DTYPES = ("<f8", "<f4")


@dataclass
class BlobConfig:
    """Describes one kind of container file."""

    kind: str
    dtype: str = "<f8"
    artifact: str = ""

    def __post_init__(self) -> None:
        """Reject dtypes other than little-endian IEEE-754 floats."""
        if self.dtype not in SUPPORTED_DTYPES:
            raise ValueError(f"Unsupported blob dtype: {self.dtype}")
        if not self.artifact:
            self.artifact = self.kind


def encode_header(header: dict[str, Any]) -> bytes:
    """Serialise a header dict to its canonical single-line form."""
    try:
        text = json.dumps(
            header, sort_keys=True, separators=(",", ":"), allow_nan=False
        )
    except ValueError as e:
        raise ContainerFormatError(f"Header is not JSON-serialisable: {e}") from e
    return text.encode("utf-8") + b"\n"


class BlobFileHandler:
    """Reads and writes container files of a single kind."""

    def __init__(self, config: BlobConfig) -> None:
        """Initialise handler with the container description."""
        self.config: BlobConfig = config

    def encode(
        self, header: dict[str, Any], arrays: Sequence[np.ndarray]
    ) -> bytes:
        """Return the full byte stream for ``header`` and ``arrays``."""
        full_header = {
            **header,
            "kind": self.config.kind,
            "dtype": self.config.dtype,
            "payload_values": int(sum(np.size(a) for a in arrays)),
        }
        chunks = [encode_header(full_header)]
        for array in arrays:
            chunks.append(
                np.ascontiguousarray(array, dtype=self.config.dtype).tobytes()
            )
        return b"".join(chunks)

    def write(
        self, path: PathLike, header: dict[str, Any], arrays: Sequence[np.ndarray]
    ) -> Path:
        """Atomically write a container file and return its path."""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(f".{target.name}.tmp")
        tmp.write_bytes(self.encode(header, arrays))
        os.replace(tmp, target)
        logger.debug(f"Wrote {self.config.kind} container to {target}")
        return target

    def _split(self, raw: bytes, source: str) -> tuple[dict[str, Any], bytes]:
        newline = raw.find(b"\n")
        if newline < 0:
            raise ContainerFormatError(f"{source}: missing header line")
        try:
            header = json.loads(raw[:newline].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ContainerFormatError(f"{source}: unreadable header: {e}") from e
        if header.get("kind") != self.config.kind:
            raise ContainerFormatError(
                f"{source}: expected a {self.config.kind} container, "
                f"found {header.get('kind')!r}"
            )
        return header, raw[newline + 1 :]

    def read(self, path: PathLike) -> tuple[dict[str, Any], np.ndarray]:
        """Read a container file into its header and a flat payload array.

        Raises:
            MissingArtifactError: If the file does not exist.
            ContainerFormatError: If the header or payload size is invalid.
        """
        source = Path(path)
        if not source.exists():
            raise MissingArtifactError(self.config.artifact, str(source))
        return self.decode(source.read_bytes(), str(source))

    def decode(
        self, raw: bytes, source: str = "<bytes>"
    ) -> tuple[dict[str, Any], np.ndarray]:
        """Decode a byte stream produced by :meth:`encode`."""
        header, body = self._split(raw, source)
        dtype = np.dtype(header.get("dtype", self.config.dtype))
        if len(body) % dtype.itemsize:
            raise ContainerFormatError(f"{source}: truncated payload")
        payload = np.frombuffer(body, dtype=dtype)
        expected = header.get("payload_values")
        if expected is not None and payload.size != expected:
            raise ContainerFormatError(
                f"{source}: payload holds {payload.size} values, "
                f"header declares {expected}"
            )
        return header, payload

    def open_memmap(self, path: PathLike) -> tuple[dict[str, Any], np.ndarray]:
        """Map the payload of a large container without reading it into memory."""
        source = Path(path)
        if not source.exists():
            raise MissingArtifactError(self.config.artifact, str(source))
        with open(source, "rb") as f:
            first = f.readline()
        header, _ = self._split(first, str(source))
        dtype = np.dtype(header.get("dtype", self.config.dtype))
        count = int(header.get("payload_values", 0))
        if count == 0:
            return header, np.zeros(0, dtype=dtype)
        payload = np.memmap(
            source, dtype=dtype, mode="r", offset=len(first), shape=(count,)
        )
        return header, payload
