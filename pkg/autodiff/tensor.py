"""Tensors and the tape that records operations on them.

A tape is built for one forward pass. Every op appends a record holding its
output, its inputs and a closure mapping the output gradient to input
gradients; records are therefore in topological order and ``backward`` walks
them once in reverse.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from common.errors import SspFusionError

logger = logging.getLogger(__name__)

Adjoint = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class NonFiniteError(SspFusionError):
    """Raised when an op produces NaN or infinity."""

    def __init__(self, op: str, where: str = "output") -> None:
        """Initialise with the op name and whether the value or gradient failed."""
        self.op = op
        self.where = where
        super().__init__(f"non-finite {where} in {op}")


class ShapeError(SspFusionError):
    """Raised when op inputs violate a shape contract."""


class TapeError(SspFusionError):
    """Raised on misuse of a tape, such as a second backward pass."""


class Tensor:
    """A float64 array recorded on a tape."""

    __slots__ = ("data", "index", "name", "tape")

    def __init__(
        self, data: np.ndarray, tape: "Tape", index: int, name: str = ""
    ) -> None:
        """Wrap ``data``; use :class:`Tape` factories rather than calling this."""
        self.data = data
        self.tape = tape
        self.index = index
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        """Dimension list."""
        return tuple(self.data.shape)

    def numpy(self) -> np.ndarray:
        """A copy of the values."""
        return self.data.copy()

    def __repr__(self) -> str:
        """Short description."""
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.shape}>"


@dataclass
class _Record:
    op: str
    output: Tensor
    inputs: tuple[Tensor, ...]
    adjoint: Adjoint


class Tape:
    """Operation record and parameter registry of one forward pass."""

    def __init__(self) -> None:
        """Start an empty tape."""
        self._records: list[_Record] = []
        self._count = 0
        self._consumed = False
        self.params: dict[str, Tensor] = {}

    def _new(self, data: np.ndarray, name: str = "") -> Tensor:
        if self._consumed:
            raise TapeError("tape already differentiated; start a new forward pass")
        tensor = Tensor(data, self, self._count, name)
        self._count += 1
        return tensor

    def parameter(self, name: str, value: np.ndarray) -> Tensor:
        """Register a trainable leaf under ``name``."""
        if name in self.params:
            raise TapeError(f"parameter {name!r} registered twice")
        data = np.array(value, dtype=np.float64)
        if not np.isfinite(data).all():
            raise NonFiniteError(name, "parameter")
        tensor = self._new(data, name)
        self.params[name] = tensor
        return tensor

    def constant(self, value: np.ndarray) -> Tensor:
        """A leaf that receives no gradient."""
        data = np.asarray(value, dtype=np.float64)
        if not np.isfinite(data).all():
            raise NonFiniteError("constant", "input")
        return self._new(data)

    def record(
        self, op: str, data: np.ndarray, inputs: Sequence[Tensor], adjoint: Adjoint
    ) -> Tensor:
        """Append an op result and the closure computing its input gradients."""
        for tensor in inputs:
            if tensor.tape is not self:
                raise TapeError(f"{op}: input recorded on a different tape")
        if not np.isfinite(data).all():
            raise NonFiniteError(op)
        out = self._new(np.asarray(data, dtype=np.float64))
        self._records.append(_Record(op, out, tuple(inputs), adjoint))
        return out

    def backward(self, loss: Tensor) -> dict[str, np.ndarray]:
        """Reverse-mode pass from a scalar ``loss``.

        Returns:
            Gradient per registered parameter; parameters the loss does not
            depend on get zeros.

        Raises:
            TapeError: On a second call or a non-scalar loss.
            NonFiniteError: If a gradient becomes NaN or infinite.
        """
        if self._consumed:
            raise TapeError("backward already ran on this tape")
        if loss.tape is not self:
            raise TapeError("loss was recorded on a different tape")
        if loss.data.size != 1:
            raise TapeError(f"loss must be a scalar, got shape {loss.shape}")
        self._consumed = True

        grads: dict[int, np.ndarray] = {loss.index: np.ones_like(loss.data)}
        for record in reversed(self._records):
            g = grads.pop(record.output.index, None)
            if g is None:
                continue
            for tensor, gi in zip(record.inputs, record.adjoint(g)):
                if gi is None:
                    continue
                if not np.isfinite(gi).all():
                    raise NonFiniteError(record.op, "gradient")
                if gi.shape != tensor.data.shape:
                    raise ShapeError(
                        f"{record.op}: gradient shape {gi.shape} for input "
                        f"{tensor.data.shape}"
                    )
                prev = grads.get(tensor.index)
                grads[tensor.index] = gi if prev is None else prev + gi

        out = {}
        for name, tensor in self.params.items():
            g = grads.get(tensor.index)
            out[name] = np.zeros_like(tensor.data) if g is None else g
        return out

    def __len__(self) -> int:
        """Recorded op count."""
        return len(self._records)
