"""Network shape configuration and parameter containers."""

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from common.errors import ConfigError
from config.defaults import ModelDefaults

VARIANTS = ("attention", "cnn")

TOKEN_DIM = ModelDefaults.N_CHANNELS * ModelDefaults.N_NEIGHBORS


@dataclass(frozen=True)
class ModelConfig:
    """Shape of the fusion network.

    ``H`` is both the token count and the output length. The attention block
    has ``n_heads`` heads of width ``d_k`` (queries, keys) and ``d_v``
    (values); the model width is ``n_heads * d_k``.
    """

    H: int
    n_heads: int = ModelDefaults.N_HEADS
    d_k: int = ModelDefaults.HEAD_DIM
    d_v: int = ModelDefaults.HEAD_DIM
    conv_kernel: tuple[int, int] = ModelDefaults.CONV_KERNEL
    conv_filters: int = ModelDefaults.CONV_FILTERS
    pool_window: tuple[int, int] = ModelDefaults.POOL_WINDOW
    pool_stride: int = ModelDefaults.POOL_STRIDE
    adaptive_pool: tuple[int, int] = ModelDefaults.ADAPTIVE_POOL
    variant: str = ModelDefaults.VARIANT
    residual: bool = ModelDefaults.RESIDUAL

    def __post_init__(self) -> None:
        """Validate dimensions and that every stage has room to operate."""
        object.__setattr__(self, "conv_kernel", tuple(self.conv_kernel))
        object.__setattr__(self, "pool_window", tuple(self.pool_window))
        object.__setattr__(self, "adaptive_pool", tuple(self.adaptive_pool))
        sizes = (
            self.H,
            self.n_heads,
            self.d_k,
            self.d_v,
            self.conv_filters,
            self.pool_stride,
            *self.conv_kernel,
            *self.pool_window,
            *self.adaptive_pool,
        )
        if any(int(s) != s or s < 1 for s in sizes):
            raise ConfigError(f"model dimensions must be positive integers: {self}")
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}"
            )
        if self.pool_window != (self.pool_stride, self.pool_stride):
            raise ConfigError("max pooling needs stride equal to the window")
        rows, cols = self.pooled_shape
        p, q = self.adaptive_pool
        if rows < p or cols < q:
            raise ConfigError(
                f"pooled feature map {rows}x{cols} is smaller than the "
                f"adaptive pool target {p}x{q}"
            )

    @property
    def d_model(self) -> int:
        """Token width after embedding."""
        return self.n_heads * self.d_k

    @property
    def fc_out(self) -> int:
        """Output length (equal to ``H``)."""
        return self.H

    @property
    def has_attention(self) -> bool:
        """True for the attention variant."""
        return self.variant == "attention"

    @property
    def conv_shape(self) -> tuple[int, int]:
        """Feature map size after the convolution."""
        kh, kw = self.conv_kernel
        return self.H - kh + 1, self.d_model - kw + 1

    @property
    def pooled_shape(self) -> tuple[int, int]:
        """Feature map size after max pooling."""
        rows, cols = self.conv_shape
        ph, pw = self.pool_window
        return rows // ph, cols // pw

    @property
    def fc_in(self) -> int:
        """Flattened width entering the output layer."""
        p, q = self.adaptive_pool
        return p * q * self.conv_filters

    def with_variant(self, variant: str) -> "ModelConfig":
        """Same trunk, other variant."""
        fields = self.to_dict()
        fields["variant"] = variant
        return ModelConfig.from_dict(fields)

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        """Parameter names and shapes in initialisation order."""
        D = self.d_model
        kh, kw = self.conv_kernel
        shapes: dict[str, tuple[int, ...]] = {
            "emb.W": (TOKEN_DIM, D),
            "emb.b": (D,),
        }
        if self.has_attention:
            for i in range(self.n_heads):
                shapes[f"attn.q.{i}"] = (D, self.d_k)
                shapes[f"attn.k.{i}"] = (D, self.d_k)
                shapes[f"attn.v.{i}"] = (D, self.d_v)
            shapes["attn.o"] = (self.n_heads * self.d_v, D)
        shapes["conv.W"] = (kh, kw, 1, self.conv_filters)
        shapes["conv.b"] = (self.conv_filters,)
        shapes["fc.W"] = (self.fc_in, self.fc_out)
        shapes["fc.b"] = (self.fc_out,)
        return shapes

    def parameter_count(self) -> int:
        """Total trainable scalars."""
        return sum(int(np.prod(s)) for s in self.parameter_shapes().values())

    def to_dict(self) -> dict[str, Any]:
        """Serialise for headers and run configs."""
        data = asdict(self)
        for key in ("conv_kernel", "pool_window", "adaptive_pool"):
            data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelConfig":
        """Inverse of :meth:`to_dict`; unknown keys are rejected."""
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        values = dict(data)
        for key in ("conv_kernel", "pool_window", "adaptive_pool"):
            if key in values:
                values[key] = tuple(int(v) for v in values[key])
        return cls(**values)


@dataclass(eq=False)
class ModelParams:
    """Named parameter arrays matching a :class:`ModelConfig`."""

    values: dict[str, np.ndarray] = field(default_factory=dict)

    def check(self, config: ModelConfig) -> None:
        """Raise if names or shapes disagree with ``config``."""
        shapes = config.parameter_shapes()
        if list(self.values) != list(shapes):
            missing = sorted(set(shapes) - set(self.values))
            extra = sorted(set(self.values) - set(shapes))
            raise ConfigError(
                f"parameters do not match the model config "
                f"(missing {missing}, unexpected {extra})"
            )
        for name, shape in shapes.items():
            if self.values[name].shape != shape:
                raise ConfigError(
                    f"parameter {name} has shape {self.values[name].shape}, "
                    f"expected {shape}"
                )
            if not np.isfinite(self.values[name]).all():
                raise ConfigError(f"parameter {name} holds non-finite values")

    def copy(self) -> "ModelParams":
        """Deep copy."""
        return ModelParams({k: v.copy() for k, v in self.values.items()})

    def __getitem__(self, name: str) -> np.ndarray:
        """Array by name."""
        return self.values[name]

    def names(self) -> list[str]:
        """Names in registration order."""
        return list(self.values)

    def count(self) -> int:
        """Total trainable scalars."""
        return sum(int(v.size) for v in self.values.values())
