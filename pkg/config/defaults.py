"""Default configuration."""

import os
from typing import ClassVar


class GridDefaults:
    """Default geometry for rasters and the vertical profile grid."""

    # 1980 - 5 + 1 = 1976 layers, the fused-input depth dimension
    DEPTH_Z_MIN = 5.0
    DEPTH_Z_MAX = 1980.0
    DEPTH_STEP = 1.0

    PROFILE_CELL_DEG = 1.0
    SST_CELL_DEG = 0.25

    MISSING_VALUE = float(os.getenv("SSP_MISSING_VALUE", "-9999.0"))

    # Physical plausibility window for sound speed, m/s (exclusive bounds)
    SPEED_MIN = 1300.0
    SPEED_MAX = 1700.0


class EofDefaults:
    """Default settings for EOF decomposition."""

    ORDER = 3
    BASIS_SCOPE = "cell"  # "cell" or "region"

    JACOBI_TOLERANCE = 1e-12
    JACOBI_MAX_SWEEPS = 100

    ORTHONORMAL_TOLERANCE = 1e-9
    # Gram-path eigenvectors whose mapped norm falls below this fraction of
    # ||R||_F are replaced by a deterministic completion of the basis
    NULL_DIRECTION_TOLERANCE = 1e-10


class ModelDefaults:
    """Default network shape."""

    N_HEADS = 8
    HEAD_DIM = 32
    CONV_KERNEL: ClassVar[tuple[int, int]] = (2, 2)
    CONV_FILTERS = 256
    POOL_WINDOW: ClassVar[tuple[int, int]] = (2, 2)
    POOL_STRIDE = 2
    ADAPTIVE_POOL: ClassVar[tuple[int, int]] = (8, 8)
    N_CHANNELS = 6
    N_NEIGHBORS = 8
    VARIANT = "attention"  # "attention" or "cnn"
    RESIDUAL = True


class TrainDefaults:
    """Default training schedule."""

    BATCH_SIZE = 16
    MAX_EPOCHS = 100
    LEARNING_RATE = 0.001
    LR_DROP_FACTOR = 0.1
    LR_DROP_PERIOD = 20

    ADAM_BETA1 = 0.9
    ADAM_BETA2 = 0.999
    ADAM_EPSILON = 1e-8

    SEED = 0
    CHECKPOINT_EVERY = 10
    SNAPSHOT_EPOCHS: ClassVar[tuple[int, ...]] = (10, 50, 100)
    WARM_START = True


class SynthDefaults:
    """Default synthetic ocean recipe."""

    LAT0 = 7.5
    LON0 = 150.5
    N_LAT = 12
    N_LON = 12
    START_MONTH = "2018-01"
    N_MONTHS = 30

    # Canonical Munk profile
    MUNK_C1 = 1500.0
    MUNK_EPSILON = 0.00737
    MUNK_Z_AXIS = 1300.0
    MUNK_SCALE = 1300.0

    COUPLING_GAIN = 3.0  # m/s per degC
    MIXED_LAYER_DEPTH = 80.0  # m

    SST_BASE = 28.0
    SST_LAT_GRADIENT = -0.25  # degC per degree north
    SST_SEASONAL_AMPLITUDE = 1.5
    SST_NOISE_AMPLITUDE = 0.6
    SST_DAILY_JITTER = 0.05
    SST_DAYS_PER_MONTH = 4
    SST_SUBGRID = 4

    PROFILE_NOISE_AMPLITUDE = 0.1
    NOISE_ORDER = 3


class EvalDefaults:
    """Default evaluation settings."""

    IDW_POWER = 2.0
    EARTH_RADIUS_KM = 6371.0
    SLICE_DEPTHS: ClassVar[tuple[float, ...]] = (200.0, 300.0, 500.0)
    NETWORK_METHODS: ClassVar[tuple[str, ...]] = ("SA-MDF-CNN", "CNN")
    BASELINE_METHODS: ClassVar[tuple[str, ...]] = ("SITP", "MEAN")


class LoggingConfig:
    """Logging settings shared by every command."""

    LEVEL = os.getenv("SSP_LOG_LEVEL", "INFO").upper()
    FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
