"""Synthetic SST and sound speed fields with a known SST coupling."""

from synth.fields import (
    DegenerateRegionError,
    SynthConfig,
    cosine_series,
    month_range,
    profile_noise,
    sst_month_field,
    synth_fields,
    synth_sst,
    write_synth,
)
from synth.munk import MunkParams, munk

__all__ = [
    "DegenerateRegionError",
    "MunkParams",
    "SynthConfig",
    "cosine_series",
    "month_range",
    "munk",
    "profile_noise",
    "sst_month_field",
    "synth_fields",
    "synth_sst",
    "write_synth",
]
