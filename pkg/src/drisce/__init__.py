"""Coupled tensor channel estimation for double-RIS-aided MIMO systems."""

from .estimators import AlsConfig, AlsTrace, EstimateSet, baseline_uncoupled, cals, ckraft, estimate_t
from .evaluation import cascade, check_all, check_identifiability, nmse, run_monte_carlo
from .protocol import (
    ChannelSet,
    MeasurementBundle,
    NoiseModel,
    SystemDims,
    TrainingDesign,
    gen_channels,
    gen_training,
    run_protocol,
    snr_to_sigma2,
)

__all__ = [
    "AlsConfig",
    "AlsTrace",
    "ChannelSet",
    "EstimateSet",
    "MeasurementBundle",
    "NoiseModel",
    "SystemDims",
    "TrainingDesign",
    "baseline_uncoupled",
    "cals",
    "cascade",
    "check_all",
    "check_identifiability",
    "ckraft",
    "estimate_t",
    "gen_channels",
    "gen_training",
    "nmse",
    "run_monte_carlo",
    "run_protocol",
    "snr_to_sigma2",
]
