"""Channel estimation for IRS-aided multiuser uplink SIMO systems.

Two-phase (2PCE) and three-phase (3PCE) LS estimation protocols, their MSE
formulas and a Monte Carlo harness.
"""
from .channel import ChannelModel, ChannelRealization, Geometry, SystemConfig, build_geometry
from .estimator import EstimateSet, run_2pce, run_3pce
from .schedule import TrainingSchedule, schedule_2pce, schedule_3pce, training_overhead

__version__ = "0.1.0"

__all__ = [
    "ChannelModel", "ChannelRealization", "Geometry", "SystemConfig", "build_geometry",
    "EstimateSet", "run_2pce", "run_3pce",
    "TrainingSchedule", "schedule_2pce", "schedule_3pce", "training_overhead",
]
