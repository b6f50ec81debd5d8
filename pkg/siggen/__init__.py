"""
Synthetic gearbox vibration signals and raw measurement file I/O.
"""

from .profiles import (
    COMPONENT_ORDER,
    ComponentProfile,
    FaultSignature,
    Health,
    RigProfile,
    default_rig,
    load_rig_profile,
    save_rig_profile,
)
from .timeseries import TimeSeries
from .generate_signal import generate_signal, generate_rig_signals, synthesize_samples
from .timeseries_io import load_timeseries, save_timeseries

__all__ = [
    'COMPONENT_ORDER',
    'ComponentProfile',
    'FaultSignature',
    'Health',
    'RigProfile',
    'TimeSeries',
    'default_rig',
    'generate_rig_signals',
    'generate_signal',
    'load_rig_profile',
    'load_timeseries',
    'save_rig_profile',
    'save_timeseries',
    'synthesize_samples',
]
