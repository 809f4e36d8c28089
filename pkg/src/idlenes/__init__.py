"""Idle-mode network energy saving on a synthetic mmWave digital twin.

Typical flow: :func:`idlenes.twin.generate` a scenario, compute its link map
(:func:`idlenes.radio.compute_link_map`), fit the per-cell cost
(:func:`idlenes.energy.fit_linear_cost`) and run one of the strategies in
:mod:`idlenes.nes`.
"""
__version__ = "0.1.0"

from ._accel import backend_name
from .energy import FittedCost, PowerConfig, fit_linear_cost, idle_cycle_energy, network_energy
from .scenario import Scenario, validate
from .twin import TwinConfig, generate

__all__ = [
    "FittedCost",
    "PowerConfig",
    "Scenario",
    "TwinConfig",
    "__version__",
    "backend_name",
    "fit_linear_cost",
    "generate",
    "idle_cycle_energy",
    "network_energy",
    "validate",
]
