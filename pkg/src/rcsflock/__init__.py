"""Relativistic and classical Cucker-Smale flocking: simulation and rate checks."""

from __future__ import annotations

__version__ = "0.1.0"

from .dynamics import EnsembleState, prepare_initial
from .integrator import SimConfig, Trajectory, simulate
from .relativistic import KernelSpec, ModelParams, uniform_params

__all__ = [
    "EnsembleState",
    "KernelSpec",
    "ModelParams",
    "SimConfig",
    "Trajectory",
    "prepare_initial",
    "simulate",
    "uniform_params",
]
