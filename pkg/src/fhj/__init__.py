"""Spectral simulation and diagnostics for u_t + (-Delta)^{1/2} u = |grad u|^p."""

from __future__ import annotations

from .asymptotics import MassLedger, cstar_estimate, decay_fit, linear_difference, mass, profile_error
from .besov import BesovSpec, besov_norm, besov_norm_differences, build_partition
from .poisson import poisson_profile, sample_kernel
from .presets import preset_initial_data
from .solver import BlowUpError, SolverConfig, Trajectory, XYNormSpec, evolve, picard_iterate
from .spectral import Field, TorusGrid, lq_norm, semigroup_apply

__version__ = "0.1.0"

__all__ = [
    "BesovSpec",
    "BlowUpError",
    "Field",
    "MassLedger",
    "SolverConfig",
    "TorusGrid",
    "Trajectory",
    "XYNormSpec",
    "besov_norm",
    "besov_norm_differences",
    "build_partition",
    "cstar_estimate",
    "decay_fit",
    "evolve",
    "linear_difference",
    "lq_norm",
    "mass",
    "picard_iterate",
    "poisson_profile",
    "preset_initial_data",
    "profile_error",
    "sample_kernel",
    "semigroup_apply",
]
