"""Simulation toolkit for the square-root mean-reverting diffusion.

Provides truncation-based Euler schemes and an exact transition sampler,
closed-form constants and bounds for the truncated scheme's negativity
analysis, and a Monte Carlo harness that measures empirical strong
convergence rates with deterministic, thread-count-independent output.
"""

__version__ = "0.1.0"

from .model import BoundaryClass, CirParams, Grid, boundary_class, conditional_moments, feller_ratio, make_grid, validate
from .rng import Stream, StreamKey, normal_draws
from .schemes import CoupledPaths, PathResult, PathState, SchemeKind, baseline_step, exact_step, fte_step, interpolate_fte, simulate_coupled, simulate_path

__all__ = [
    "__version__",
    "BoundaryClass",
    "CirParams",
    "Grid",
    "boundary_class",
    "conditional_moments",
    "feller_ratio",
    "make_grid",
    "validate",
    "Stream",
    "StreamKey",
    "normal_draws",
    "CoupledPaths",
    "PathResult",
    "PathState",
    "SchemeKind",
    "baseline_step",
    "exact_step",
    "fte_step",
    "interpolate_fte",
    "simulate_coupled",
    "simulate_path",
]
