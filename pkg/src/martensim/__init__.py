"""Stochastic nucleation models for two-well martensitic microstructures.

Start with :func:`martensim.fragment.run` and :class:`SimConfig`; the
``martensim`` command wraps the same API.
"""

from .blocks import BlockLibrary, Microstructure, build_block, make_library
from .core import MartensimError, make_boundary_data, make_wells
from .fragment import SimConfig, SimResult, SimState, run, run_ensemble
from .geometry import Rect, dyadic_diamond_packing
from .kernels import BACKEND
from .sobolev import (FieldDiff, SobolevParams, gagliardo_seminorm, interpolation_bound,
                      step_difference_series)
from .stats import fit_power_law, length_histogram, log_bins

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BlockLibrary", "FieldDiff", "MartensimError", "Microstructure", "Rect",
    "SimConfig", "SimResult", "SimState", "SobolevParams", "build_block",
    "dyadic_diamond_packing", "fit_power_law", "gagliardo_seminorm", "interpolation_bound",
    "length_histogram", "log_bins", "make_boundary_data", "make_library", "make_wells", "run",
    "run_ensemble", "step_difference_series",
]
