"""Numerical toolkit for recovering damping and potential in damped wave equations."""

__version__ = "0.1.0"

from .errors import (CFLError, ConfigError, InstabilityError, LogBranchError, OverflowGuardError,  # noqa: E402
                     PreconditionError, ResolutionError, UsageError, WavetomoError)
from .grid import Box, Face, LightFrame, ScalarField, SpaceTimeGrid, norm, omega_sweep  # noqa: E402
from .coeffs import Coefficient, make_phantom, mollify  # noqa: E402
from .amplitudes import CarlemanWeight, build_b1, build_b2, halfline_ray_integral  # noqa: E402
from .solver import MeasurementSet, PartialBoundaryGeometry, boundary_operator, solve_ibvp  # noqa: E402
from .probes import build_probe  # noqa: E402
from .reconstruct import (IdentitySamples, SpectralSlices, evaluate_identity, fubini_reduction_check,  # noqa: E402
                          invert_damping, invert_potential)

__all__ = ["__version__", "Box", "Face", "LightFrame", "ScalarField", "SpaceTimeGrid", "norm", "omega_sweep",
           "Coefficient", "make_phantom", "mollify", "CarlemanWeight", "build_b1", "build_b2",
           "halfline_ray_integral", "MeasurementSet", "PartialBoundaryGeometry", "boundary_operator",
           "solve_ibvp", "build_probe", "IdentitySamples", "SpectralSlices", "evaluate_identity",
           "fubini_reduction_check", "invert_damping", "invert_potential", "CFLError", "ConfigError",
           "InstabilityError", "LogBranchError", "OverflowGuardError", "PreconditionError", "ResolutionError",
           "UsageError", "WavetomoError"]
