"""Analytic bondwire heating model with a subset-selection parameter fit."""

from .errors import (BondheatError, ConvergenceFailure, DegenerateHessian, NoRoot,
                     NonPhysicalResult, NotConverged, OutOfDomain, OutOfRange, ParseError,
                     SingularReducedSystem, UnitError)
from .materials import (MELTING_POINTS, BoundarySet, CompoundSpec, Drive, ModelConfig,
                        PhysicalConstants, WireSpec, epoxy_compound, kirchhoff_forward,
                        kirchhoff_inverse, nominal_wire, reference_boundaries)
from .spectral import SpectralBasis, build_basis
from .wire import CouplingState, midpoint_temperature, solve_for_state, time_to_fuse
from .compound import CompoundSolution, HeatKernel
from .coupling import CouplingResult, fixed_point
from .dataio import (RunConfig, capacity_curve, default_config, histogram_filter, load_config,
                     load_events, save_config)
from .optimizer import FusingDataset, ModelMap, optimize, parameter_space

__version__ = "0.1.0"
