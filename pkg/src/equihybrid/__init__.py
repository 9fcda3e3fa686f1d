"""Parallel hybrid extragradient solvers for common solutions of equilibrium and fixed-point problems."""

from .core import (BifunctionOracle, CapabilityError, ConfigurationError, ConstantSchedule,
                   FeasibleSet, GeometricSchedule, HarmonicSchedule, InnerBudget, NonexpansiveMap, PowerSchedule,
                   ProblemInstance, ProjectionBudget, SolverConfig, ValidationReport,
                   uniform_weights, validate_problem)
from .geometry import (HalfSpace, InfeasibleCutError, anchor_cut, dykstra, halpern_cut, mann_cut,
                       project_intersection)
from .parallel import ParallelMapError, ParallelPlan, farthest_from, parallel_map
from .problems import (CournotSpec, Paper1DSpec, make_affine_vi, make_cournot, make_paper_1d,
                       zero_problem)
from .prox import ProxResult, extragradient_pair, prox_step, vi_prox
from .solvers import (SolveResult, TraceRecord, solve_averaged, solve_equilibrium_only,
                      solve_halpern, solve_mann, solve_vi)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
