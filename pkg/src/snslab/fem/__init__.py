"""Periodic Taylor-Hood finite element backend."""

from .mesh import PeriodicMesh, build_mesh, dump_mesh
from .space import TaylorHoodSpace, build_space, simplex_quadrature, spectral_sampler
from .assemble import (StaticOperators, assemble_static, assemble_convection,
                       infsup_constant, divergence_residual, kkt_factor, kkt_solve)
from .projection import (FemState, RateRecord, error_vs_spectral,
                         interpolate_velocity, node_points,
                         project_l2_divfree, project_pressure, pressure_error,
                         projection_error_rates, zero_state)
from .stepping import (FemTrajectory, NoiseEval, initial_state,
                       run_fem_trajectory, step_fem)

__all__ = [
    "PeriodicMesh", "build_mesh", "dump_mesh",
    "TaylorHoodSpace", "build_space", "simplex_quadrature", "spectral_sampler",
    "StaticOperators", "assemble_static", "assemble_convection",
    "infsup_constant", "divergence_residual", "kkt_factor", "kkt_solve",
    "FemState", "RateRecord", "error_vs_spectral", "interpolate_velocity",
    "node_points", "project_l2_divfree",
    "project_pressure", "pressure_error", "projection_error_rates", "zero_state",
    "FemTrajectory", "NoiseEval", "initial_state", "run_fem_trajectory",
    "step_fem",
]
