"""Compliance-optimal laminated designs on adaptive quad meshes."""

__version__ = "0.1.0"

from .adaptivity import AdaptiveRun, adaptive_loop, dorfler_mark, \
    transfer_design
from .estimator import ElementIndicators, indicators, newton_recover, \
    recover_params
from .fem import (ArrayField, BoundaryConditions, CoercivityError,
                  Dirichlet, DisplacementField, EdgeSpan, IsotropicField,
                  LinearSystem, Neumann, NodePin, Q2Space, SolverOptions,
                  VoigtField, assemble, compliance, solve, stress_at)
from .fitting import FitResult, fit_extrapolation
from .laminate import (EPS_DESIGN, SHEAR_REG, IsotropicMaterial,
                       LaminateParams, effective_tensor, eig_sym2,
                       hs_energy_density, params_from_stress,
                       tensor_derivatives, volume_of)
from .optimizer import (DesignState, InfeasibleVolumeError,
                        OptimizeOptions, OptimizeResult, adapt_multiplier,
                        initial_state, optimize, update_params)
from .quadmesh import ElementPatch, QuadMesh, refine, sibling_patch, \
    uniform_mesh
from .scenarios import SCENARIO_NAMES, Scenario, builtin_scenario
from .vtk_io import von_mises, write_vtk
