"""Thin viscous layers, Navier wall laws and optimal slip coefficients on
staggered grids."""

from .grid import DomainSpec, LayerProfile, MacGrid, Resolution, build_domain_grid
from .fields import BoundaryCondition, FlowState, ViscosityField
from .stokes import NonConvergenceError, SolverConfig, solve_navier_stokes, solve_stokes
from .walllaw import WallLawSpec, solve_limit
from .thinlayer import ThinLayerProblem, solve_thin_layer
from .cell import effective_matrix, solve_cell_longitudinal, solve_cell_transverse
from .gammaconv import SweepSetup, estimate_rate, run_sweep
from .control import m_sweep, solve_control_fixed_point
from .profileparse import Expression, ParseError, parse_expr

__version__ = "0.1.0"
