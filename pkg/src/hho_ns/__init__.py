"""Hybrid High-Order discretization of the steady incompressible Navier-Stokes equations in 2D."""
from .assembly import DofMap, PressureField, assemble_linearized, recover_local, solve_uncondensed, static_condense
from .bench import ConvergenceRow, ConvergenceTable, ExactSolution, compute_errors, convergence_study, kovasznay, manufactured
from .errors import (
    CondensationError,
    HHOError,
    InvalidArgument,
    InvalidMesh,
    MeshParseError,
    NewtonDivergedError,
    QuadratureCapabilityError,
    SolverError,
)
from .fespace import HHOSpace, HybridVelocity, interpolate, norm_1h
from .local_ops import (
    build_pack,
    convective_apply,
    divergence_reconstruction,
    gradient_reconstruction,
    hdg_convective_apply,
    velocity_reconstruction,
    viscous_matrix,
)
from .mesh import Mesh, generate_cartesian, generate_triangular, read_polymesh, validate_mesh, write_polymesh
from .solver import SolveReport, SolverConfig, solve_navier_stokes, solve_stokes

__version__ = "0.1.0"
