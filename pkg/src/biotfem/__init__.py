"""Taylor-Hood finite elements and Lobatto-IIIA time stepping for the Biot system.

Typical use::

    from biotfem import biot_sine_case, run_level
    result = run_level(biot_sine_case(), k=1, s=2, level=4)
"""
from .assemble import (
    DirichletData,
    LoadAssembler,
    MaterialParameters,
    assemble_load,
    assemble_operators,
)
from .cases import ManufacturedCase, biot_sine_case, polynomial_case
from .diagnostics import EnergyReport, ErrorReport, energy_residual, eoc, error_norms
from .element import lobatto_points, reference_element, triangle_quadrature
from .kernels import BACKEND
from .mesh import Mesh, initial_mesh, mesh_size, refine, unit_square
from .solver import ConvergenceError, SingularMatrixError
from .space import BcSpec, build_system, interpolate
from .stationary import (
    State,
    elliptic_projection,
    infsup_constant,
    solve_initial_given_p0,
    solve_initial_given_phi0,
)
from .study import run_level
from .timeint import TimeGrid, integrate, lobatto_tableau, step

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BcSpec",
    "ConvergenceError",
    "DirichletData",
    "EnergyReport",
    "ErrorReport",
    "LoadAssembler",
    "ManufacturedCase",
    "MaterialParameters",
    "Mesh",
    "SingularMatrixError",
    "State",
    "TimeGrid",
    "assemble_load",
    "assemble_operators",
    "biot_sine_case",
    "build_system",
    "elliptic_projection",
    "energy_residual",
    "eoc",
    "error_norms",
    "infsup_constant",
    "initial_mesh",
    "integrate",
    "interpolate",
    "lobatto_points",
    "lobatto_tableau",
    "mesh_size",
    "polynomial_case",
    "reference_element",
    "refine",
    "run_level",
    "solve_initial_given_p0",
    "solve_initial_given_phi0",
    "step",
    "triangle_quadrature",
    "unit_square",
]
