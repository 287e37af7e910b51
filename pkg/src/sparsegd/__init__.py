"""Grad-div stabilized incompressible flow solvers on simplicial meshes.

The package provides Taylor-Hood P2/P1 discretizations, three grad-div
time-stepping schemes (a two-step modular variant with a component-
decoupled relaxation solve, its one-step cousin, and the coupled
baseline), energy/divergence diagnostics, condition-number estimation for
the decoupled blocks, and a reproducible experiment harness.
"""

from .mesh import SimplicialMesh, generate_unit_cube, generate_unit_square, import_msh
from .fem_space import TaylorHoodSpace, build_taylor_hood, interpolate
from .assembly import OperatorSet, assemble_operator_set
from .schemes import FlowState, SchemeParams, SimulationResult, run_simulation

__all__ = [
    "SimplicialMesh",
    "generate_unit_square",
    "generate_unit_cube",
    "import_msh",
    "TaylorHoodSpace",
    "build_taylor_hood",
    "interpolate",
    "OperatorSet",
    "assemble_operator_set",
    "FlowState",
    "SchemeParams",
    "SimulationResult",
    "run_simulation",
]

__version__ = "0.1.0"
