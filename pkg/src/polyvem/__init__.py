"""Virtual element discretization of the Poisson problem on polygonal
and polyhedral meshes, with a convergence-study harness and CLI."""

__version__ = "0.1.0"

from .mesh import (KernelEmpty, MeshError, PolygonalMesh2, PolyhedralMesh3,
                   generate_cube_mesh, generate_square_mesh, load_mesh,
                   quality_report, save_mesh)
from .study import StudyConfig, compute_errors, fit_slope, get_case, run_study
from .system import (GlobalDofMap, GlobalSystem, NotConverged, assemble,
                     interpolate_global, solve_linear)

__all__ = [
    "GlobalDofMap", "GlobalSystem", "KernelEmpty", "MeshError",
    "NotConverged", "PolygonalMesh2", "PolyhedralMesh3", "StudyConfig",
    "__version__", "assemble", "compute_errors", "fit_slope",
    "generate_cube_mesh", "generate_square_mesh", "get_case",
    "interpolate_global", "load_mesh", "quality_report", "run_study",
    "save_mesh", "solve_linear",
]
