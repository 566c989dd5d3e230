"""Diffuse interface finite elements for Poisson problems with Dirichlet data on an embedded curve."""
from .analysis import ConvergenceTable, ErrorReport, error_norms, fit_rate
from .fem import FemSolution, solve_diffuse
from .geometry import Circle, TestProblem, reference_problem
from .layer import LayerClassification, classify
from .linalg import CgConfig, SparseMatrix, solve_cg
from .mesh import Mesh, build_uniform, mesh_metrics, refine_marked, refine_uniform

__all__ = [
    "CgConfig",
    "Circle",
    "ConvergenceTable",
    "ErrorReport",
    "FemSolution",
    "LayerClassification",
    "Mesh",
    "SparseMatrix",
    "TestProblem",
    "build_uniform",
    "classify",
    "error_norms",
    "fit_rate",
    "mesh_metrics",
    "reference_problem",
    "refine_marked",
    "refine_uniform",
    "solve_cg",
    "solve_diffuse",
]
