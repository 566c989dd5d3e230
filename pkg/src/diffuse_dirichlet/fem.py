"""Linear finite elements with the solution pinned to ``I_h g`` on the layer."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .geometry import TestProblem
from .layer import LayerClassification, classify
from .linalg import CgConfig, SparseMatrix, matvec, solve_cg
from .mesh import Mesh


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference triangle; weights sum to one (multiply by area)."""

    points: np.ndarray  # (Q, 3) barycentric coordinates
    weights: np.ndarray
    degree: int


def _perms(a: float, b: float) -> list[list[float]]:
    return [[a, a, b], [a, b, a], [b, a, a]]


DEGREE2 = QuadratureRule(
    points=np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]),
    weights=np.full(3, 1.0 / 3.0),
    degree=2,
)

_A4, _W4A = 0.445948490915965, 0.223381589678011
_B4, _W4B = 0.091576213509771, 0.109951743655322
DEGREE4 = QuadratureRule(
    points=np.array(_perms(_A4, 1.0 - 2.0 * _A4) + _perms(_B4, 1.0 - 2.0 * _B4)),
    weights=np.array([_W4A] * 3 + [_W4B] * 3),
    degree=4,
)


def quadrature_points(corners: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """Physical points, shape ``(NT, Q, 2)``, for triangles given by ``(NT, 3, 2)`` corners."""
    return np.einsum("qk,tkd->tqd", rule.points, corners)


def p1_gradients(corners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Constant hat-function gradients ``(NT, 3, 2)`` and signed areas ``(NT,)``."""
    x, y = corners[..., 0], corners[..., 1]
    # gradient of the barycentric coordinate of vertex k: rotate the opposite edge
    dx = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    dy = np.stack([y[:, 2] - y[:, 1], y[:, 0] - y[:, 2], y[:, 1] - y[:, 0]], axis=1)
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (y[:, 1] - y[:, 0]) * (x[:, 2] - x[:, 0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        # degenerate triangles give non-finite gradients; callers check the area
        grads = np.stack([-dy, dx], axis=2) / (2.0 * area)[:, None, None]
    return grads, area


def interpolate_nodal(mesh: Mesh, field) -> np.ndarray:
    """Nodal interpolant: ``field`` evaluated at every vertex (field takes ``(N, 2)`` points)."""
    values = np.asarray(field(mesh.vertices), dtype=float)
    if values.shape != (mesh.num_vertices,):
        values = np.broadcast_to(values, (mesh.num_vertices,)).copy()
    return values


def local_stiffness(corners: np.ndarray) -> np.ndarray:
    grads, area = p1_gradients(corners)
    if np.any(area <= 0.0):
        raise ValueError("degenerate or clockwise triangle in assembly")
    return area[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)


def assemble_stiffness(mesh: Mesh) -> SparseMatrix:
    """Global P1 stiffness matrix (exact: gradients are constant per triangle)."""
    K = local_stiffness(mesh.corners())
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    return SparseMatrix.from_triplets(rows, cols, K.ravel(), mesh.num_vertices)


_P1_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def assemble_load(mesh: Mesh, f_nodal) -> np.ndarray:
    """Load vector of the piecewise-linear interpolant of ``f``, integrated exactly."""
    f_nodal = np.asarray(f_nodal, dtype=float)
    if f_nodal.shape != (mesh.num_vertices,):
        raise ValueError(f"expected {mesh.num_vertices} nodal values, got shape {f_nodal.shape}")
    area = mesh.signed_areas()
    local = area[:, None] * (f_nodal[mesh.triangles] @ _P1_MASS)
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.num_vertices)


@dataclass(frozen=True)
class ReducedSystem:
    """Stiffness system restricted to the free vertices.

    ``constrained_values`` holds the imposed value at every vertex (zero at
    free vertices) and ``free_dofs`` maps reduced to global indices.
    """

    matrix: SparseMatrix
    rhs: np.ndarray
    free_dofs: np.ndarray
    constrained_values: np.ndarray

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        u = self.constrained_values.copy()
        u[self.free_dofs] = x_free
        return u


def constrained_values(classification: LayerClassification, g_nodal) -> np.ndarray:
    """Imposed vertex values: ``g`` on layer vertices, zero on the outer boundary."""
    boundary_vertex = classification.boundary_vertex
    g_nodal = np.asarray(g_nodal, dtype=float)
    values = np.zeros(classification.num_vertices)
    lv = classification.layer_vertex
    values[lv] = g_nodal[lv]
    clash = lv & boundary_vertex
    if clash.any():
        warnings.warn(
            f"{int(clash.sum())} layer vertices lie on the outer boundary; the homogeneous boundary value wins",
            stacklevel=3,
        )
    values[boundary_vertex] = 0.0
    return values


def apply_constraints(A: SparseMatrix, b, classification: LayerClassification, g_nodal) -> ReducedSystem:
    """Eliminate constrained vertices symmetrically, moving them to the right-hand side."""
    b = np.asarray(b, dtype=float)
    g_nodal = np.asarray(g_nodal, dtype=float)
    n = A.n
    if b.shape != (n,) or g_nodal.shape != (n,) or classification.num_vertices != n:
        raise ValueError("dimension mismatch between matrix, load, constraint data and classification")
    constrained = classification.constrained_vertex
    free = np.flatnonzero(~constrained)
    if free.size == 0:
        raise ValueError("no free dofs: every vertex is constrained")
    values = constrained_values(classification, g_nodal)
    fixed = np.flatnonzero(constrained)
    rhs = b[free] - A.submatrix(free, fixed) @ values[fixed]
    return ReducedSystem(A.principal_submatrix(free), rhs, free, values)


@dataclass(frozen=True)
class FemSolution:
    coefficients: np.ndarray
    classification: LayerClassification
    mesh: Mesh
    iterations: int = 0
    galerkin_residual: float = 0.0
    load_norm: float = 0.0

    @property
    def free_dofs(self) -> int:
        return int(np.sum(~self.classification.constrained_vertex))


def galerkin_residual(A: SparseMatrix, b: np.ndarray, u: np.ndarray, free: np.ndarray) -> float:
    """Largest residual ``|(A u - b)_i|`` over free vertices ``i``."""
    r = matvec(A, u) - b
    return float(np.abs(r[free]).max()) if free.size else 0.0


def solve_diffuse(
    problem: TestProblem,
    mesh: Mesh,
    eps: float,
    config: CgConfig = CgConfig(),
    galerkin_rtol: float = 1e-10,
) -> FemSolution:
    """Galerkin solution pinned to ``I_h g`` on every triangle of the discrete layer.

    The reduced right-hand side is dominated by the lifted layer values, so
    a relative CG residual does not bound the residual against individual
    hat functions.  When ``max_i |(A u - b)_i|`` over free vertices exceeds
    ``galerkin_rtol * max|b|`` the CG tolerance is tightened tenfold and the
    iteration resumed, down to a tolerance of 1e-15.
    """
    classification = classify(mesh, problem.interface, eps)
    g_nodal = interpolate_nodal(mesh, problem.boundary_extension)
    f_nodal = interpolate_nodal(mesh, problem.source)
    A = assemble_stiffness(mesh)
    b = assemble_load(mesh, f_nodal)
    system = apply_constraints(A, b, classification, g_nodal)
    x, iterations = solve_cg(system.matrix, system.rhs, config)
    u = system.expand(x)
    load_norm = float(np.abs(b).max())
    residual = galerkin_residual(A, b, u, system.free_dofs)
    tol = config.rel_tolerance
    while residual > galerkin_rtol * load_norm and tol > 1e-15:
        tol = max(tol / 10.0, 1e-15)
        x, more = solve_cg(system.matrix, system.rhs, replace(config, rel_tolerance=tol), x0=x)
        iterations += more
        u = system.expand(x)
        residual = galerkin_residual(A, b, u, system.free_dofs)
    u.flags.writeable = False
    return FemSolution(
        coefficients=u,
        classification=classification,
        mesh=mesh,
        iterations=iterations,
        galerkin_residual=residual,
        load_norm=load_norm,
    )
