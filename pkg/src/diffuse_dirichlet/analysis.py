"""Error norms against the exact solution and convergence-rate fits."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fem import DEGREE4, FemSolution, QuadratureRule, p1_gradients, quadrature_points
from .geometry import TestProblem
from .layer import LAYER
from .mesh import mesh_metrics

NORMS = ("l2", "h1_semi", "h1_full", "linf_omega", "linf_outside")


@dataclass(frozen=True)
class ErrorReport:
    l2: float
    h1_semi: float
    h1_full: float
    linf_omega: float
    linf_outside: float
    eps: float
    h: float
    delta: float
    kappa: float
    free_dofs: int
    vertices: int
    galerkin_residual: float = 0.0
    load_norm: float = 0.0

    @property
    def linf(self) -> float:
        return self.linf_omega


@dataclass
class ConvergenceTable:
    """Rows of ``(parameter value, ErrorReport)`` for one sweep."""

    param_name: str
    params: list[float] = field(default_factory=list)
    reports: list[ErrorReport] = field(default_factory=list)
    meta: list[dict] = field(default_factory=list)

    def append(self, param: float, report: ErrorReport) -> None:
        if self.params:
            prev = self.params[-1]
            if param == prev or (len(self.params) > 1 and (param - prev) * (prev - self.params[-2]) <= 0):
                raise ValueError("parameter values must be strictly monotone")
        self.params.append(float(param))
        self.reports.append(report)

    def __len__(self) -> int:
        return len(self.params)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports], dtype=float)


def _cut(d: np.ndarray) -> np.ndarray:
    return (d.min(axis=1) < 0.0) & (d.max(axis=1) > 0.0)


def _split4(corners: np.ndarray) -> np.ndarray:
    """(N, 3, 2) triangles into (4N, 3, 2) children, parent-major order."""
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    kids = np.stack(
        [np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1), np.stack([ca, bc, c], 1), np.stack([bc, ca, ab], 1)],
        axis=1,
    )
    return kids.reshape(-1, 3, 2)


def _signed_area(corners: np.ndarray) -> np.ndarray:
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _integration_cells(corners: np.ndarray, level_set, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Sub-triangles covering each triangle, refined where the interface cuts.

    Returns ``(cells, parent)``: cut triangles are split into four children
    recursively (only cut children are split again) up to ``depth`` levels.
    """
    parent_ids = np.arange(len(corners))
    d = level_set(corners.reshape(-1, 2)).reshape(-1, 3)
    cut = _cut(d)
    cells = [corners[~cut]]
    parents = [parent_ids[~cut]]
    work, work_parent = corners[cut], parent_ids[cut]
    for level in range(depth):
        if len(work) == 0:
            break
        work = _split4(work)
        work_parent = np.repeat(work_parent, 4)
        if level == depth - 1:
            break
        d = level_set(work.reshape(-1, 2)).reshape(-1, 3)
        cut = _cut(d)
        cells.append(work[~cut])
        parents.append(work_parent[~cut])
        work, work_parent = work[cut], work_parent[cut]
    cells.append(work)
    parents.append(work_parent)
    return np.concatenate(cells), np.concatenate(parents)


def error_norms(
    solution: FemSolution,
    problem: TestProblem,
    depth: int = 3,
    rule: QuadratureRule = DEGREE4,
) -> ErrorReport:
    """L2, H1 and sampled max-norm errors of a discrete solution.

    Integrals use ``rule`` on every triangle, with triangles cut by the
    interface subdivided ``depth`` times first.  The max norm is sampled at
    vertices, edge midpoints and quadrature points, once over the whole
    domain and once over the triangles outside the discrete layer.
    Sums use numpy's pairwise summation.
    """
    mesh = solution.mesh
    u = np.asarray(solution.coefficients)
    corners = mesh.corners()
    grads, _ = p1_gradients(corners)
    grad_h = np.einsum("tk,tkd->td", u[mesh.triangles], grads)
    offset = u[mesh.triangles[:, 0]] - np.einsum("td,td->t", grad_h, corners[:, 0])

    cells, parent = _integration_cells(corners, problem.interface, depth)
    qp = quadrature_points(cells, rule)  # (C, Q, 2)
    pts = qp.reshape(-1, 2)
    u_ex, g_ex = problem.exact(pts)
    par_q = np.repeat(parent, len(rule.weights))
    u_h = offset[par_q] + np.einsum("nd,nd->n", grad_h[par_q], pts)
    err = (u_ex - u_h).reshape(len(cells), -1)
    gerr = (g_ex - grad_h[par_q]).reshape(len(cells), -1, 2)
    area = _signed_area(cells)
    l2_sq = float(np.sum(area * (err**2 @ rule.weights)))
    h1_sq = float(np.sum(area * (np.sum(gerr**2, axis=2) @ rule.weights)))

    # max-norm samples: corners, edge midpoints, and the quadrature points above
    nt = mesh.num_triangles
    mids = 0.5 * (corners + np.roll(corners, -1, axis=1))
    node_pts = np.concatenate([corners, mids], axis=1)  # (NT, 6, 2)
    bary_u = np.concatenate([u[mesh.triangles], 0.5 * (u[mesh.triangles] + np.roll(u[mesh.triangles], -1, axis=1))], axis=1)
    node_err = np.abs(problem.exact_u(node_pts.reshape(-1, 2)).reshape(nt, 6) - bary_u).max(axis=1)
    q_err = np.abs(err).max(axis=1)
    per_triangle = node_err.copy()
    np.maximum.at(per_triangle, parent, q_err)
    outside = solution.classification.element_class != LAYER
    linf_omega = float(per_triangle.max())
    linf_outside = float(per_triangle[outside].max()) if outside.any() else 0.0

    cls = solution.classification
    return ErrorReport(
        l2=float(np.sqrt(l2_sq)),
        h1_semi=float(np.sqrt(h1_sq)),
        h1_full=float(np.sqrt(l2_sq + h1_sq)),
        linf_omega=linf_omega,
        linf_outside=linf_outside,
        eps=cls.eps,
        h=mesh_metrics(mesh).h,
        delta=cls.delta,
        kappa=cls.kappa,
        free_dofs=solution.free_dofs,
        vertices=mesh.num_vertices,
        galerkin_residual=solution.galerkin_residual,
        load_norm=solution.load_norm,
    )


def fit_rate(params: Sequence[float], errors: Sequence[float], window: int | slice | None = None) -> float:
    """Least-squares slope of ``log(error)`` against ``log(param)``.

    ``window`` selects the rows: an int ``k`` means the last ``k`` rows, a
    slice is applied as is, ``None`` uses every row.
    """
    p = np.asarray(params, dtype=float)
    e = np.asarray(errors, dtype=float)
    if isinstance(window, int):
        if window < 2:
            raise ValueError("need at least two rows to fit a rate")
        p, e = p[-window:], e[-window:]
    elif isinstance(window, slice):
        p, e = p[window], e[window]
    if len(p) < 2:
        raise ValueError("need at least two rows to fit a rate")
    if np.any(e <= 0) or np.any(p <= 0):
        raise ValueError("rates need strictly positive errors and parameters")
    slope, _ = np.polyfit(np.log(p), np.log(e), 1)
    return float(slope)


def table_rate(table: ConvergenceTable, norm: str, window: int | slice | None = None) -> float:
    return fit_rate(table.params, table.column(norm), window)


def saturation_index(errors: Sequence[float], threshold: float = 0.1) -> int:
    """Index of the first row whose error dropped by less than ``threshold`` (relative).

    Returns ``len(errors)`` when no row is saturated.
    """
    e = np.asarray(errors, dtype=float)
    for i in range(1, len(e)):
        if e[i] > (1.0 - threshold) * e[i - 1]:
            return i
    return len(e)


def presaturation_window(errors: Sequence[float], threshold: float = 0.1) -> slice:
    """Rows before saturation sets in."""
    return slice(0, saturation_index(errors, threshold))
