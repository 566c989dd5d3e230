"""The three convergence studies: in the layer width, and in h on uniform and graded meshes."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .analysis import ConvergenceTable, error_norms
from .fem import FemSolution, solve_diffuse
from .geometry import TestProblem, reference_problem
from .layer import classify, labels_to_text, mark_layer_boundary
from .linalg import CgConfig
from .mesh import Mesh, build_uniform, mesh_metrics, refine_marked, refine_uniform, write_mesh

log = logging.getLogger(__name__)

DEFAULT_EPS_MESH = 288
FULL_EPS_MESH = 576
DEFAULT_H_MESHES = (72, 144, 288)
FULL_H_MESHES = (72, 144, 288, 576)
DEFAULT_EPS_EXPONENTS = range(1, 13)
FULL_EPS_EXPONENTS = range(1, 21)
FIXED_EPS = 2.0**-20


class RefinementTargetError(RuntimeError):
    """Local refinement did not reach the requested layer resolution."""


class ExperimentKind(enum.Enum):
    EPS_SWEEP = "eps"
    H_SWEEP_UNIFORM = "h-uniform"
    H_SWEEP_LOCAL = "h-local"


@dataclass
class ExperimentSpec:
    kind: ExperimentKind
    eps_list: Sequence[float] = tuple(2.0**-i for i in DEFAULT_EPS_EXPONENTS)
    mesh_list: Sequence[int] = DEFAULT_H_MESHES
    base_n: int = DEFAULT_EPS_MESH
    eps: float = FIXED_EPS
    delta_power: float = 2.0  # local refinement target: delta <= h**delta_power
    kappa_factor: float = 4.0  # and kappa <= kappa_factor * delta
    max_passes: int = 40
    out_dir: Path | None = None
    dump_mesh: bool = False
    dump_layer: bool = False
    dump_solution: bool = False
    cg: CgConfig = field(default_factory=CgConfig)
    problem: TestProblem = field(default_factory=reference_problem)

    def __post_init__(self):
        if self.kind is ExperimentKind.EPS_SWEEP:
            sched = np.asarray(self.eps_list, dtype=float)
            if sched.size == 0 or np.any(np.diff(sched) >= 0) or np.any(sched <= 0):
                raise ValueError("eps schedule must be non-empty, positive and strictly decreasing")
        else:
            sched = np.asarray(self.mesh_list)
            if sched.size == 0 or np.any(np.diff(sched) <= 0) or np.any(sched < 1):
                raise ValueError("mesh schedule must be non-empty and strictly increasing")


@dataclass(frozen=True)
class LayerRefinement:
    mesh: Mesh
    passes: int
    delta: float
    kappa: float
    delta_target: float


def refine_layer(
    mesh: Mesh,
    level_set,
    eps: float,
    delta_target: float,
    kappa_factor: float = 4.0,
    max_passes: int = 40,
) -> LayerRefinement:
    """Bisect triangles on the layer boundary until ``delta <= delta_target``
    and ``kappa <= kappa_factor * delta``.

    Each pass refines the triangles meeting ``|d| = eps`` that are still
    larger than the target; once that holds, the triangles meeting
    ``|d| = eps + delta`` larger than ``kappa_factor * delta``.
    """
    for passes in range(max_passes + 1):
        cls = classify(mesh, level_set, eps)
        if cls.delta <= delta_target and cls.kappa <= kappa_factor * cls.delta:
            return LayerRefinement(mesh, passes, cls.delta, cls.kappa, delta_target)
        if passes == max_passes:
            break
        diam = mesh.diameters()
        if cls.delta > delta_target:
            marked = mark_layer_boundary(mesh, level_set, eps)
            marked = marked[diam[marked] > delta_target]
        else:
            marked = mark_layer_boundary(mesh, level_set, eps + cls.delta)
            marked = marked[diam[marked] > kappa_factor * cls.delta]
        mesh = refine_marked(mesh, marked)
    raise RefinementTargetError(
        f"after {max_passes} passes: delta={cls.delta:.3e} (target {delta_target:.3e}),"
        f" kappa={cls.kappa:.3e} (target {kappa_factor * cls.delta:.3e})"
    )


def _uniform_meshes(ns: Sequence[int]) -> list[Mesh]:
    meshes: list[Mesh] = []
    for n in ns:
        if meshes and n == 2 * ns[len(meshes) - 1]:
            meshes.append(refine_uniform(meshes[-1]))
        else:
            meshes.append(build_uniform(n))
    return meshes


def _dump(spec: ExperimentSpec, label: str, solution: FemSolution) -> None:
    if spec.out_dir is None:
        return
    out = Path(spec.out_dir)
    if spec.dump_mesh:
        write_mesh(solution.mesh, out / f"mesh_{label}.txt")
    if spec.dump_layer:
        (out / f"layer_{label}.txt").write_text(labels_to_text(solution.classification), encoding="ascii")
    if spec.dump_solution:
        write_solution(solution, out / f"solution_{label}.txt")


def write_solution(solution: FemSolution, path) -> None:
    """``vertex_index x y value`` per line."""
    with Path(path).open("w", encoding="ascii", newline="\n") as fh:
        for i, ((x, y), v) in enumerate(zip(solution.mesh.vertices.tolist(), solution.coefficients.tolist())):
            fh.write(f"{i} {x!r} {y!r} {v!r}\n")


def _solve_and_measure(spec, mesh, eps, table, param, label, meta=None):
    solution = solve_diffuse(spec.problem, mesh, eps, spec.cg)
    report = error_norms(solution, spec.problem)
    table.append(param, report)
    table.meta.append(dict(meta or {}, iterations=solution.iterations))
    log.info(
        "%s=%.6g vertices=%d l2=%.4e h1=%.4e linf=%.4e",
        table.param_name,
        param,
        mesh.num_vertices,
        report.l2,
        report.h1_semi,
        report.linf_omega,
    )
    _dump(spec, label, solution)
    return solution


def run_eps_sweep(spec: ExperimentSpec, on_solution: Callable | None = None) -> ConvergenceTable:
    """One solve per layer width on a single uniform mesh."""
    mesh = build_uniform(spec.base_n)
    table = ConvergenceTable("eps")
    for k, eps in enumerate(spec.eps_list):
        sol = _solve_and_measure(spec, mesh, eps, table, eps, f"eps{k + 1:02d}")
        if on_solution:
            on_solution(sol)
    return table


def run_h_sweep_uniform(spec: ExperimentSpec, on_solution: Callable | None = None) -> ConvergenceTable:
    """Fixed layer width, successively red-refined uniform meshes."""
    table = ConvergenceTable("h")
    for n, mesh in zip(spec.mesh_list, _uniform_meshes(spec.mesh_list)):
        h = mesh_metrics(mesh).h
        sol = _solve_and_measure(spec, mesh, spec.eps, table, h, f"n{n}", {"n": n})
        if on_solution:
            on_solution(sol)
    return table


def run_h_sweep_local(spec: ExperimentSpec, on_solution: Callable | None = None) -> ConvergenceTable:
    """Fixed layer width, uniform meshes graded at the layer boundary to ``delta <= h^2``."""
    table = ConvergenceTable("h")
    for n, base in zip(spec.mesh_list, _uniform_meshes(spec.mesh_list)):
        h = mesh_metrics(base).h
        ref = refine_layer(
            base,
            spec.problem.interface,
            spec.eps,
            delta_target=h**spec.delta_power,
            kappa_factor=spec.kappa_factor,
            max_passes=spec.max_passes,
        )
        meta = {
            "n": n,
            "passes": ref.passes,
            "delta_target": ref.delta_target,
            "kappa_target": spec.kappa_factor * ref.delta,
        }
        sol = _solve_and_measure(spec, ref.mesh, spec.eps, table, h, f"n{n}", meta)
        if on_solution:
            on_solution(sol)
    return table


RUNNERS = {
    ExperimentKind.EPS_SWEEP: run_eps_sweep,
    ExperimentKind.H_SWEEP_UNIFORM: run_h_sweep_uniform,
    ExperimentKind.H_SWEEP_LOCAL: run_h_sweep_local,
}

# predicted rates per norm, used for reference lines and summaries
PREDICTED_RATES = {
    ExperimentKind.EPS_SWEEP: {"l2": 1.0, "h1_semi": 0.5, "linf_omega": 1.0},
    ExperimentKind.H_SWEEP_UNIFORM: {"l2": 1.0, "h1_semi": 0.5, "linf_omega": 1.0},
    ExperimentKind.H_SWEEP_LOCAL: {"l2": 2.0, "h1_semi": 1.0, "linf_omega": 2.0},
}


def run(spec: ExperimentSpec) -> ConvergenceTable:
    return RUNNERS[spec.kind](spec)
