from dataclasses import replace
from itertools import product

import numpy as np
import pytest
import sympy as sym

from diffuse_dirichlet.analysis import error_norms
from diffuse_dirichlet.geometry import Circle, reference_problem, zero_problem
from diffuse_dirichlet.layer import classify, mark_layer_boundary
from diffuse_dirichlet.fem import (
    DEGREE2,
    DEGREE4,
    apply_constraints,
    assemble_load,
    assemble_stiffness,
    interpolate_nodal,
    local_stiffness,
    quadrature_points,
    solve_diffuse,
)
from diffuse_dirichlet.linalg import CgConfig, matvec, solve_cg, solve_dense_oracle
from diffuse_dirichlet.mesh import build_uniform, refine_marked
from oracles import stiffness_by_quadrature

P = reference_problem()
CIRCLE = Circle()


def _zero(x1, x2):
    return np.zeros(np.broadcast(x1, x2).shape)


HARMONIC = replace(P, inner_f=_zero, outer_f=_zero)


@pytest.mark.parametrize("rule", [DEGREE2, DEGREE4])
def test_quadrature_weights_and_points(rule):
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(rule.points.sum(axis=1), 1.0, atol=1e-15)
    assert np.all(rule.points >= 0)


@pytest.mark.parametrize("rule", [DEGREE2, DEGREE4])
def test_quadrature_exact_to_its_degree(rule):
    x, y = sym.symbols("x y")
    corners = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    pts = quadrature_points(corners, rule)[0]
    for a, b in product(range(rule.degree + 1), repeat=2):
        if a + b > rule.degree:
            continue
        exact = float(sym.integrate(sym.integrate(x**a * y**b, (y, 0, 1 - x)), (x, 0, 1)))
        approx = 0.5 * np.sum(rule.weights * pts[:, 0] ** a * pts[:, 1] ** b)
        assert approx == pytest.approx(exact, rel=1e-12, abs=1e-15), (a, b)


def test_local_stiffness_unit_right_triangle():
    K = local_stiffness(np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]]))[0]
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    assert np.allclose(K, expected, atol=1e-15)
    assert np.allclose(K.sum(axis=1), 0.0, atol=1e-15)


def test_local_stiffness_rejects_degenerate():
    with pytest.raises(ValueError):
        local_stiffness(np.array([[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]]))


@pytest.mark.parametrize("mesh", [build_uniform(4), refine_marked(build_uniform(4), [0, 5, 17])])
def test_stiffness_matches_quadrature_assembler(mesh):
    A = assemble_stiffness(mesh)
    assert np.max(np.abs(A.to_dense() - stiffness_by_quadrature(mesh))) <= 1e-13
    assert A.is_symmetric()
    assert np.allclose(matvec(A, np.ones(mesh.num_vertices)), 0.0, atol=1e-13)


def test_load_vector_examples():
    m = build_uniform(6)
    assert assemble_load(m, np.ones(m.num_vertices)).sum() == pytest.approx(16.0, rel=1e-14)
    assert np.array_equal(assemble_load(m, np.zeros(m.num_vertices)), np.zeros(m.num_vertices))
    single = build_uniform(1)
    only = replace(single, triangles=single.triangles[:1], generation=single.generation[:1])
    b = assemble_load(only, np.ones(4))
    area = abs(only.signed_areas()[0])
    assert np.allclose(b[only.triangles[0]], area / 3.0)
    f = np.zeros(4)
    f[only.triangles[0][0]] = 1.0
    b = assemble_load(only, f)
    assert np.allclose(b[only.triangles[0]], area / 12.0 * np.array([2.0, 1.0, 1.0]))


def test_load_integrates_linear_interpolant_exactly():
    m = refine_marked(build_uniform(5), [2, 9])
    f = 1.0 + 2.0 * m.vertices[:, 0] - m.vertices[:, 1]
    # int (1 + 2x - y) over the symmetric square is 16
    assert assemble_load(m, f).sum() == pytest.approx(16.0, rel=1e-13)
    with pytest.raises(ValueError):
        assemble_load(m, f[:-1])


def test_interpolate_nodal():
    m = build_uniform(4)
    g = interpolate_nodal(m, P.boundary_extension)
    assert g.shape == (25,)
    assert np.array_equal(g, P.g(m.vertices[:, 0], m.vertices[:, 1]))
    assert np.array_equal(interpolate_nodal(m, lambda p: 3.0), np.full(25, 3.0))
    affine = interpolate_nodal(m, lambda p: 2 * p[:, 0] - p[:, 1] + 0.5)
    assert np.allclose(affine, 2 * m.vertices[:, 0] - m.vertices[:, 1] + 0.5)


def _boundary_only(classification, mesh):
    none = np.zeros(mesh.num_vertices, dtype=bool)
    return replace(classification, layer_vertex=none, constrained_vertex=mesh.boundary_vertex.copy())


def test_boundary_only_elimination_matches_standard_dirichlet():
    m = build_uniform(8)
    c = _boundary_only(classify(m, CIRCLE, 0.125), m)
    A = assemble_stiffness(m)
    b = assemble_load(m, interpolate_nodal(m, P.source))
    sys = apply_constraints(A, b, c, interpolate_nodal(m, P.boundary_extension))
    interior = np.flatnonzero(~m.boundary_vertex)
    Ad = A.to_dense()
    assert np.array_equal(sys.free_dofs, interior)
    assert np.allclose(sys.matrix.to_dense(), Ad[np.ix_(interior, interior)], atol=0)
    assert np.allclose(sys.rhs, b[interior], atol=0)
    assert np.all(sys.constrained_values == 0.0)


def test_all_constrained_is_rejected():
    m = build_uniform(8)
    c = classify(m, CIRCLE, 0.25)
    full = np.ones(m.num_vertices, dtype=bool)
    c = replace(c, layer_vertex=full, constrained_vertex=full)
    A = assemble_stiffness(m)
    with pytest.raises(ValueError, match="no free dofs"):
        apply_constraints(A, np.zeros(m.num_vertices), c, np.zeros(m.num_vertices))


def test_galerkin_identity_and_constraints_small():
    m = build_uniform(8)
    sol = solve_diffuse(P, m, 0.25)
    c = sol.classification
    A = assemble_stiffness(m)
    b = assemble_load(m, interpolate_nodal(m, P.source))
    free = ~c.constrained_vertex
    r = matvec(A, sol.coefficients) - b
    assert np.max(np.abs(r[free])) <= 1e-10 * np.abs(b).max()
    g = interpolate_nodal(m, P.boundary_extension)
    lay = c.layer_vertex & ~m.boundary_vertex
    assert np.array_equal(sol.coefficients[lay], g[lay])
    assert np.all(sol.coefficients[m.boundary_vertex] == 0.0)


def test_zero_data_gives_zero_solution():
    sol = solve_diffuse(zero_problem(), build_uniform(16), 0.1)
    assert np.array_equal(sol.coefficients, np.zeros(sol.mesh.num_vertices))
    assert sol.iterations == 0


def test_layer_boundary_clash_warns_and_boundary_wins():
    problem = replace(P, interface=Circle(radius=1.9))
    m = build_uniform(16)
    with pytest.warns(UserWarning, match="outer boundary"):
        sol = solve_diffuse(problem, m, 0.2)
    assert np.any(sol.classification.layer_vertex & m.boundary_vertex)
    assert np.all(sol.coefficients[m.boundary_vertex] == 0.0)


def test_h1_error_decreases_under_refinement():
    coarse = error_norms(solve_diffuse(P, build_uniform(36), 0.125), P)
    fine = error_norms(solve_diffuse(P, build_uniform(72), 0.125), P)
    assert fine.h1_semi < coarse.h1_semi


@pytest.mark.parametrize("n, eps", [(16, 0.125), (32, 0.05)])
def test_reduced_matrix_is_spd(n, eps):
    m = build_uniform(n)
    c = classify(m, CIRCLE, eps)
    sys = apply_constraints(assemble_stiffness(m), np.zeros(m.num_vertices), c, np.zeros(m.num_vertices))
    A = sys.matrix
    assert A.is_symmetric()
    rng = np.random.default_rng(n)
    for _ in range(100):
        x = rng.standard_normal(A.n)
        assert x @ matvec(A, x) > 0.0


@pytest.mark.parametrize("n, eps", [(16, 0.25), (32, 0.125), (48, 0.05)])
def test_cg_matches_dense_oracle_on_fem_systems(n, eps):
    m = build_uniform(n)
    c = classify(m, CIRCLE, eps)
    A = assemble_stiffness(m)
    b = assemble_load(m, interpolate_nodal(m, P.source))
    sys = apply_constraints(A, b, c, interpolate_nodal(m, P.boundary_extension))
    assert sys.matrix.n <= 5000
    x, _ = solve_cg(sys.matrix, sys.rhs, CgConfig(1e-12))
    ref = solve_dense_oracle(sys.matrix, sys.rhs)
    assert np.max(np.abs(x - ref)) <= 1e-8 * np.max(np.abs(ref))


def _dmp_meshes():
    base = build_uniform(16)
    local = refine_marked(base, mark_layer_boundary(base, CIRCLE, 0.1))
    local = refine_marked(local, mark_layer_boundary(local, CIRCLE, 0.1))
    return [base, build_uniform(24), local]


@pytest.mark.parametrize("mesh_index", range(3))
@pytest.mark.parametrize("eps", [0.05, 0.2])
def test_discrete_maximum_principle(mesh_index, eps):
    m = _dmp_meshes()[mesh_index]
    sol = solve_diffuse(HARMONIC, m, eps)
    c = sol.classification.constrained_vertex
    u = sol.coefficients
    lo, hi = u[c].min(), u[c].max()
    tol = 1e-10 * max(1.0, np.abs(u[c]).max())
    assert np.all(u[~c] >= lo - tol) and np.all(u[~c] <= hi + tol)


def test_affine_data_reproduced_exactly():
    m = refine_marked(build_uniform(12), [3, 40, 41, 100])
    c = classify(m, CIRCLE, 0.1)
    c = replace(
        c,
        layer_vertex=c.layer_vertex | m.boundary_vertex,
        boundary_vertex=np.zeros(m.num_vertices, dtype=bool),
    )
    g = interpolate_nodal(m, lambda p: 3.0 * p[:, 0] - 2.0 * p[:, 1] + 1.0)
    A = assemble_stiffness(m)
    sys = apply_constraints(A, np.zeros(m.num_vertices), c, g)
    x, _ = solve_cg(sys.matrix, sys.rhs, CgConfig(1e-14))
    assert np.max(np.abs(sys.expand(x) - g)) <= 1e-12 * np.abs(g).max()
