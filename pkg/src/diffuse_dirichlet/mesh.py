"""Conforming triangulations of a rectangle.

Triangles are stored counterclockwise with the *newest vertex first*, so the
refinement edge of every triangle is the edge opposite local vertex 0
(vertices 1 and 2).  This convention is what makes newest-vertex bisection
a few array operations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Triangulation with newest-vertex bookkeeping.

    Attributes
    ----------
    vertices : (NV, 2) float array
    triangles : (NT, 3) int array, counterclockwise, newest vertex first
    boundary_vertex : (NV,) bool array
    generation : (NT,) int array of bisection depths
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex: np.ndarray
    generation: np.ndarray

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.boundary_vertex, self.generation):
            arr.flags.writeable = False

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def refinement_edge(self) -> np.ndarray:
        """Local index of the edge opposite the newest vertex (always 0)."""
        return np.zeros(self.num_triangles, dtype=np.int8)

    def corners(self) -> np.ndarray:
        """(NT, 3, 2) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    def signed_areas(self) -> np.ndarray:
        c = self.corners()
        e1 = c[:, 1] - c[:, 0]
        e2 = c[:, 2] - c[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edge_lengths(self) -> np.ndarray:
        """(NT, 3) lengths; column k is the edge opposite local vertex k."""
        c = self.corners()
        return np.stack(
            [
                np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
                np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
                np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
            ],
            axis=1,
        )

    def diameters(self) -> np.ndarray:
        return self.edge_lengths().max(axis=1)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique edges and the triangle-to-edge map.

        Returns ``(edges, t2e)`` where ``edges`` is ``(NE, 2)`` with sorted
        vertex pairs and ``t2e[t, k]`` is the edge opposite local vertex k.
        """
        return _edges(self.triangles, self.num_vertices)


def _edges(triangles: np.ndarray, nv: int) -> tuple[np.ndarray, np.ndarray]:
    t = triangles
    local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
    local = np.sort(local, axis=1)
    keys = local[:, 0].astype(np.int64) * nv + local[:, 1]
    ukeys, inverse = np.unique(keys, return_inverse=True)
    edges = np.stack([ukeys // nv, ukeys % nv], axis=1)
    return edges, inverse.reshape(-1, 3)


def _newest_vertex_at_longest_edge(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Rotate each triangle so that local vertex 0 faces its longest edge."""
    c = vertices[triangles]
    lengths = np.stack(
        [
            np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
            np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
            np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
        ],
        axis=1,
    )
    # ties broken toward the lowest local index; right triangles have none
    shift = np.argmax(lengths * (1.0 + 1e-12 * np.array([2.0, 1.0, 0.0])), axis=1)
    idx = (shift[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(triangles, idx, axis=1)


def build_uniform(n: int, lower: float = -2.0, upper: float = 2.0) -> Mesh:
    """Criss-cross mesh of the square ``(lower, upper)^2`` with ``n`` cells per side.

    Every cell is split along its lower-left to upper-right diagonal.
    """
    if n < 1:
        raise ValueError(f"need at least one subdivision per side, got n={n}")
    coords = np.linspace(lower, upper, n + 1)
    X, Y = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    ll = j * (n + 1) + i
    lr = ll + 1
    ul = ll + (n + 1)
    ur = ul + 1
    # right-angle corner first: refinement edge is the shared diagonal
    lower_tri = np.stack([lr, ur, ll], axis=1)
    upper_tri = np.stack([ul, ll, ur], axis=1)
    triangles = np.concatenate([lower_tri, upper_tri]).astype(np.int64)

    boundary = (
        np.isclose(vertices[:, 0], lower)
        | np.isclose(vertices[:, 0], upper)
        | np.isclose(vertices[:, 1], lower)
        | np.isclose(vertices[:, 1], upper)
    )
    return Mesh(vertices, triangles, boundary, np.zeros(len(triangles), dtype=np.int64))


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: each triangle into four similar children."""
    nv = mesh.num_vertices
    edges, t2e = mesh.edges()
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.concatenate([mesh.vertices, mids])
    a, b, c = mesh.triangles.T
    m_bc, m_ca, m_ab = (t2e + nv).T
    children = np.concatenate(
        [
            np.stack([a, m_ab, m_ca], axis=1),
            np.stack([b, m_bc, m_ab], axis=1),
            np.stack([c, m_ca, m_bc], axis=1),
            np.stack([m_bc, m_ca, m_ab], axis=1),
        ]
    )
    children = _newest_vertex_at_longest_edge(vertices, children)

    edge_on_boundary = mesh.boundary_vertex[edges].all(axis=1)
    counts = np.bincount(t2e.ravel(), minlength=len(edges))
    edge_on_boundary &= counts == 1
    boundary = np.concatenate([mesh.boundary_vertex, edge_on_boundary])
    generation = np.tile(mesh.generation + 2, 4)
    return Mesh(vertices, children, boundary, generation)


def refine_marked(mesh: Mesh, marked) -> Mesh:
    """Newest-vertex bisection of the marked triangles with conforming closure.

    Every marked triangle is bisected at least once; neighbors are bisected
    as needed so that the result has no hanging nodes.
    """
    marked = np.asarray(list(marked) if isinstance(marked, (set, frozenset)) else marked)
    if marked.dtype == bool:
        marked = np.flatnonzero(marked)
    marked = marked.astype(np.int64)
    if marked.size == 0:
        return mesh
    nt = mesh.num_triangles
    if marked.min() < 0 or marked.max() >= nt:
        raise IndexError("marked triangle index out of range")

    nv = mesh.num_vertices
    edges, t2e = mesh.edges()
    counts = np.bincount(t2e.ravel(), minlength=len(edges))

    edge_marked = np.zeros(len(edges), dtype=bool)
    edge_marked[t2e[marked, 0]] = True
    # closure: a triangle with any marked edge must split its refinement edge
    while True:
        needs = edge_marked[t2e].any(axis=1) & ~edge_marked[t2e[:, 0]]
        if not needs.any():
            break
        edge_marked[t2e[needs, 0]] = True

    split = np.flatnonzero(edge_marked)
    new_ids = nv + np.arange(len(split))
    vertices = np.concatenate([mesh.vertices, 0.5 * (mesh.vertices[edges[split, 0]] + mesh.vertices[edges[split, 1]])])
    split_on_boundary = counts[split] == 1
    boundary = np.concatenate([mesh.boundary_vertex, split_on_boundary])

    total = len(vertices)
    split_keys = edges[split, 0].astype(np.int64) * total + edges[split, 1]
    order = np.argsort(split_keys)
    split_keys, mid_of_key = split_keys[order], new_ids[order]

    def midpoint_lookup(tris):
        a = np.minimum(tris[:, 1], tris[:, 2]).astype(np.int64)
        b = np.maximum(tris[:, 1], tris[:, 2])
        keys = a * total + b
        pos = np.searchsorted(split_keys, keys)
        pos = np.minimum(pos, len(split_keys) - 1)
        found = split_keys[pos] == keys
        return found, mid_of_key[pos]

    triangles = mesh.triangles.copy()
    generation = mesh.generation.copy()
    # at most three rounds: the refinement edge, then the two old edges
    for _ in range(3):
        found, mid = midpoint_lookup(triangles)
        if not found.any():
            break
        p1, p2, p3 = triangles[found].T
        p4 = mid[found]
        left = np.stack([p4, p1, p2], axis=1)
        right = np.stack([p4, p3, p1], axis=1)
        gen = generation[found] + 1
        keep = ~found
        triangles = np.concatenate([triangles[keep], left, right])
        generation = np.concatenate([generation[keep], gen, gen])
    return Mesh(vertices, triangles, boundary, generation)


@dataclass(frozen=True)
class MeshMetrics:
    h: float
    min_angle: float
    vertex_count: int
    triangle_count: int
    shape_ratio: float


def mesh_metrics(mesh: Mesh) -> MeshMetrics:
    """Mesh size, smallest interior angle (degrees), counts, and max diam/inradius."""
    L = mesh.edge_lengths()
    a, b, c = L[:, 0], L[:, 1], L[:, 2]
    cos_angles = np.stack(
        [(b**2 + c**2 - a**2) / (2 * b * c), (c**2 + a**2 - b**2) / (2 * c * a), (a**2 + b**2 - c**2) / (2 * a * b)],
        axis=1,
    )
    angles = np.degrees(np.arccos(np.clip(cos_angles, -1.0, 1.0)))
    area = np.abs(mesh.signed_areas())
    inradius = 2.0 * area / (a + b + c)
    diam = L.max(axis=1)
    return MeshMetrics(
        h=float(diam.max()),
        min_angle=float(angles.min()),
        vertex_count=mesh.num_vertices,
        triangle_count=mesh.num_triangles,
        shape_ratio=float((diam / inradius).max()),
    )


def check_mesh(mesh: Mesh, area: float | None = None, atol: float = 1e-10) -> list[str]:
    """Return a list of violated mesh invariants (empty when valid)."""
    problems = []
    sa = mesh.signed_areas()
    if np.any(sa <= 0):
        problems.append(f"{int(np.sum(sa <= 0))} triangles with non-positive signed area")
    if area is not None and abs(sa.sum() - area) > atol:
        problems.append(f"area {sa.sum():.15g} != {area}")
    edges, t2e = mesh.edges()
    counts = np.bincount(t2e.ravel(), minlength=len(edges))
    if np.any(counts > 2):
        problems.append("edge shared by more than two triangles")
    bnd_edges = edges[counts == 1]
    if not np.all(mesh.boundary_vertex[bnd_edges]):
        problems.append("hanging node: single-triangle edge in the interior")
    if np.any(np.bincount(mesh.triangles.ravel(), minlength=mesh.num_vertices) == 0):
        problems.append("unused vertex")
    return problems


def write_mesh(mesh: Mesh, path) -> None:
    """Plain text: ``NV NT``, then ``x y boundary_flag`` rows, then ``i j k`` rows."""
    path = Path(path)
    with path.open("w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{mesh.num_vertices} {mesh.num_triangles}\n")
        for (x, y), b in zip(mesh.vertices.tolist(), mesh.boundary_vertex.tolist()):
            fh.write(f"{x!r} {y!r} {int(b)}\n")
        for i, j, k in mesh.triangles.tolist():
            fh.write(f"{i} {j} {k}\n")


def read_mesh(path) -> Mesh:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    nv, nt = map(int, lines[0].split())
    vrows = np.array([line.split() for line in lines[1 : 1 + nv]], dtype=float).reshape(nv, 3)
    tris = np.array([line.split() for line in lines[1 + nv : 1 + nv + nt]], dtype=np.int64).reshape(nt, 3)
    return Mesh(vrows[:, :2].copy(), tris, vrows[:, 2].astype(bool), np.zeros(nt, dtype=np.int64))


def uniform_h(n: int, width: float = 4.0) -> float:
    return width / n * math.sqrt(2.0)
