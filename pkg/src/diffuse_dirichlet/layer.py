"""Discrete diffuse layer from nodal values of the signed distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

INSIDE = np.int8(-1)
LAYER = np.int8(0)
OUTSIDE = np.int8(1)


class DegenerateLayerError(ValueError):
    """The layer swallows one side of the interface completely."""


@dataclass(frozen=True)
class LayerClassification:
    """Per-triangle layer labels and the measured resolution of the layer.

    ``delta`` is the largest diameter of a triangle meeting the level sets
    ``|d| = eps``; ``kappa`` the same for ``|d| = eps + delta``.
    """

    element_class: np.ndarray
    constrained_vertex: np.ndarray
    layer_vertex: np.ndarray
    boundary_vertex: np.ndarray
    eps: float
    delta: float
    kappa: float
    nodal_distance: np.ndarray
    num_vertices: int

    @property
    def layer(self) -> np.ndarray:
        return self.element_class == LAYER

    def counts(self) -> dict[str, int]:
        ec = self.element_class
        return {
            "inside": int(np.sum(ec == INSIDE)),
            "layer": int(np.sum(ec == LAYER)),
            "outside": int(np.sum(ec == OUTSIDE)),
        }


def classify_values(tri_values: np.ndarray, eps: float) -> np.ndarray:
    """Label triangles from their ``(NT, 3)`` nodal distance values.

    A triangle is in the layer iff ``min < eps`` and ``max > -eps``; ties at
    ``+-eps`` stay outside the layer.
    """
    lo = tri_values.min(axis=1)
    hi = tri_values.max(axis=1)
    labels = np.full(len(tri_values), LAYER, dtype=np.int8)
    labels[hi <= -eps] = INSIDE
    labels[lo >= eps] = OUTSIDE
    return labels


def straddles(tri_values: np.ndarray, level: float) -> np.ndarray:
    """Triangles whose nodal values bracket ``+level`` or ``-level``."""
    lo = tri_values.min(axis=1)
    hi = tri_values.max(axis=1)
    return ((lo <= level) & (level <= hi)) | ((lo <= -level) & (-level <= hi))


def _max_diameter(diam: np.ndarray, mask: np.ndarray) -> float:
    return float(diam[mask].max()) if mask.any() else 0.0


def classify(mesh: Mesh, level_set, eps: float) -> LayerClassification:
    """Classify ``mesh`` against the layer of half-width ``eps`` around ``level_set``."""
    if not eps > 0:
        raise ValueError(f"layer width must be positive, got eps={eps!r}")
    nodal = np.asarray(level_set(mesh.vertices), dtype=float)
    tri_values = nodal[mesh.triangles]
    labels = classify_values(tri_values, eps)
    if not np.any(labels == INSIDE) or not np.any(labels == OUTSIDE):
        raise DegenerateLayerError(f"eps={eps!r} leaves no triangle on one side of the interface")

    diam = mesh.diameters()
    delta = _max_diameter(diam, straddles(tri_values, eps))
    kappa = _max_diameter(diam, straddles(tri_values, eps + delta))

    layer_vertex = np.zeros(mesh.num_vertices, dtype=bool)
    layer_vertex[mesh.triangles[labels == LAYER].ravel()] = True
    nodal.flags.writeable = False
    return LayerClassification(
        element_class=labels,
        constrained_vertex=layer_vertex | mesh.boundary_vertex,
        layer_vertex=layer_vertex,
        boundary_vertex=mesh.boundary_vertex,
        eps=float(eps),
        delta=delta,
        kappa=kappa,
        nodal_distance=nodal,
        num_vertices=mesh.num_vertices,
    )


def layer_monotonicity_check(c1: LayerClassification, c2: LayerClassification) -> bool:
    """True iff every layer triangle at the smaller width is a layer triangle at the larger."""
    if c1.element_class.shape != c2.element_class.shape or c1.num_vertices != c2.num_vertices:
        raise ValueError("classifications belong to different meshes")
    if c1.eps > c2.eps:
        c1, c2 = c2, c1
    return bool(np.all(c2.layer[c1.layer]))


def mark_layer_boundary(mesh: Mesh, level_set, eps: float) -> np.ndarray:
    """Indices of triangles whose interpolated distance crosses ``+-eps``."""
    nodal = np.asarray(level_set(mesh.vertices), dtype=float)
    return np.flatnonzero(straddles(nodal[mesh.triangles], eps))


def labels_to_text(classification: LayerClassification) -> str:
    names = {int(INSIDE): "INSIDE", int(LAYER): "LAYER", int(OUTSIDE): "OUTSIDE"}
    return "".join(names[int(v)] + "\n" for v in classification.element_class)
