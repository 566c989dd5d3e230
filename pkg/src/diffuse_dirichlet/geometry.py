"""Interface geometry and the manufactured test problem.

The interface is described by a signed distance function, negative inside
the enclosed region ``D1`` and positive in the outer region ``D2``.  All
point-valued functions accept arrays of shape ``(N, 2)`` (or a single point
of shape ``(2,)``) and are vectorized over the leading axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ArrayLike = np.ndarray | tuple | list


def _as_points(x: ArrayLike) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    return np.atleast_2d(pts), single


def clamp_profile(t):
    """Clamp ``t`` to ``[-1, 1]``: identity inside, ``sign(t)`` outside."""
    return np.clip(t, -1.0, 1.0)


def omega_eps(d, eps: float):
    """Regularized indicator of the inner region for signed distance ``d``.

    Equals 1 for ``d <= -eps``, 0 for ``d >= eps`` and is linear in between.
    """
    if not eps > 0:
        raise ValueError(f"layer width must be positive, got eps={eps!r}")
    return 0.5 * (1.0 + clamp_profile(-np.asarray(d, dtype=float) / eps))


class LevelSet:
    """Signed distance description of a closed interface."""

    def evaluate(self, x: ArrayLike):
        raise NotImplementedError

    def gradient(self, x: ArrayLike):
        raise NotImplementedError

    def __call__(self, x: ArrayLike):
        return self.evaluate(x)


@dataclass(frozen=True)
class Circle(LevelSet):
    """Circle of given radius and center; ``d(x) = |x - c| - r``."""

    radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def evaluate(self, x: ArrayLike):
        pts, single = _as_points(x)
        d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1]) - self.radius
        return d[0] if single else d

    def gradient(self, x: ArrayLike):
        """Unit outward normal field; undefined at the center."""
        pts, single = _as_points(x)
        rel = pts - np.asarray(self.center)
        r = np.hypot(rel[:, 0], rel[:, 1])
        if np.any(r == 0.0):
            raise ValueError("signed distance gradient is undefined at the circle center")
        g = rel / r[:, None]
        return g[0] if single else g

    def project(self, x: ArrayLike):
        """Closest point on the circle, ``x - d(x) grad d(x)``."""
        pts, single = _as_points(x)
        p = pts - self.evaluate(pts)[:, None] * self.gradient(pts)
        return p[0] if single else p


UNIT_CIRCLE = Circle()


def circle_signed_distance(x: ArrayLike):
    """Signed distance to the unit circle, ``|x| - 1``."""
    return UNIT_CIRCLE.evaluate(x)


def extend_constant_normal(surface_values: Callable, x: ArrayLike, level_set: Circle = UNIT_CIRCLE):
    """Extend interface data constantly along normals.

    ``surface_values`` is called with points on the interface and the result
    is returned as the value at ``x``.
    """
    return surface_values(level_set.project(x))


# ---------------------------------------------------------------------------
# manufactured solution on (-2, 2)^2 with the unit circle as interface


def _bubble(x1, x2):
    return (4.0 - x1**2) * (4.0 - x2**2)


def _outer_u(x1, x2):
    return _bubble(x1, x2)


def _outer_grad(x1, x2):
    return np.stack([-2.0 * x1 * (4.0 - x2**2), -2.0 * x2 * (4.0 - x1**2)], axis=-1)


def _outer_f(x1, x2):
    return 2.0 * (4.0 - x2**2) + 2.0 * (4.0 - x1**2)


def _inner_u(x1, x2):
    return _bubble(x1, x2) * np.exp(1.0 - x1**2 - x2**2)


def _inner_grad(x1, x2):
    p = _bubble(x1, x2)
    e = np.exp(1.0 - x1**2 - x2**2)
    return np.stack(
        [e * (-2.0 * x1 * (4.0 - x2**2) - 2.0 * x1 * p), e * (-2.0 * x2 * (4.0 - x1**2) - 2.0 * x2 * p)],
        axis=-1,
    )


def _inner_f(x1, x2):
    # -Laplace(P E) with P the bubble and E = exp(1 - |x|^2):
    # Laplace(P E) = E (Laplace P + 2 grad P . grad E / E + P (4|x|^2 - 4))
    p = _bubble(x1, x2)
    e = np.exp(1.0 - x1**2 - x2**2)
    lap_p = -2.0 * (4.0 - x2**2) - 2.0 * (4.0 - x1**2)
    cross = 8.0 * x1**2 * (4.0 - x2**2) + 8.0 * x2**2 * (4.0 - x1**2)
    return -e * (lap_p + cross + p * (4.0 * (x1**2 + x2**2) - 4.0))


def _g(x1, x2):
    return _bubble(x1, x2) * np.cos(1.0 - x1**2 - x2**2)


@dataclass(frozen=True)
class TestProblem:
    """Interface Dirichlet problem with a known piecewise-smooth solution.

    The callables take coordinate arrays ``(x1, x2)``; the ``inner_*``
    members are used where the signed distance is negative and the
    ``outer_*`` members elsewhere (the interface itself belongs to the
    outer branch for gradients; values agree there).
    """

    __test__ = False  # not a pytest class

    inner_u: Callable = _inner_u
    outer_u: Callable = _outer_u
    inner_grad: Callable = _inner_grad
    outer_grad: Callable = _outer_grad
    inner_f: Callable = _inner_f
    outer_f: Callable = _outer_f
    g: Callable = _g
    interface: Circle = field(default=UNIT_CIRCLE)
    domain: tuple[float, float, float, float] = (-2.0, 2.0, -2.0, 2.0)

    def contains(self, x: ArrayLike) -> np.ndarray:
        pts, _ = _as_points(x)
        x0, x1, y0, y1 = self.domain
        tol = 1e-12 * max(x1 - x0, y1 - y0)
        x0, x1, y0, y1 = x0 - tol, x1 + tol, y0 - tol, y1 + tol
        return (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)

    def exact(self, x: ArrayLike):
        """Exact solution and gradient at ``x``; see :func:`evaluate_exact`."""
        return evaluate_exact(self, x)

    def exact_u(self, x: ArrayLike):
        return evaluate_exact(self, x)[0]

    def source(self, x: ArrayLike):
        return evaluate_source(self, x)

    def boundary_extension(self, x: ArrayLike):
        pts, single = _as_points(x)
        v = self.g(pts[:, 0], pts[:, 1])
        return v[0] if single else v


def reference_problem() -> TestProblem:
    """The circle-in-square benchmark with an exponential inner branch."""
    return TestProblem()


def zero_problem() -> TestProblem:
    """Problem with all data identically zero (solution zero)."""

    def zero(x1, x2):
        return np.zeros(np.broadcast(x1, x2).shape)

    def zero_grad(x1, x2):
        return np.zeros(np.broadcast(x1, x2).shape + (2,))

    return TestProblem(zero, zero, zero_grad, zero_grad, zero, zero, zero)


def evaluate_exact(problem: TestProblem, x: ArrayLike):
    """Return ``(u, grad_u)`` of the exact solution at ``x``.

    The branch is selected by the sign of the signed distance; points on the
    interface use the outer branch for the gradient.
    """
    pts, single = _as_points(x)
    if not np.all(problem.contains(pts)):
        raise ValueError("point outside the closed computational domain")
    x1, x2 = pts[:, 0], pts[:, 1]
    inside = problem.interface.evaluate(pts) < 0.0
    u = np.where(inside, problem.inner_u(x1, x2), problem.outer_u(x1, x2))
    grad = np.where(inside[:, None], problem.inner_grad(x1, x2), problem.outer_grad(x1, x2))
    if single:
        return u[0], grad[0]
    return u, grad


def evaluate_source(problem: TestProblem, x: ArrayLike):
    """Right-hand side ``-Laplace u`` off the interface, zero on it."""
    pts, single = _as_points(x)
    x1, x2 = pts[:, 0], pts[:, 1]
    d = problem.interface.evaluate(pts)
    f = np.where(d < 0.0, problem.inner_f(x1, x2), problem.outer_f(x1, x2))
    f = np.where(d == 0.0, 0.0, f)
    return f[0] if single else f
