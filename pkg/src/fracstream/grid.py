"""Uniform P1 triangulation of the unit square and FEM assembly.

Node ``(i, j)`` sits at ``(x, y) = (i*h, j*h)``. Only interior nodes carry
degrees of freedom (homogeneous Dirichlet data); they are numbered
row-major in ``(i, j)``::

    index(i, j) = (i - 1) * (n_side - 1) + (j - 1),   1 <= i, j <= n_side - 1

Every cell ``[i, i+1] x [j, j+1]`` is cut along the diagonal from
``(i, j)`` to ``(i+1, j+1)`` into two right triangles.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInputError
from .linalg import SparseSpdMatrix, SpdFactor

ScalarField = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
"""``f(x, y, t)``, vectorized over numpy arrays ``x`` and ``y``."""

_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


@dataclass(frozen=True)
class Grid2D:
    n_side: int
    nodes: np.ndarray = field(repr=False)  # (n_side+1)^2 x 2 coordinates, global numbering i*(n_side+1)+j
    triangles: np.ndarray = field(repr=False)  # n_tri x 3 global node ids, counter-clockwise
    dof_of_node: np.ndarray = field(repr=False)  # global node id -> interior index, -1 on the boundary

    @property
    def h(self) -> float:
        return 1.0 / self.n_side

    @property
    def n_dofs(self) -> int:
        return (self.n_side - 1) ** 2

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def interior_index(self, i: int, j: int) -> int:
        if not (1 <= i <= self.n_side - 1 and 1 <= j <= self.n_side - 1):
            raise InvalidInputError(f"({i}, {j}) is not an interior node")
        return (i - 1) * (self.n_side - 1) + (j - 1)

    def interior_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """x and y of the interior nodes, in DOF order."""
        idx = np.arange(1, self.n_side) * self.h
        x, y = np.meshgrid(idx, idx, indexing="ij")
        return x.ravel(), y.ravel()

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_grid(n_side: int) -> Grid2D:
    if int(n_side) != n_side or n_side < 2:
        raise InvalidInputError(f"n_side must be an integer >= 2, got {n_side!r}")
    n = int(n_side)
    h = 1.0 / n
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    nodes = np.column_stack([ii.ravel() * h, jj.ravel() * h])

    def gid(i, j):
        return i * (n + 1) + j

    ci, cj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ci, cj = ci.ravel(), cj.ravel()
    sw, se, ne, nw = gid(ci, cj), gid(ci + 1, cj), gid(ci + 1, cj + 1), gid(ci, cj + 1)
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    dof = -np.ones((n + 1) * (n + 1), dtype=np.int64)
    inner = (ii >= 1) & (ii <= n - 1) & (jj >= 1) & (jj <= n - 1)
    dof[inner.ravel()] = (ii[inner] - 1) * (n - 1) + (jj[inner] - 1)
    return Grid2D(n, nodes, triangles, dof)


def _gradients(grid: Grid2D) -> np.ndarray:
    """Gradients of the three barycentric basis functions per triangle: n_tri x 3 x 2."""
    p = grid.nodes[grid.triangles]
    area2 = 2.0 * grid.triangle_areas()
    # grad(lambda_a) = rot90(p_c - p_b) / (2|K|)
    grads = np.empty((grid.n_triangles, 3, 2))
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        edge = p[:, c] - p[:, b]
        grads[:, a, 0] = -edge[:, 1] / area2
        grads[:, a, 1] = edge[:, 0] / area2
    return grads


def _assemble(grid: Grid2D, local: np.ndarray) -> SparseSpdMatrix:
    """Scatter per-triangle 3x3 blocks into the interior-DOF matrix."""
    dofs = grid.dof_of_node[grid.triangles]
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    vals = local.reshape(grid.n_triangles, 9).ravel()
    keep = (rows >= 0) & (cols >= 0)
    return SparseSpdMatrix.from_triplets(rows[keep], cols[keep], vals[keep], grid.n_dofs)


def assemble_mass(grid: Grid2D) -> SparseSpdMatrix:
    local = grid.triangle_areas()[:, None, None] * _LOCAL_MASS
    return _assemble(grid, local)


def assemble_stiffness(grid: Grid2D) -> SparseSpdMatrix:
    g = _gradients(grid)
    local = grid.triangle_areas()[:, None, None] * np.einsum("tad,tbd->tab", g, g)
    return _assemble(grid, local)


class LoadAssembler:
    """Load vectors ``b_j = int f(., t) phi_j`` by the three-point edge-midpoint rule.

    Quadrature points and scatter indices are computed once, so repeated
    calls at successive times only evaluate ``f``. On a triangle a basis
    function is 1/2 at the midpoints of the two edges touching its vertex
    and 0 at the opposite one, so each vertex receives
    ``|K|/6 * (f(m_ab) + f(m_ac))``.
    """

    def __init__(self, grid: Grid2D):
        p = grid.nodes[grid.triangles]
        # midpoint a is opposite vertex a
        mids = np.stack([(p[:, 1] + p[:, 2]) / 2, (p[:, 2] + p[:, 0]) / 2, (p[:, 0] + p[:, 1]) / 2], axis=1)
        self.x = mids[..., 0]
        self.y = mids[..., 1]
        self._scale = (grid.triangle_areas() / 6.0)[:, None]
        dofs = grid.dof_of_node[grid.triangles].ravel()
        self._keep = dofs >= 0
        self._dofs = dofs[self._keep]
        self.n_dofs = grid.n_dofs

    def __call__(self, f: ScalarField, t: float = 0.0) -> np.ndarray:
        fm = np.broadcast_to(np.asarray(f(self.x, self.y, t), dtype=float), self.x.shape)
        if not np.all(np.isfinite(fm)):
            raise InvalidInputError("source term is not finite at a quadrature point")
        vals = self._scale * (fm.sum(axis=1, keepdims=True) - fm)
        return np.bincount(self._dofs, weights=vals.ravel()[self._keep], minlength=self.n_dofs)


def assemble_load(grid: Grid2D, f: ScalarField, t: float = 0.0) -> np.ndarray:
    return LoadAssembler(grid)(f, t)


def l2_project(grid: Grid2D, g: ScalarField, mass: SparseSpdMatrix | None = None, t: float = 0.0) -> np.ndarray:
    """Coefficients of the L2 projection of ``g`` onto the interior P1 space."""
    mass = assemble_mass(grid) if mass is None else mass
    return SpdFactor(mass).solve(assemble_load(grid, g, t))
