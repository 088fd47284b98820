"""Uniform cartesian periodic meshes of the 1- and 2-torus.

Cells are half-open hypercubes of edge length h = 1/m, indexed
lexicographically by multi-index (i_1, ..., i_N) with flat index
i_1 * m^(N-1) + ... + i_N.  All reductions iterate in this order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss


@dataclass(frozen=True)
class Face:
    """One oriented face of a cell: outward normal is sign * e_axis."""

    owner: int
    neighbor: int
    axis: int
    sign: int


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid of the N-torus, immutable after construction.

    Attributes
    ----------
    dim : spatial dimension N (1 or 2)
    m : cells per axis, so h = 1/m
    h : cell edge length
    cell_volume : |K| = h^N
    face_area : |K|L| = h^(N-1)
    alpha : geometric constant 2^(-N); alpha*h^N <= |K| and
        |boundary K| <= h^(N-1)/alpha hold with equality margins.
    """

    dim: int
    m: int
    h: float
    cell_volume: float
    face_area: float
    alpha: float

    @property
    def n_cells(self) -> int:
        return self.m**self.dim

    @property
    def faces_per_cell(self) -> int:
        return 2 * self.dim

    @property
    def boundary_area(self) -> float:
        return 2 * self.dim * self.h ** (self.dim - 1)

    def multi_index(self, flat: int) -> tuple[int, ...]:
        if self.dim == 1:
            return (flat,)
        return divmod(flat, self.m)

    def flat_index(self, idx: tuple[int, ...]) -> int:
        if self.dim == 1:
            return idx[0] % self.m
        return (idx[0] % self.m) * self.m + (idx[1] % self.m)

    def neighbor(self, flat: int, axis: int, sign: int) -> int:
        idx = list(self.multi_index(flat))
        idx[axis] = (idx[axis] + sign) % self.m
        return self.flat_index(tuple(idx))

    def faces(self, flat: int) -> list[Face]:
        """The 2N oriented faces of one cell.

        For m = 2 the two faces along an axis share their neighbor but
        remain distinct faces.
        """
        out = []
        for axis in range(self.dim):
            for sign in (-1, 1):
                out.append(Face(flat, self.neighbor(flat, axis, sign), axis, sign))
        return out

    def iter_faces(self):
        """All oriented faces of all cells, lexicographic order."""
        for flat in range(self.n_cells):
            yield from self.faces(flat)

    def neighbor_table(self) -> np.ndarray:
        """Array (n_cells, 2*dim): neighbor of each cell across face
        (axis, sign) in the order used by faces()."""
        table = np.empty((self.n_cells, 2 * self.dim), dtype=np.int64)
        for flat in range(self.n_cells):
            col = 0
            for axis in range(self.dim):
                for sign in (-1, 1):
                    table[flat, col] = self.neighbor(flat, axis, sign)
                    col += 1
        return table

    def cell_origin(self, flat: int) -> np.ndarray:
        return np.array(self.multi_index(flat), dtype=float) * self.h

    def cell_centers(self) -> np.ndarray:
        """Centers of all cells, shape (n_cells, dim)."""
        centers = np.empty((self.n_cells, self.dim))
        for flat in range(self.n_cells):
            centers[flat] = self.cell_origin(flat) + 0.5 * self.h
        return centers


def build_grid(dim: int, m: int) -> TorusGrid:
    """Build a uniform periodic grid with m cells per axis.

    1/h = m is an integer by construction, as mesh admissibility requires.
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    h = 1.0 / m
    return TorusGrid(
        dim=dim,
        m=int(m),
        h=h,
        cell_volume=h**dim,
        face_area=h ** (dim - 1),
        alpha=2.0 ** (-dim),
    )


def quadrature_nodes(grid: TorusGrid, quad_order: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes and weights for all cells.

    Returns (nodes, weights) with nodes of shape (n_cells, q^N, N) and
    weights of shape (q^N,) summing to 1 (average weights, not volume).
    """
    if quad_order < 1:
        raise ValueError("quad_order must be >= 1")
    x1, w1 = leggauss(quad_order)
    # map from [-1, 1] to [0, 1]
    x1 = 0.5 * (x1 + 1.0)
    w1 = 0.5 * w1
    if grid.dim == 1:
        ref = x1[:, None]
        w = w1
    else:
        xa, xb = np.meshgrid(x1, x1, indexing="ij")
        ref = np.stack([xa.ravel(), xb.ravel()], axis=-1)
        w = np.outer(w1, w1).ravel()
    origins = np.array([grid.cell_origin(i) for i in range(grid.n_cells)])
    nodes = origins[:, None, :] + grid.h * ref[None, :, :]
    return nodes, w


def cell_average(
    f: Callable[[np.ndarray], np.ndarray], grid: TorusGrid, quad_order: int = 3
) -> np.ndarray:
    """Per-cell averages (1/|K|) int_K f by tensor Gauss-Legendre.

    ``f`` maps an array of points with shape (..., dim) to values of shape
    (...,).  Exact for polynomials of degree <= 2*quad_order - 1 per axis.
    """
    nodes, w = quadrature_nodes(grid, quad_order)
    vals = np.asarray(f(nodes), dtype=float)
    return vals @ w


def refine(grid: TorusGrid) -> tuple[TorusGrid, np.ndarray]:
    """Halve the mesh size; return the fine grid and the parent-to-children
    map of shape (n_cells_coarse, 2^N).  Children tile their parent."""
    fine = build_grid(grid.dim, 2 * grid.m)
    children = np.empty((grid.n_cells, 2**grid.dim), dtype=np.int64)
    for flat in range(grid.n_cells):
        idx = grid.multi_index(flat)
        if grid.dim == 1:
            i = 2 * idx[0]
            children[flat] = [i, i + 1]
        else:
            i, j = 2 * idx[0], 2 * idx[1]
            children[flat] = [
                fine.flat_index((i, j)),
                fine.flat_index((i, j + 1)),
                fine.flat_index((i + 1, j)),
                fine.flat_index((i + 1, j + 1)),
            ]
    return fine, children


def prolong(values: np.ndarray, children: np.ndarray, fine: TorusGrid) -> np.ndarray:
    """Cell-constant prolongation from a coarse grid onto its refinement."""
    out = np.empty(fine.n_cells)
    for parent, kids in enumerate(children):
        out[kids] = values[parent]
    return out


def restrict(values_fine: np.ndarray, children: np.ndarray) -> np.ndarray:
    """Volume-weighted restriction (children have equal volume)."""
    return values_fine[children].mean(axis=1)
