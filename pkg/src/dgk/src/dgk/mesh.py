"""Structured box meshes with per-axis node coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

Array = NDArray[np.float64]


@dataclass(frozen=True)
class Mesh:
    """Tensor-product mesh of axis-aligned boxes, periodic in every direction.

    Cells are flattened in C order over (nx, ny, nz), so contiguous flat ranges are
    x-major blocks.

    Attributes:
        xnodes, ynodes, znodes: Strictly increasing node coordinates per axis
        dim: 2 for a degenerate single-layer mesh in z, else 3
    """

    xnodes: Array
    ynodes: Array
    znodes: Array
    dim: int = 3
    periodic: tuple[bool, bool, bool] = (True, True, True)

    def __post_init__(self):
        for name in ("xnodes", "ynodes", "znodes"):
            nodes = np.asarray(getattr(self, name), dtype=float)
            if nodes.ndim != 1 or len(nodes) < 2:
                raise ValueError(f"{name} needs at least two nodes")
            if not np.all(np.diff(nodes) > 0.0):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, nodes)
        if not all(self.periodic):
            raise ValueError("only periodic boundaries are supported")
        if self.dim == 2 and len(self.znodes) != 2:
            raise ValueError("a 2D mesh has exactly one cell layer in z")

    @classmethod
    def from_nodes(cls, xnodes: ArrayLike, ynodes: ArrayLike, znodes: ArrayLike, dim: int = 3) -> Mesh:
        return cls(np.asarray(xnodes, float), np.asarray(ynodes, float), np.asarray(znodes, float), dim)

    @property
    def nodes(self) -> tuple[Array, Array, Array]:
        return self.xnodes, self.ynodes, self.znodes

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.xnodes) - 1, len(self.ynodes) - 1, len(self.znodes) - 1

    @property
    def ncells(self) -> int:
        nx, ny, nz = self.shape
        return nx * ny * nz

    @property
    def active_axes(self) -> tuple[int, ...]:
        return (0, 1, 2) if self.dim == 3 else (0, 1)

    @cached_property
    def widths(self) -> Array:
        """Edge lengths per flat cell, shape (ncells, 3)."""
        grids = np.meshgrid(*(np.diff(n) for n in self.nodes), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @cached_property
    def centers(self) -> Array:
        """Cell centres per flat cell, shape (ncells, 3)."""
        mids = [0.5 * (n[1:] + n[:-1]) for n in self.nodes]
        grids = np.meshgrid(*mids, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @cached_property
    def volumes(self) -> Array:
        return np.prod(self.widths, axis=1)

    @cached_property
    def domain_volume(self) -> float:
        return float(np.prod([n[-1] - n[0] for n in self.nodes]))

    def face_areas(self, axis: int) -> Array:
        """Area of the faces normal to ``axis`` per flat cell."""
        tangential = [a for a in range(3) if a != axis]
        return self.widths[:, tangential[0]] * self.widths[:, tangential[1]]

    @cached_property
    def neighbors(self) -> Array:
        """Flat index of the periodic neighbour, shape (3, 2, ncells): [axis][minus/plus]."""
        idx = np.arange(self.ncells).reshape(self.shape)
        out = np.empty((3, 2, self.ncells), dtype=np.int64)
        for axis in range(3):
            out[axis, 0] = np.roll(idx, 1, axis=axis).ravel()
            out[axis, 1] = np.roll(idx, -1, axis=axis).ravel()
        return out

    def cell_index(self, flat: int) -> tuple[int, int, int]:
        i, j, k = np.unravel_index(flat, self.shape)
        return int(i), int(j), int(k)

    def physical(self, xi: ArrayLike, cells: slice | Array = slice(None)) -> Array:
        """Map reference points (Q, 3) into the given cells -> (n, Q, 3)."""
        xi = np.asarray(xi, dtype=float)
        centers = self.centers[cells]
        half = 0.5 * self.widths[cells]
        return centers[:, None, :] + half[:, None, :] * xi[None, :, :]
