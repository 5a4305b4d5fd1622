"""Modal Legendre bases on boxes and Gauss-Legendre quadrature rules."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import numpy.polynomial.legendre as legendre
from numpy.typing import ArrayLike, NDArray

from .errors import UnsupportedDegree

Array = NDArray[np.float64]

SUPPORTED_DEGREES = (2, 3)


@dataclass(frozen=True)
class QuadRule:
    """Gauss-Legendre rule on [-1, 1]^d with weights normalized to sum to one.

    Attributes:
        points: Reference coordinates, shape (Q, d)
        weights: Weights, shape (Q,); integrals over a box are |box| * sum(w f)
    """

    points: Array
    weights: Array

    @property
    def size(self) -> int:
        return len(self.weights)


def gauss_rule(m: int, dims: int = 1) -> QuadRule:
    """Tensor-product m-point Gauss-Legendre rule in ``dims`` dimensions.

    Points are ordered with the first coordinate varying slowest.
    """
    if m < 1:
        raise ValueError(f"quadrature needs at least one point, got {m}")
    nodes, weights = legendre.leggauss(m)
    weights = 0.5 * weights
    points = np.array(list(itertools.product(nodes, repeat=dims)), dtype=float).reshape(-1, dims)
    tensor = np.array([np.prod(w) for w in itertools.product(weights, repeat=dims)], dtype=float)
    return QuadRule(points=points, weights=tensor)


def _degree_key(index: tuple[int, int, int]) -> tuple[int, int, int]:
    return (sum(index), -index[0], -index[1])


@dataclass(frozen=True)
class BasisSet:
    """P_k modal basis B_n = P_nx(xi) P_ny(eta) P_nz(zeta) with unscaled Legendre P_l.

    Attributes:
        k: Polynomial degree
        dim: 2 (z-index restricted to 0) or 3
        indices: Multi-indices (N, 3), graded lexicographic order
    """

    k: int
    dim: int
    indices: Array

    @property
    def N(self) -> int:
        return len(self.indices)

    @cached_property
    def norm_factor(self) -> Array:
        """(2nx+1)(2ny+1)(2nz+1): |K| / M_nn for each basis function."""
        return np.prod(2.0 * self.indices + 1.0, axis=1)

    @cached_property
    def _derivative_matrix(self) -> Array:
        # row l holds the Legendre coefficients of P_l'
        d = np.zeros((self.k + 1, self.k + 1))
        for l in range(1, self.k + 1):
            unit = np.zeros(self.k + 1)
            unit[l] = 1.0
            coef = legendre.legder(unit)
            d[l, : len(coef)] = coef
        return d

    def _vander(self, xi: Array) -> tuple[Array, Array]:
        p = legendre.legvander(xi, self.k)
        dp = np.einsum("...m,lm->...l", p, self._derivative_matrix)
        return p, dp

    def values(self, xi: ArrayLike) -> Array:
        """Basis values at reference points (..., 3) -> (..., N)."""
        xi = np.asarray(xi, dtype=float)
        per_axis = [self._vander(xi[..., d])[0] for d in range(3)]
        idx = self.indices
        return per_axis[0][..., idx[:, 0]] * per_axis[1][..., idx[:, 1]] * per_axis[2][..., idx[:, 2]]

    def gradients(self, xi: ArrayLike) -> Array:
        """Reference-coordinate gradients at points (..., 3) -> (..., 3, N)."""
        xi = np.asarray(xi, dtype=float)
        tables = [self._vander(xi[..., d]) for d in range(3)]
        idx = self.indices
        grads = []
        for d in range(3):
            factors = [tables[a][1 if a == d else 0][..., idx[:, a]] for a in range(3)]
            grads.append(factors[0] * factors[1] * factors[2])
        return np.stack(grads, axis=-2)


def build_basis(k: int, dim: int = 3) -> BasisSet:
    """P_k basis of total degree <= k.

    Raises:
        UnsupportedDegree: If k is not 2 or 3
    """
    if k not in SUPPORTED_DEGREES:
        raise UnsupportedDegree(f"polynomial degree {k} is not supported (use 2 or 3)")
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    z_range = range(k + 1) if dim == 3 else range(1)
    indices = [
        (nx, ny, nz)
        for nx in range(k + 1)
        for ny in range(k + 1)
        for nz in z_range
        if nx + ny + nz <= k
    ]
    indices.sort(key=_degree_key)
    return BasisSet(k=k, dim=dim, indices=np.array(indices, dtype=int))


def mass_diag(widths: ArrayLike, basis: BasisSet) -> Array:
    """Diagonal of the mass matrix for cells with edge lengths ``widths`` (..., 3) -> (..., N)."""
    widths = np.asarray(widths, dtype=float)
    volume = widths[..., 0] * widths[..., 1] * widths[..., 2]
    return volume[..., None] / basis.norm_factor
