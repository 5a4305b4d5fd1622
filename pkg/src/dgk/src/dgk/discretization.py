"""Modal DG machinery: state, projection, traces, residual assembly and error norms."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .basis import BasisSet, QuadRule, gauss_rule, mass_diag
from .errors import StateError
from .kinetics import GasModel, cell_flux_pairs, cell_flux_rates, interface_flux_pair, interface_flux_rate
from .mesh import Mesh
from .runtime import (
    MockWorkerPool,
    Partition,
    block_sum,
    deterministic_reduce,
    make_partition,
    parallel_map_cells,
)

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]
Field = Callable[[Array], Array]

_AXIS_NAMES = "xyz"

TIME_DERIVATIVES = ("kinetic", "operator")


@dataclass
class DGState:
    """Modal coefficients per cell, shape (nx, ny, nz, N, 5), at ``time``."""

    coeffs: Array
    time: float = 0.0

    @property
    def flat(self) -> Array:
        """View of the coefficients as (ncells, N, 5)."""
        return self.coeffs.reshape(-1, *self.coeffs.shape[-2:])

    def cell_averages(self) -> Array:
        """Cell averages (ncells, 5): the coefficient of B_(0,0,0) with P_0 = 1."""
        return self.flat[:, 0, :]

    def copy(self) -> DGState:
        return DGState(self.coeffs.copy(), self.time)


def evaluate(coeffs: Array, table: Array) -> Array:
    """Expansion values at reference points: (n, N, 5) with table (Q, N) -> (n, Q, 5).

    Accumulates over basis functions in fixed order so results are independent of how
    cells are batched.
    """
    out = np.zeros((coeffs.shape[0], table.shape[0], coeffs.shape[-1]))
    for n in range(table.shape[1]):
        out += table[None, :, n, None] * coeffs[:, None, n, :]
    return out


def weighted_sum(values: Array, weights: Array) -> Array:
    """sum_q w_q v[..., q] accumulated in fixed order."""
    out = np.zeros(values.shape[:-1])
    for q, weight in enumerate(weights):
        out += weight * values[..., q]
    return out


def project_onto(values: Array, weights: Array, table: Array) -> Array:
    """Quadrature inner products sum_q w_q v_q B_n(x_q): (n, Q, 5) -> (n, N, 5)."""
    out = np.zeros((values.shape[0], table.shape[1], values.shape[-1]))
    for q in range(table.shape[0]):
        out += (weights[q] * table[None, q, :, None]) * values[:, q, None, :]
    return out


@dataclass(frozen=True)
class PointSet:
    """Basis values and reference gradients at a set of reference points."""

    rule: QuadRule
    points: Array
    values: Array
    gradients: Array

    @classmethod
    def build(cls, basis: BasisSet, rule: QuadRule, points: Array) -> PointSet:
        return cls(rule=rule, points=points, values=basis.values(points), gradients=basis.gradients(points))

    def gradient_table(self, axis: int) -> Array:
        return self.gradients[:, axis, :]


def face_points(rule2d: QuadRule, axis: int, side: int) -> Array:
    """Reference points on the minus (side 0) or plus (side 1) face normal to ``axis``."""
    tangential = [a for a in range(3) if a != axis]
    pts = np.empty((rule2d.size, 3))
    pts[:, axis] = -1.0 if side == 0 else 1.0
    pts[:, tangential[0]] = rule2d.points[:, 0]
    pts[:, tangential[1]] = rule2d.points[:, 1]
    return pts


def evaluate_with_gradients(
    coeffs: Array, points: PointSet, widths: Array
) -> tuple[Array, Array]:
    """Values (n, Q, 5) and physical gradients (n, Q, 3, 5) of the expansion."""
    values = evaluate(coeffs, points.values)
    grads = np.stack(
        [
            evaluate(coeffs, points.gradient_table(axis)) * (2.0 / widths[:, axis])[:, None, None]
            for axis in range(3)
        ],
        axis=-2,
    )
    return values, grads


def project(field_fn: Field, mesh: Mesh, basis: BasisSet, time: float = 0.0) -> DGState:
    """L2 projection of a conserved field onto the basis with (k+2)-point Gauss per axis.

    Args:
        field_fn: Maps physical points (..., 3) to conserved states (..., 5)
        mesh: Mesh
        basis: Basis
        time: Time stamp of the returned state
    """
    rule = gauss_rule(basis.k + 2, 3)
    table = basis.values(rule.points)
    x = mesh.physical(rule.points)
    values = np.asarray(field_fn(x), dtype=float)
    coeffs = project_onto(values, rule.weights, table) * basis.norm_factor[None, :, None]
    nx, ny, nz = mesh.shape
    return DGState(coeffs.reshape(nx, ny, nz, basis.N, 5), time)


def trace_and_slopes(
    state: DGState,
    mesh: Mesh,
    basis: BasisSet,
    cell: tuple[int, int, int],
    face: tuple[int, int],
    point: ArrayLike,
) -> tuple[Array, Array]:
    """One-sided value and x/y/z derivatives of the in-cell expansion at a face point.

    Args:
        state: DG state
        mesh: Mesh
        basis: Basis
        cell: (i, j, k) cell index
        face: (axis, side) with side 0 for the minus face and 1 for the plus face
        point: Tangential reference coordinates in [-1, 1]^2, ordered by increasing axis
    """
    axis, side = face
    tangential = [a for a in range(3) if a != axis]
    xi = np.empty(3)
    xi[axis] = -1.0 if side == 0 else 1.0
    xi[tangential] = np.asarray(point, dtype=float)
    flat = int(np.ravel_multi_index(cell, mesh.shape))
    coeffs = state.flat[flat]
    widths = mesh.widths[flat]
    value = basis.values(xi) @ coeffs
    grads = basis.gradients(xi) @ coeffs * (2.0 / widths)[:, None]
    return value, grads


@dataclass
class ResidualAssembler:
    """Assembles R(Q_h) and its time-derivative counterpart R_t(Q_h) on a periodic mesh.

    Phase one computes every face flux once (the plus face of each cell along each axis)
    into a face buffer; phase two gathers face fluxes and adds the volume term per cell.

    ``time_derivative`` selects how L_t is formed. "kinetic" takes the time derivative of
    the gas-kinetic flux from the trace slopes through the compatibility condition.
    "operator" differentiates the inviscid semi-discrete operator along L itself,
    L_t = L'(Q) L(Q), from the traces of L; it needs an inviscid gas and costs a second
    assembly pass. None picks "operator" for inviscid gas and "kinetic" otherwise.

    Attributes:
        flux_points: Gauss points per axis for surface and volume flux quadrature
            (defaults to k)
        count_faces: Count face-point flux evaluations in ``face_evaluations``
    """

    mesh: Mesh
    basis: BasisSet
    gas: GasModel
    partition: Partition | None = None
    pool: object | None = None
    flux_points: int | None = None
    time_derivative: str | None = None
    count_faces: bool = False
    face_evaluations: int = field(default=0, init=False)

    def __post_init__(self):
        if self.partition is None:
            self.partition = make_partition(self.mesh.ncells, 1)
        if self.pool is None:
            self.pool = MockWorkerPool()
        if self.flux_points is None:
            self.flux_points = self.basis.k
        if self.time_derivative is None:
            self.time_derivative = "kinetic" if self.gas.viscous else "operator"
        if self.time_derivative not in TIME_DERIVATIVES:
            raise ValueError(
                f"time_derivative must be one of {', '.join(TIME_DERIVATIVES)}, got {self.time_derivative!r}"
            )
        if self.time_derivative == "operator" and self.gas.viscous:
            raise ValueError("the operator time derivative needs an inviscid gas")
        logger.info(
            f"Assembler: mesh {self.mesh.shape}, P{self.basis.k} N={self.basis.N}, "
            f"DoFs={self.mesh.ncells * self.basis.N}, flux points {self.flux_points}/axis, "
            f"{self.time_derivative} time derivative, workers={self.partition.workers}"
        )

    @cached_property
    def volume_points(self) -> PointSet:
        rule = gauss_rule(self.flux_points, 3)
        return PointSet.build(self.basis, rule, rule.points)

    @cached_property
    def face_point_sets(self) -> list[list[PointSet]]:
        rule = gauss_rule(self.flux_points, 2)
        return [
            [PointSet.build(self.basis, rule, face_points(rule, axis, side)) for side in (0, 1)]
            for axis in range(3)
        ]

    @cached_property
    def mass(self) -> Array:
        """Mass-matrix diagonal per flat cell (ncells, N)."""
        return mass_diag(self.mesh.widths, self.basis)

    @cached_property
    def face_areas(self) -> Array:
        return np.stack([self.mesh.face_areas(axis) for axis in range(3)])

    def _face_error(self, err: StateError, axis: int, start: int, right: Array, npoints: int) -> StateError:
        position = err.index // npoints
        cell = right[position] if err.side == "plus" else start + position
        return err.locate(cell=self.mesh.cell_index(int(cell)), location=f"{_AXIS_NAMES[axis]}-face")

    def _face_kernel(
        self, coeffs: Array, rates: Array | None, dt: float, evaluated: Array
    ) -> Callable[[int, int], Array]:
        neighbors = self.mesh.neighbors
        widths = self.mesh.widths
        parts = 2 if rates is None else 1
        npoints = self.face_point_sets[0][0].rule.size

        def kernel(start: int, stop: int) -> Array:
            out = np.empty((stop - start, 3, parts, npoints, 5))
            for axis in range(3):
                minus_side, plus_side = self.face_point_sets[axis]
                right = neighbors[axis, 1, start:stop]
                try:
                    if rates is None:
                        ql, dql = evaluate_with_gradients(coeffs[start:stop], plus_side, widths[start:stop])
                        qr, dqr = evaluate_with_gradients(coeffs[right], minus_side, widths[right])
                        pair = interface_flux_pair(ql, dql, qr, dqr, axis, self.gas, dt)
                        out[:, axis, 0] = pair.F
                        out[:, axis, 1] = pair.Ft
                    else:
                        ql = evaluate(coeffs[start:stop], plus_side.values)
                        qr = evaluate(coeffs[right], minus_side.values)
                        out[:, axis, 0] = interface_flux_rate(
                            ql,
                            qr,
                            evaluate(rates[start:stop], plus_side.values),
                            evaluate(rates[right], minus_side.values),
                            axis,
                            self.gas,
                        )
                except StateError as err:
                    raise self._face_error(err, axis, start, right, npoints)
                evaluated[start:stop] += ql.shape[1]
            return out

        return kernel

    def _cell_kernel(
        self, coeffs: Array, faces: Array, volume_fluxes: Callable[[Array, Array, slice], tuple[Array, ...]]
    ) -> Callable[[int, int], Array]:
        neighbors = self.mesh.neighbors
        widths = self.mesh.widths
        volumes = self.mesh.volumes
        vol = self.volume_points
        parts = faces.shape[2]

        def kernel(start: int, stop: int) -> Array:
            cells = slice(start, stop)
            q, dq = evaluate_with_gradients(coeffs[cells], vol, widths[cells])
            try:
                fluxes = volume_fluxes(q, dq, cells)
            except StateError as err:
                cell = start + err.index // q.shape[1]
                raise err.locate(cell=self.mesh.cell_index(cell), location="volume")

            out = np.zeros((stop - start, parts, self.basis.N, 5))
            for axis in range(3):
                scale = (volumes[cells] * 2.0 / widths[cells, axis])[:, None, None]
                table = vol.gradient_table(axis)
                for part in range(parts):
                    out[:, part] += scale * project_onto(fluxes[part][:, :, axis, :], vol.rule.weights, table)

            for axis in range(3):
                minus_side, plus_side = self.face_point_sets[axis]
                weights = plus_side.rule.weights
                area = self.face_areas[axis, cells][:, None, None]
                left = neighbors[axis, 0, cells]
                for part in range(parts):
                    outgoing = project_onto(faces[cells, axis, part], weights, plus_side.values)
                    incoming = project_onto(faces[left, axis, part], weights, minus_side.values)
                    out[:, part] += area * (incoming - outgoing)
            return out

        return kernel

    def _face_buffer(self, coeffs: Array, rates: Array | None, dt: float) -> Array:
        ncells = self.mesh.ncells
        nface = self.face_point_sets[0][0].rule.size
        faces = np.empty((ncells, 3, 2 if rates is None else 1, nface, 5))
        evaluated = np.zeros(ncells, dtype=np.int64)
        parallel_map_cells(self.partition, self._face_kernel(coeffs, rates, dt, evaluated), faces, self.pool)
        if self.count_faces:
            self.face_evaluations += int(evaluated.sum())
        return faces

    def face_fluxes(self, coeffs: Array, dt: float) -> Array:
        """Interface F and F_t at the plus-face points of every cell, (ncells, 3, 2, Q, 5)."""
        return self._face_buffer(coeffs, None, dt)

    def residual(self, coeffs: Array, dt: float) -> tuple[Array, Array]:
        """R and R_t for flat coefficients (ncells, N, 5), R_t from the kinetic flux slopes."""
        faces = self.face_fluxes(coeffs, dt)
        rows = np.empty((self.mesh.ncells, 2, self.basis.N, 5))
        kernel = self._cell_kernel(coeffs, faces, lambda q, dq, cells: cell_flux_pairs(q, dq, self.gas))
        parallel_map_cells(self.partition, kernel, rows, self.pool)
        return rows[:, 0], rows[:, 1]

    def rate_residual(self, coeffs: Array, rates: Array) -> Array:
        """Inviscid R_t when the coefficients change at ``rates`` (ncells, N, 5)."""
        faces = self._face_buffer(coeffs, rates, 0.0)
        vol = self.volume_points

        def volume_rates(q: Array, dq: Array, cells: slice) -> tuple[Array]:
            return (cell_flux_rates(q, evaluate(rates[cells], vol.values), self.gas),)

        rows = np.empty((self.mesh.ncells, 1, self.basis.N, 5))
        parallel_map_cells(self.partition, self._cell_kernel(coeffs, faces, volume_rates), rows, self.pool)
        return rows[:, 0]

    def operator(self, coeffs: Array, dt: float) -> tuple[Array, Array]:
        """L = M^-1 R and L_t = M^-1 R_t."""
        r, rt = self.residual(coeffs, dt)
        inv_mass = 1.0 / self.mass[:, :, None]
        rates = r * inv_mass
        if self.time_derivative == "operator":
            rt = self.rate_residual(coeffs, rates)
        return rates, rt * inv_mass

    def totals(self, coeffs: Array) -> Array:
        """Domain integrals of the five conserved variables."""
        return block_sum(coeffs[:, 0, :] * self.mesh.volumes[:, None])


def residual(
    state: DGState, mesh: Mesh, basis: BasisSet, gas: GasModel, dt: float
) -> tuple[Array, Array]:
    """R and R_t per cell and basis function, shaped like ``state.coeffs``."""
    r, rt = ResidualAssembler(mesh, basis, gas).residual(state.flat, dt)
    return r.reshape(state.coeffs.shape), rt.reshape(state.coeffs.shape)


@dataclass(frozen=True)
class ErrorNorms:
    """Density errors: L1 (unnormalized), L2, and cell-average error."""

    l1: float
    l2: float
    cell_average: float


def error_norms(
    state: DGState,
    mesh: Mesh,
    basis: BasisSet,
    exact: Callable[[Array, float], Array],
    t: float,
    partition: Partition | None = None,
    pool: object | None = None,
) -> ErrorNorms:
    """Density error norms against ``exact(x, t)`` with (k+2)-point Gauss per axis."""
    rule = gauss_rule(basis.k + 2, 3)
    table = basis.values(rule.points)
    coeffs = state.flat
    volumes = mesh.volumes
    partition = partition or make_partition(mesh.ncells, 1)

    def kernel(start: int, stop: int) -> Array:
        cells = slice(start, stop)
        rho_h = evaluate(coeffs[cells], table)[..., 0]
        rho = np.asarray(exact(mesh.physical(rule.points, cells), t))[..., 0]
        diff = rho - rho_h
        out = np.empty((stop - start, 3))
        out[:, 0] = volumes[cells] * weighted_sum(np.abs(diff), rule.weights)
        out[:, 1] = volumes[cells] * weighted_sum(diff * diff, rule.weights)
        avg_diff = weighted_sum(rho, rule.weights) - coeffs[cells, 0, 0]
        out[:, 2] = volumes[cells] * avg_diff * avg_diff
        return out

    per_cell = parallel_map_cells(partition, kernel, np.empty((mesh.ncells, 3)), pool)
    return ErrorNorms(
        l1=deterministic_reduce(per_cell[:, 0]),
        l2=float(np.sqrt(deterministic_reduce(per_cell[:, 1]))),
        cell_average=float(np.sqrt(deterministic_reduce(per_cell[:, 2]))),
    )
