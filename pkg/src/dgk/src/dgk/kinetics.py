"""Gas-kinetic mathematics for the BGK flux solver.

All functions are vectorized: the last axis of a state holds the five components and any
number of leading axes (quadrature points, cells, faces) is carried through. Primitive
states are stored as ``(rho, U, V, W, lam)`` with ``lam = rho / (2 p)``; micro-slopes are
five coefficients over ``psi = (1, u, v, w, (u^2 + v^2 + w^2 + xi^2) / 2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import erfc

from .errors import NonPositiveDensity, NonPositivePressure, StateError

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]

# Highest velocity moment the second-order interface flux touches: a slope term
# (degree 2 through a4) times u (the flux) times the energy weight u^2.
MOMENT_ORDER = 6

# exp(-dt/tau) is treated as zero beyond this ratio.
EXP_CUTOFF = 700.0

_UNIT = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
_AXIS_POWERS = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


@dataclass(frozen=True)
class GasModel:
    """Perfect gas with BGK relaxation.

    Attributes:
        gamma: Specific-heat ratio
        mu_ref: Dynamic viscosity, 0 for inviscid runs
        prandtl: Prandtl number (the BGK model fixes it to 1)
    """

    gamma: float = 1.4
    mu_ref: float = 0.0
    prandtl: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.K < 0.0:
            raise ValueError(f"gamma={self.gamma} gives negative internal degrees of freedom")
        if self.mu_ref < 0.0:
            raise ValueError(f"mu_ref must be non-negative, got {self.mu_ref}")
        if self.prandtl != 1.0:
            raise ValueError("only Pr=1 is supported by the BGK collision model")

    @property
    def K(self) -> float:
        """Internal degrees of freedom of the three-dimensional gas."""
        return (5.0 - 3.0 * self.gamma) / (self.gamma - 1.0)

    @property
    def viscous(self) -> bool:
        return self.mu_ref > 0.0

    def collision_time(self, p: ArrayLike) -> Array:
        """tau = mu / p, identically zero for inviscid gas."""
        p = np.asarray(p, dtype=float)
        if not self.viscous:
            return np.zeros_like(p)
        return self.mu_ref / p


class MomentTable(NamedTuple):
    """Moments of a unit-density Maxwellian, indexed by power on the last axis."""

    full: Array
    pos: Array
    neg: Array
    v: Array
    w: Array
    xi2: Array
    xi4: Array


class KineticTrace(NamedTuple):
    """One-sided state at an interface point in the face-local frame.

    ``w`` is the primitive state (..., 5); ``dq`` holds the derivatives of the conserved
    variables along the local axes (..., 3, 5), normal first.
    """

    w: Array
    dq: Array


class FluxPair(NamedTuple):
    """Flux ``F`` and its time derivative ``Ft`` at the start of a step."""

    F: Array
    Ft: Array


def _check_positive(values: Array, error: type[StateError]) -> None:
    bad = ~(values > 0.0)
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        raise error(values.flat[index], index)


def pressure(q: ArrayLike, gas: GasModel) -> Array:
    q = np.asarray(q, dtype=float)
    kinetic = 0.5 * (q[..., 1] ** 2 + q[..., 2] ** 2 + q[..., 3] ** 2) / q[..., 0]
    return (gas.gamma - 1.0) * (q[..., 4] - kinetic)


def primitive_from_conserved(q: ArrayLike, gas: GasModel) -> Array:
    """Convert (rho, mx, my, mz, E) to (rho, U, V, W, lam).

    Raises:
        NonPositiveDensity: If any density is not strictly positive
        NonPositivePressure: If any derived pressure is not strictly positive
    """
    q = np.asarray(q, dtype=float)
    rho = q[..., 0]
    _check_positive(rho, NonPositiveDensity)
    p = pressure(q, gas)
    _check_positive(p, NonPositivePressure)

    w = np.empty_like(q)
    w[..., 0] = rho
    w[..., 1:4] = q[..., 1:4] / rho[..., None]
    w[..., 4] = 0.5 * rho / p
    return w


def conserved_from_primitive(w: ArrayLike, gas: GasModel) -> Array:
    w = np.asarray(w, dtype=float)
    rho = w[..., 0]
    p = 0.5 * rho / w[..., 4]
    q = np.empty_like(w)
    q[..., 0] = rho
    q[..., 1:4] = rho[..., None] * w[..., 1:4]
    q[..., 4] = p / (gas.gamma - 1.0) + 0.5 * rho * (
        w[..., 1] ** 2 + w[..., 2] ** 2 + w[..., 3] ** 2
    )
    return q


def euler_flux(q: ArrayLike, gas: GasModel, axis: int) -> Array:
    """Analytic inviscid flux along ``axis``."""
    q = np.asarray(q, dtype=float)
    p = pressure(q, gas)
    velocity = q[..., 1 + axis] / q[..., 0]
    flux = q * velocity[..., None]
    flux[..., 1 + axis] += p
    flux[..., 4] += p * velocity
    return flux


def _recur(table: Array, mean: Array, lam: Array, order: int) -> None:
    for n in range(order - 1):
        table[..., n + 2] = mean * table[..., n + 1] + (n + 1) / (2.0 * lam) * table[..., n]


def _full_moments(mean: Array, lam: Array, order: int) -> Array:
    table = np.empty(mean.shape + (order + 1,))
    table[..., 0] = 1.0
    table[..., 1] = mean
    _recur(table, mean, lam, order)
    return table


def maxwellian_moments(w: ArrayLike, gas: GasModel, order: int = MOMENT_ORDER) -> MomentTable:
    """Full and half-space moments <u^n> of the unit-density Maxwellian of ``w``.

    Half-space tables split the normal velocity u at zero; tangential axes and the
    internal variables only need full moments.
    """
    if order < 2:
        raise ValueError(f"moment order must be at least 2, got {order}")
    w = np.asarray(w, dtype=float)
    U, V, W, lam = w[..., 1], w[..., 2], w[..., 3], w[..., 4]

    full = _full_moments(U, lam, order)

    root = np.sqrt(lam)
    tail = 0.5 * np.exp(-lam * U * U) / np.sqrt(np.pi * lam)
    pos = np.empty_like(full)
    neg = np.empty_like(full)
    pos[..., 0] = 0.5 * erfc(-root * U)
    pos[..., 1] = U * pos[..., 0] + tail
    neg[..., 0] = 0.5 * erfc(root * U)
    neg[..., 1] = U * neg[..., 0] - tail
    _recur(pos, U, lam, order)
    _recur(neg, U, lam, order)

    K = gas.K
    return MomentTable(
        full=full,
        pos=pos,
        neg=neg,
        v=_full_moments(V, lam, order),
        w=_full_moments(W, lam, order),
        xi2=K / (2.0 * lam),
        xi4=K * (K + 2.0) / (4.0 * lam * lam),
    )


def _moments_of(a: Array, table: MomentTable, mu: Array, i: int, j: int, k: int) -> tuple[Array, Array]:
    """<a u^i v^j w^k> and <a xi^2 u^i v^j w^k> for a micro-slope ``a``."""
    mv, mw = table.v, table.w

    def t(p: int, q: int, r: int) -> Array:
        return mu[..., p] * mv[..., q] * mw[..., r]

    base = t(i, j, k)
    squares = t(i + 2, j, k) + t(i, j + 2, k) + t(i, j, k + 2)
    linear = (
        a[..., 0] * base
        + a[..., 1] * t(i + 1, j, k)
        + a[..., 2] * t(i, j + 1, k)
        + a[..., 3] * t(i, j, k + 1)
    )
    half_a4 = 0.5 * a[..., 4]
    plain = linear + half_a4 * (squares + table.xi2 * base)
    internal = table.xi2 * linear + half_a4 * (table.xi2 * squares + table.xi4 * base)
    return plain, internal


def moments_of_slope(
    a: ArrayLike,
    table: MomentTable,
    powers: tuple[int, int, int] = (0, 0, 0),
    half: str | None = None,
) -> Array:
    """Five-vector <a psi u^i v^j w^k> per unit density.

    Args:
        a: Micro-slope coefficients (..., 5)
        table: Moments of the generating Maxwellian
        powers: Extra velocity powers (i, j, k)
        half: None for the full velocity space, "pos" for u > 0, "neg" for u < 0
    """
    a = np.asarray(a, dtype=float)
    mu = {None: table.full, "pos": table.pos, "neg": table.neg}[half]
    i, j, k = powers
    mass, internal = _moments_of(a, table, mu, i, j, k)
    energy = 0.5 * (
        _moments_of(a, table, mu, i + 2, j, k)[0]
        + _moments_of(a, table, mu, i, j + 2, k)[0]
        + _moments_of(a, table, mu, i, j, k + 2)[0]
        + internal
    )
    return np.stack(
        [
            mass,
            _moments_of(a, table, mu, i + 1, j, k)[0],
            _moments_of(a, table, mu, i, j + 1, k)[0],
            _moments_of(a, table, mu, i, j, k + 1)[0],
            energy,
        ],
        axis=-1,
    )


def _solve_unit(w: Array, g: Array, gas: GasModel) -> Array:
    """Closed-form solve of <a psi> = g for a unit-density Maxwellian."""
    lam = w[..., 4]
    assert np.all(lam > 0.0), "moment system is singular for non-positive lambda"
    U, V, W = w[..., 1], w[..., 2], w[..., 3]
    dof = gas.K + 3.0
    t2 = U * U + V * V + W * W + 0.5 * dof / lam
    r2 = g[..., 1] - U * g[..., 0]
    r3 = g[..., 2] - V * g[..., 0]
    r4 = g[..., 3] - W * g[..., 0]
    r5 = 2.0 * g[..., 4] - t2 * g[..., 0]
    t3 = r5 - 2.0 * (U * r2 + V * r3 + W * r4)

    a = np.empty(np.broadcast_shapes(w.shape, g.shape))
    a[..., 4] = 4.0 * lam * lam * t3 / dof
    a[..., 3] = 2.0 * lam * r4 - W * a[..., 4]
    a[..., 2] = 2.0 * lam * r3 - V * a[..., 4]
    a[..., 1] = 2.0 * lam * r2 - U * a[..., 4]
    a[..., 0] = g[..., 0] - U * a[..., 1] - V * a[..., 2] - W * a[..., 3] - 0.5 * a[..., 4] * t2
    return a


def micro_slope(w: ArrayLike, dq: ArrayLike, gas: GasModel) -> Array:
    """Micro-slope whose moments with the Maxwellian of ``w`` reproduce ``dq``."""
    w = np.asarray(w, dtype=float)
    dq = np.asarray(dq, dtype=float)
    return _solve_unit(w, dq / w[..., 0:1], gas)


def _spatial_slopes(w: Array, dq: Array, gas: GasModel) -> Array:
    g = dq / w[..., 0, None, None]
    return np.stack([_solve_unit(w, g[..., s, :], gas) for s in range(3)], axis=-2)


def _time_slope(w: Array, slopes: Array, table: MomentTable, gas: GasModel) -> Array:
    drift = sum(moments_of_slope(slopes[..., s, :], table, _AXIS_POWERS[s]) for s in range(3))
    return _solve_unit(w, -drift, gas)


def time_coefficient(
    w: ArrayLike, slopes: ArrayLike, gas: GasModel, table: MomentTable | None = None
) -> Array:
    """Time micro-slope A from the compatibility condition <(a1 u + a2 v + a3 w + A) psi> = 0.

    Args:
        w: Primitive state (..., 5)
        slopes: Spatial micro-slopes ax, ay, az stacked as (..., 3, 5)
        gas: Gas model
        table: Moments of ``w`` if already computed
    """
    w = np.asarray(w, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    if table is None:
        table = maxwellian_moments(w, gas)
    return _time_slope(w, slopes, table, gas)


class _TimeWeights(NamedTuple):
    """Integrals over [0, delta] of the time factors of the interface distribution."""

    equilibrium: Array
    equilibrium_slope: Array
    equilibrium_time: Array
    free: Array
    free_slope: Array
    free_time: Array


def _time_weights(tau: Array, delta: float) -> _TimeWeights:
    positive = tau > 0.0
    ratio = np.where(positive, delta / np.where(positive, tau, 1.0), np.inf)
    decay = np.where(ratio > EXP_CUTOFF, 0.0, np.exp(-np.minimum(ratio, EXP_CUTOFF)))
    # tau == 0 gives decay == 0 and every tau-weighted term vanishes: f = g0 (1 + A t)
    relax = tau * (1.0 - decay)
    return _TimeWeights(
        equilibrium=delta - relax,
        equilibrium_slope=tau * (-delta + 2.0 * relax - delta * decay),
        equilibrium_time=0.5 * delta * delta - tau * delta + tau * relax,
        free=relax,
        free_slope=-2.0 * tau * relax + tau * delta * decay,
        free_time=-tau * relax,
    )


def _flux_terms(
    slopes: Array, time_slope: Array, table: MomentTable, half: str | None, normal: int = 0
) -> tuple[Array, Array, Array]:
    """Flux moments <u psi>, <u psi (a . u)> and <u psi A> along ``normal``."""
    powers = _AXIS_POWERS[normal]
    base = moments_of_slope(_UNIT, table, powers, half)
    drift = sum(
        moments_of_slope(
            slopes[..., s, :],
            table,
            tuple(p + e for p, e in zip(powers, _AXIS_POWERS[s])),
            half,
        )
        for s in range(3)
    )
    return base, drift, moments_of_slope(time_slope, table, powers, half)


def _merge_halves(
    wl: Array, table_l: MomentTable, a_l: Array, wr: Array, table_r: MomentTable, a_r: Array
) -> Array:
    """rho_l <a_l psi>_{u>0} + rho_r <a_r psi>_{u<0}."""
    return wl[..., 0, None] * moments_of_slope(a_l, table_l, half="pos") + wr[
        ..., 0, None
    ] * moments_of_slope(a_r, table_r, half="neg")


def interface_flux_integrals(
    left: KineticTrace,
    right: KineticTrace,
    tau: ArrayLike,
    dt: float,
    gas: GasModel,
) -> tuple[Array, Array]:
    """Time integrals of the second-order interface flux over [0, dt] and [0, dt/2].

    The equilibrium part is built from the state and slopes obtained by merging the
    u > 0 half of the left Maxwellian with the u < 0 half of the right one.

    Raises:
        NonPositiveDensity, NonPositivePressure: If the merged state is unphysical
    """
    tau = np.asarray(tau, dtype=float)
    wl, wr = np.asarray(left.w, dtype=float), np.asarray(right.w, dtype=float)
    rho_l, rho_r = wl[..., 0, None], wr[..., 0, None]

    table_l = maxwellian_moments(wl, gas)
    table_r = maxwellian_moments(wr, gas)
    slopes_l = _spatial_slopes(wl, np.asarray(left.dq, dtype=float), gas)
    slopes_r = _spatial_slopes(wr, np.asarray(right.dq, dtype=float), gas)
    time_l = _time_slope(wl, slopes_l, table_l, gas)
    time_r = _time_slope(wr, slopes_r, table_r, gas)

    w0 = primitive_from_conserved(_merge_halves(wl, table_l, _UNIT, wr, table_r, _UNIT), gas)
    rho_0 = w0[..., 0, None]
    dq0 = np.stack(
        [
            _merge_halves(wl, table_l, slopes_l[..., s, :], wr, table_r, slopes_r[..., s, :])
            for s in range(3)
        ],
        axis=-2,
    )
    table_0 = maxwellian_moments(w0, gas)
    slopes_0 = _spatial_slopes(w0, dq0, gas)
    time_0 = _time_slope(w0, slopes_0, table_0, gas)

    eq, eq_slope, eq_time = _flux_terms(slopes_0, time_0, table_0, None)
    fl, fl_slope, fl_time = _flux_terms(slopes_l, time_l, table_l, "pos")
    fr, fr_slope, fr_time = _flux_terms(slopes_r, time_r, table_r, "neg")

    def integral(delta: float) -> Array:
        c = _time_weights(tau, delta)
        c = _TimeWeights(*(np.asarray(x)[..., None] for x in c))
        return (
            rho_0 * (c.equilibrium * eq + c.equilibrium_slope * eq_slope + c.equilibrium_time * eq_time)
            + rho_l * (c.free * fl + c.free_slope * fl_slope + c.free_time * fl_time)
            + rho_r * (c.free * fr + c.free_slope * fr_slope + c.free_time * fr_time)
        )

    return integral(dt), integral(0.5 * dt)


def smooth_flux_integrals(
    w: ArrayLike,
    slopes: ArrayLike,
    tau: ArrayLike,
    dt: float,
    direction: int,
    gas: GasModel,
) -> tuple[Array, Array]:
    """Time integrals of the in-cell flux along ``direction`` for f = g0 (1 - tau (a.u + A) + A t)."""
    w = np.asarray(w, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    tau = np.asarray(tau, dtype=float)[..., None]
    table = maxwellian_moments(w, gas)
    time = _time_slope(w, slopes, table, gas)
    base, drift, timed = _flux_terms(slopes, time, table, None, direction)
    rho = w[..., 0, None]

    def integral(delta: float) -> Array:
        return rho * (delta * base - tau * delta * (drift + timed) + 0.5 * delta * delta * timed)

    return integral(dt), integral(0.5 * dt)


def flux_linearize(i_full: ArrayLike, i_half: ArrayLike, dt: float) -> FluxPair:
    """Recover F(t_n) and dF/dt(t_n) from the flux integrated over a full and a half step."""
    i_full = np.asarray(i_full, dtype=float)
    i_half = np.asarray(i_half, dtype=float)
    return FluxPair(
        F=(4.0 * i_half - i_full) / dt,
        Ft=4.0 * (i_full - 2.0 * i_half) / (dt * dt),
    )


def cell_flux_pairs(q: ArrayLike, dq: ArrayLike, gas: GasModel) -> FluxPair:
    """In-cell fluxes along x, y and z at a set of points, shape (..., 3, 5).

    The smooth distribution is linear in time, so its linearization is exact:
    F = rho (<u psi> - tau <u psi (a.u + A)>) and Ft = rho <u psi A>.

    Args:
        q: Conserved states (..., 5)
        dq: Conserved derivatives along x, y, z (..., 3, 5)
        gas: Gas model
    """
    w = primitive_from_conserved(q, gas)
    dq = np.asarray(dq, dtype=float)
    table = maxwellian_moments(w, gas)
    slopes = _spatial_slopes(w, dq, gas)
    time = _time_slope(w, slopes, table, gas)
    tau = gas.collision_time(0.5 * w[..., 0] / w[..., 4])[..., None]
    rho = w[..., 0, None]

    flux, flux_t = [], []
    for direction in range(3):
        base, drift, timed = _flux_terms(slopes, time, table, None, direction)
        flux.append(rho * (base - tau * (drift + timed)))
        flux_t.append(rho * timed)
    return FluxPair(F=np.stack(flux, axis=-2), Ft=np.stack(flux_t, axis=-2))


def cell_flux_rates(q: ArrayLike, q_t: ArrayLike, gas: GasModel) -> Array:
    """Time derivatives of the inviscid in-cell fluxes along x, y and z, shape (..., 3, 5).

    The Maxwellian of ``q`` changes as g A with <A psi> = q_t / rho, so the flux rate is
    rho <u psi A> for whatever ``q_t`` the caller supplies.
    """
    w = primitive_from_conserved(q, gas)
    table = maxwellian_moments(w, gas)
    time = micro_slope(w, q_t, gas)
    rho = w[..., 0, None]
    return np.stack(
        [rho * moments_of_slope(time, table, _AXIS_POWERS[d]) for d in range(3)], axis=-2
    )


def _frame_components(axis: int) -> tuple[list[int], list[int]]:
    order = [axis, (axis + 1) % 3, (axis + 2) % 3]
    return order, [0, 1 + order[0], 1 + order[1], 1 + order[2], 4]


def _trace_primitive(q: Array, gas: GasModel, side: str) -> Array:
    try:
        return primitive_from_conserved(q, gas)
    except StateError as err:
        raise err.locate(side=side)


def to_face_frame(q: ArrayLike, dq: ArrayLike, axis: int) -> tuple[Array, Array]:
    """Permute a state and its derivatives so that ``axis`` becomes the local u-axis."""
    order, components = _frame_components(axis)
    q = np.asarray(q, dtype=float)[..., components]
    dq = np.asarray(dq, dtype=float)[..., order, :][..., components]
    return q, dq


def from_face_frame(f: ArrayLike, axis: int) -> Array:
    """Inverse of the component permutation of :func:`to_face_frame`."""
    _, components = _frame_components(axis)
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[..., components] = f
    return out


def interface_flux_pair(
    q_left: ArrayLike,
    dq_left: ArrayLike,
    q_right: ArrayLike,
    dq_right: ArrayLike,
    axis: int,
    gas: GasModel,
    dt: float,
) -> FluxPair:
    """Flux and time derivative across faces normal to ``axis`` in the global frame.

    Args:
        q_left, q_right: Conserved traces on the minus and plus side (..., 5)
        dq_left, dq_right: Their derivatives along x, y, z (..., 3, 5)
        axis: Face normal axis
        gas: Gas model
        dt: Time step used for the flux time integrals

    Raises:
        NonPositiveDensity, NonPositivePressure: Tagged with the failing ``side`` ("minus"
            or "plus") when a trace is unphysical, untagged when the merged state is
    """
    ql, dql = to_face_frame(q_left, dq_left, axis)
    qr, dqr = to_face_frame(q_right, dq_right, axis)
    wl = _trace_primitive(ql, gas, "minus")
    wr = _trace_primitive(qr, gas, "plus")
    p_mean = 0.25 * (wl[..., 0] / wl[..., 4] + wr[..., 0] / wr[..., 4])
    tau = gas.collision_time(p_mean)
    i_full, i_half = interface_flux_integrals(
        KineticTrace(wl, dql), KineticTrace(wr, dqr), tau, dt, gas
    )
    pair = flux_linearize(i_full, i_half, dt)
    return FluxPair(F=from_face_frame(pair.F, axis), Ft=from_face_frame(pair.Ft, axis))


def interface_flux_rate(
    q_left: ArrayLike,
    q_right: ArrayLike,
    q_left_t: ArrayLike,
    q_right_t: ArrayLike,
    axis: int,
    gas: GasModel,
) -> Array:
    """Time derivative of the inviscid interface flux normal to ``axis`` for given trace rates.

    With tau = 0 the interface flux at the start of a step is the Euler flux of the state
    merged from the u > 0 half of the left Maxwellian and the u < 0 half of the right one.
    Each side moves as g A with <A psi> = q_t / rho; the merged rate carries these through
    the half-space moments.

    Args:
        q_left, q_right: Conserved traces on the minus and plus side (..., 5)
        q_left_t, q_right_t: Rates of change of the traces (..., 5)
        axis: Face normal axis
        gas: Gas model
    """
    _, components = _frame_components(axis)
    ql = np.asarray(q_left, dtype=float)[..., components]
    qr = np.asarray(q_right, dtype=float)[..., components]
    wl = _trace_primitive(ql, gas, "minus")
    wr = _trace_primitive(qr, gas, "plus")
    table_l = maxwellian_moments(wl, gas)
    table_r = maxwellian_moments(wr, gas)

    w0 = primitive_from_conserved(_merge_halves(wl, table_l, _UNIT, wr, table_r, _UNIT), gas)
    time_l = micro_slope(wl, np.asarray(q_left_t, dtype=float)[..., components], gas)
    time_r = micro_slope(wr, np.asarray(q_right_t, dtype=float)[..., components], gas)
    time_0 = micro_slope(w0, _merge_halves(wl, table_l, time_l, wr, table_r, time_r), gas)

    rate = w0[..., 0, None] * moments_of_slope(time_0, maxwellian_moments(w0, gas), _AXIS_POWERS[0])
    return from_face_frame(rate, axis)
