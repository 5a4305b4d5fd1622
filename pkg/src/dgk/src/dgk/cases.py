"""Verification cases: initial fields, exact solutions, meshes and Taylor-Green diagnostics."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .basis import BasisSet, gauss_rule
from .discretization import DGState, PointSet, evaluate_with_gradients, weighted_sum
from .kinetics import GasModel, conserved_from_primitive
from .mesh import Mesh
from .runtime import Partition, deterministic_reduce, make_partition, parallel_map_cells

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]

NONUNIFORM_AMPLITUDE = 0.05


@dataclass(frozen=True)
class CaseConfig:
    """Parameters of one verification case.

    Attributes:
        name: Case id (adv2d, adv3d, vortex2d, tgv)
        dim: 2 or 3
        n: Cells per active axis
        nonuniform: Apply the sinusoidal node perturbation
        gamma: Specific-heat ratio
        mach0: Reference Mach number (Taylor-Green)
        reynolds: Reynolds number (Taylor-Green)
        eps: Vortex strength (isotropic vortex)
        t_end: Final time
    """

    name: str
    dim: int
    n: int
    nonuniform: bool = False
    gamma: float = 1.4
    mach0: float = 0.1
    reynolds: float = 1600.0
    eps: float = 5.0
    t_end: float = 2.0

    def __post_init__(self):
        if self.name not in CASES:
            raise ValueError(f"unknown case {self.name!r}")
        if self.n < 4:
            raise ValueError(f"need at least 4 cells per axis, got {self.n}")
        for key in ("gamma", "mach0", "reynolds", "eps"):
            if not getattr(self, key) > 0.0:
                raise ValueError(f"{key} must be positive")
        if not self.t_end >= 0.0:
            raise ValueError("t_end must be non-negative")

    @property
    def spec(self) -> CaseSpec:
        return CASES[self.name]

    def gas(self) -> GasModel:
        """Gas model of the case; only the Taylor-Green vortex is viscous."""
        if self.name == "tgv":
            return GasModel(gamma=self.gamma, mu_ref=1.0 / self.reynolds)
        return GasModel(gamma=self.gamma)


class CaseSpec(NamedTuple):
    dim: int
    lower: float
    upper: float
    t_end: float
    has_exact: bool


CASES: dict[str, CaseSpec] = {
    "adv2d": CaseSpec(dim=2, lower=0.0, upper=2.0, t_end=2.0, has_exact=True),
    "adv3d": CaseSpec(dim=3, lower=0.0, upper=2.0, t_end=2.0, has_exact=True),
    "vortex2d": CaseSpec(dim=2, lower=0.0, upper=10.0, t_end=10.0, has_exact=True),
    "tgv": CaseSpec(dim=3, lower=-math.pi, upper=math.pi, t_end=10.0, has_exact=False),
}


def make_case(name: str, n: int, nonuniform: bool = False, t_end: float | None = None, **params) -> CaseConfig:
    """Case config with the case's dimension and default end time."""
    if name not in CASES:
        raise ValueError(f"unknown case {name!r}; choose from {', '.join(CASES)}")
    spec = CASES[name]
    cfg = CaseConfig(name=name, dim=spec.dim, n=n, nonuniform=nonuniform, t_end=spec.t_end, **params)
    return cfg if t_end is None else replace(cfg, t_end=t_end)


def perturbed_nodes(lower: float, upper: float, n: int, nonuniform: bool) -> Array:
    """Equally spaced nodes, optionally shifted by x += 0.05 (L/2) sin(2 pi s).

    s is the normalized coordinate in [0, 1]; on [0, 2] this is x = xi + 0.05 sin(pi xi).
    """
    s = np.linspace(0.0, 1.0, n + 1)
    length = upper - lower
    x = lower + length * s
    if nonuniform:
        x = x + NONUNIFORM_AMPLITUDE * 0.5 * length * np.sin(2.0 * np.pi * s)
        x[0], x[-1] = lower, upper
    return x


def build_mesh(cfg: CaseConfig) -> Mesh:
    """Uniform or perturbed mesh over the case domain.

    2D cases get a single z layer as deep as the domain is wide, so error integrals are
    taken over the same box a 3D run of the case would cover.
    """
    spec = cfg.spec
    nodes = perturbed_nodes(spec.lower, spec.upper, cfg.n, cfg.nonuniform)
    znodes = nodes if cfg.dim == 3 else np.array([spec.lower, spec.upper])
    return Mesh.from_nodes(nodes, nodes.copy(), znodes, dim=cfg.dim)


def density_wave(dim: int, x: ArrayLike, t: float, gas: GasModel | None = None) -> Array:
    """Advected density wave with unit velocity along every active axis and p = 1.

    The wave phase is pi (sum of active coordinates - dim t); on a period-2 domain the
    field returns to its initial state at t = 2.
    """
    gas = gas or GasModel()
    x = np.asarray(x, dtype=float)
    phase = np.pi * (x[..., :dim].sum(axis=-1) - dim * t)
    w = np.zeros(x.shape[:-1] + (5,))
    w[..., 0] = 1.0 + 0.2 * np.sin(phase)
    w[..., 1 : 1 + dim] = 1.0
    w[..., 4] = 1.0
    return _from_pressure_primitive(w, gas)


def isotropic_vortex(x: ArrayLike, t: float, eps: float = 5.0, gamma: float = 1.4) -> Array:
    """Isentropic vortex on the mean flow (1, 1, 1, 1), centred at (5, 5) and advected by (t, t).

    The nearest periodic image on [0, 10]^2 is used; T = 1 + dT, rho = T^(1/(gamma-1)), p = rho T.
    """
    x = np.asarray(x, dtype=float)
    dx = _wrap(x[..., 0] - 5.0 - t, 10.0)
    dy = _wrap(x[..., 1] - 5.0 - t, 10.0)
    r2 = dx * dx + dy * dy
    bump = eps / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2))
    temperature = 1.0 - (gamma - 1.0) * eps**2 / (8.0 * gamma * np.pi**2) * np.exp(1.0 - r2)
    rho = temperature ** (1.0 / (gamma - 1.0))
    w = np.zeros(x.shape[:-1] + (5,))
    w[..., 0] = rho
    w[..., 1] = 1.0 - bump * dy
    w[..., 2] = 1.0 + bump * dx
    w[..., 4] = rho * temperature
    return _from_pressure_primitive(w, GasModel(gamma=gamma))


def taylor_green_init(x: ArrayLike, cfg: CaseConfig) -> Array:
    """Taylor-Green initial field with L = V0 = rho0 = 1 and uniform temperature."""
    x = np.asarray(x, dtype=float)
    sx, sy = np.sin(x[..., 0]), np.sin(x[..., 1])
    cx, cy, cz = np.cos(x[..., 0]), np.cos(x[..., 1]), np.cos(x[..., 2])
    p0 = taylor_green_p0(cfg)
    p = p0 + (np.cos(2.0 * x[..., 0]) + np.cos(2.0 * x[..., 1])) * (np.cos(2.0 * x[..., 2]) + 2.0) / 16.0
    w = np.zeros(x.shape[:-1] + (5,))
    w[..., 0] = p / p0
    w[..., 1] = sx * cy * cz
    w[..., 2] = -cx * sy * cz
    w[..., 4] = p
    return _from_pressure_primitive(w, cfg.gas())


def taylor_green_p0(cfg: CaseConfig) -> float:
    """Background pressure rho0 V0^2 / (gamma M0^2)."""
    return 1.0 / (cfg.gamma * cfg.mach0**2)


def initial_field(cfg: CaseConfig) -> Callable[[Array], Array]:
    """Conserved initial field of the case as a function of position."""
    if cfg.name == "tgv":
        return lambda x: taylor_green_init(x, cfg)
    exact = exact_solution(cfg)
    return lambda x: exact(x, 0.0)


def exact_solution(cfg: CaseConfig) -> Callable[[Array, float], Array]:
    """Exact conserved solution ``(x, t) -> q`` of an accuracy case."""
    gas = cfg.gas()
    if cfg.name in ("adv2d", "adv3d"):
        return lambda x, t: density_wave(cfg.dim, x, t, gas)
    if cfg.name == "vortex2d":
        return lambda x, t: isotropic_vortex(x, t, cfg.eps, cfg.gamma)
    raise ValueError(f"case {cfg.name!r} has no exact solution")


def _wrap(d: Array, period: float) -> Array:
    return d - period * np.floor(d / period + 0.5)


def _from_pressure_primitive(w: Array, gas: GasModel) -> Array:
    # w carries (rho, U, V, W, p); convert the last entry to lambda = rho / (2 p)
    out = w.copy()
    out[..., 4] = 0.5 * w[..., 0] / w[..., 4]
    return conserved_from_primitive(out, gas)


@dataclass(frozen=True)
class TgvRecord:
    """Taylor-Green diagnostics at one time; ``eps_ek`` is filled from the series."""

    t: float
    ek: float
    eps_zeta: float
    eps_ek: float = float("nan")


def _velocity_gradients(coeffs: Array, points: PointSet, widths: Array) -> tuple[Array, Array, Array]:
    """Density (n, Q), velocity (n, Q, 3) and velocity gradients (n, Q, 3, 3) [d/dx_a, U_b]."""
    q, dq = evaluate_with_gradients(coeffs, points, widths)
    rho = q[..., 0]
    velocity = q[..., 1:4] / rho[..., None]
    grad = (dq[..., 1:4] - dq[..., 0:1] * velocity[..., None, :]) / rho[..., None, None]
    return rho, velocity, grad


def tgv_diagnostics(
    state: DGState,
    mesh: Mesh,
    basis: BasisSet,
    gas: GasModel,
    rho0: float = 1.0,
    partition: Partition | None = None,
    pool: object | None = None,
) -> TgvRecord:
    """Volume-averaged kinetic energy and enstrophy-based dissipation by (k+2)-point quadrature."""
    rule = gauss_rule(basis.k + 2, 3)
    points = PointSet.build(basis, rule, rule.points)
    coeffs = state.flat
    partition = partition or make_partition(mesh.ncells, 1)

    def kernel(start: int, stop: int) -> Array:
        cells = slice(start, stop)
        rho, velocity, grad = _velocity_gradients(coeffs[cells], points, mesh.widths[cells])
        vorticity = np.stack(
            [
                grad[..., 1, 2] - grad[..., 2, 1],
                grad[..., 2, 0] - grad[..., 0, 2],
                grad[..., 0, 1] - grad[..., 1, 0],
            ],
            axis=-1,
        )
        energy = 0.5 * rho * np.sum(velocity * velocity, axis=-1)
        enstrophy = 0.5 * rho * np.sum(vorticity * vorticity, axis=-1)
        out = np.empty((stop - start, 2))
        out[:, 0] = mesh.volumes[cells] * weighted_sum(energy, rule.weights)
        out[:, 1] = mesh.volumes[cells] * weighted_sum(enstrophy, rule.weights)
        return out

    per_cell = parallel_map_cells(partition, kernel, np.empty((mesh.ncells, 2)), pool)
    scale = 1.0 / (rho0 * mesh.domain_volume)
    return TgvRecord(
        t=state.time,
        ek=scale * deterministic_reduce(per_cell[:, 0]),
        eps_zeta=2.0 * gas.mu_ref * scale * deterministic_reduce(per_cell[:, 1]),
    )


def dissipation_from_series(times: Sequence[float], ek: Sequence[float]) -> Array:
    """-dEk/dt by second-order central differences, one-sided second order at the ends.

    Raises:
        ValueError: With fewer than three samples or non-uniform spacing
    """
    times = np.asarray(times, dtype=float)
    ek = np.asarray(ek, dtype=float)
    if len(ek) < 3:
        raise ValueError(f"need at least 3 samples, got {len(ek)}")
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ValueError("samples must be uniformly spaced in time")
    return -np.gradient(ek, steps[0], edge_order=2)


def with_dissipation(records: Sequence[TgvRecord]) -> list[TgvRecord]:
    """Records with ``eps_ek`` filled in from the kinetic-energy series."""
    if len(records) < 3:
        return list(records)
    eps = dissipation_from_series([r.t for r in records], [r.ek for r in records])
    return [replace(r, eps_ek=float(e)) for r, e in zip(records, eps)]


def q_criterion(state: DGState, mesh: Mesh, basis: BasisSet) -> Array:
    """Cell-averaged second invariant of the velocity gradient, 0.5 (|Omega|^2 - |S|^2)."""
    rule = gauss_rule(basis.k + 1, 3)
    points = PointSet.build(basis, rule, rule.points)
    _, _, grad = _velocity_gradients(state.flat, points, mesh.widths)
    # Q = -0.5 tr(G G) for G the velocity gradient
    q = -0.5 * np.einsum("...ab,...ba->...", grad, grad)
    return weighted_sum(q, rule.weights)
