"""Two-stage fourth-order time marching with CFL step control."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .basis import BasisSet
from .discretization import DGState, ResidualAssembler
from .errors import NonPositiveDt, StateError
from .kinetics import GasModel, primitive_from_conserved
from .mesh import Mesh

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]
Operator = Callable[[Array, float], tuple[Array, Array]]

DEFAULT_CFL = {2: 0.15, 3: 0.09}
PROGRESS_EVERY = 10


def default_cfl(k: int) -> float:
    """Courant number used for P_k runs unless overridden."""
    return DEFAULT_CFL.get(k, 0.09)


@dataclass(frozen=True)
class StepControl:
    """Time-step policy.

    Attributes:
        cfl: Courant number in (0, 1]
        t_end: Final time; the last step is clipped to land on it
        dt_fixed: Constant step overriding the CFL estimate
    """

    cfl: float
    t_end: float
    dt_fixed: float | None = None

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_end >= 0.0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.dt_fixed is not None and not self.dt_fixed > 0.0:
            raise ValueError(f"dt_fixed must be positive, got {self.dt_fixed}")


def compute_dt(state: DGState, mesh: Mesh, gas: GasModel, ctrl: StepControl, k: int = 2) -> float:
    """CFL time step from cell averages: cfl * min h / (|U| + |V| + |W| + c).

    Viscous runs are additionally bounded by cfl * h^2 rho / (2 mu (2k + 1)).

    Raises:
        NonPositiveDt: If the step is not strictly positive and finite
    """
    if ctrl.dt_fixed is not None:
        return ctrl.dt_fixed

    w = primitive_from_conserved(state.cell_averages(), gas)
    rho = w[:, 0]
    p = 0.5 * rho / w[:, 4]
    c = np.sqrt(gas.gamma * p / rho)
    speed = np.abs(w[:, 1]) + np.abs(w[:, 2]) + np.abs(w[:, 3]) + c
    h = mesh.widths[:, list(mesh.active_axes)].min(axis=1)
    dt = ctrl.cfl * float(np.min(h / speed))
    if gas.viscous:
        dt = min(dt, ctrl.cfl * float(np.min(h * h * rho / (2.0 * gas.mu_ref * (2 * k + 1)))))

    if not (math.isfinite(dt) and dt > 0.0):
        raise NonPositiveDt(f"time step {dt!r} at t={state.time:.6g}")
    return dt


def two_stage_step(q: Array, dt: float, operator: Operator) -> Array:
    """Advance coefficients by one two-stage fourth-order step.

    ``operator(q, dt)`` returns (L, L_t). State errors are tagged with the stage that
    raised them.
    """
    try:
        l0, lt0 = operator(q, dt)
    except StateError as err:
        raise err.locate(stage="predictor")
    q_half = q + 0.5 * dt * l0 + 0.125 * dt * dt * lt0
    try:
        _, lt_half = operator(q_half, dt)
    except StateError as err:
        raise err.locate(stage="corrector")
    return q + dt * l0 + (dt * dt / 6.0) * (lt0 + 2.0 * lt_half)


@dataclass
class Solver:
    """Marches a DG state to a list of stop times.

    Attributes:
        assembler: Residual assembler bound to mesh, basis, gas and worker pool
        ctrl: Step control
        steps: Steps taken so far
        seconds_per_10_steps: Mean wall time of 10 steps over the last run
    """

    assembler: ResidualAssembler
    ctrl: StepControl
    steps: int = field(default=0, init=False)
    seconds_per_10_steps: float = field(default=float("nan"), init=False)
    _initial_totals: Array | None = field(default=None, init=False, repr=False)

    @property
    def mesh(self) -> Mesh:
        return self.assembler.mesh

    @property
    def basis(self) -> BasisSet:
        return self.assembler.basis

    @property
    def gas(self) -> GasModel:
        return self.assembler.gas

    def step(self, state: DGState, dt: float) -> DGState:
        try:
            coeffs = two_stage_step(state.flat, dt, self.assembler.operator)
        except StateError as err:
            raise err.locate(time=state.time)
        self.steps += 1
        return DGState(coeffs.reshape(state.coeffs.shape), state.time + dt)

    def conservation_drift(self, state: DGState) -> Array:
        """Relative change of the conserved totals since the first call."""
        totals = self.assembler.totals(state.flat)
        if self._initial_totals is None:
            self._initial_totals = totals
        scale = np.maximum(np.abs(self._initial_totals), 1.0)
        return (totals - self._initial_totals) / scale

    def run(
        self,
        state: DGState,
        stops: Iterable[float] = (),
        on_stop: Callable[[DGState], None] | None = None,
    ) -> DGState:
        """Advance to ``ctrl.t_end``, landing exactly on each stop time on the way.

        Args:
            state: Initial state (not modified)
            stops: Intermediate times at which ``on_stop`` is called
            on_stop: Callback receiving the state at each stop, including t_end
        """
        targets = _stop_times(state.time, stops, self.ctrl.t_end)
        self.conservation_drift(state)
        if on_stop is not None and state.time in targets:
            on_stop(state)

        started = time.perf_counter()
        window = started
        steps_at_start = self.steps
        for target in [t for t in targets if t > state.time]:
            while state.time < target:
                dt = compute_dt(state, self.mesh, self.gas, self.ctrl, self.basis.k)
                remaining = target - state.time
                last = dt >= remaining or math.isclose(dt, remaining, rel_tol=1e-9)
                if last:
                    dt = remaining
                logger.debug(f"step {self.steps + 1}: t={state.time:.6g} dt={dt:.6g}")
                state = self.step(state, dt)
                if last:
                    state.time = target
                if self.steps % PROGRESS_EVERY == 0:
                    now = time.perf_counter()
                    logger.info(
                        f"step {self.steps}: t={state.time:.6g}, "
                        f"{now - window:.3f}s per {PROGRESS_EVERY} steps"
                    )
                    window = now
            drift = self.conservation_drift(state)
            logger.debug(f"t={state.time:.6g}: conservation drift {np.abs(drift).max():.3e}")
            if on_stop is not None:
                on_stop(state)

        taken = self.steps - steps_at_start
        if taken:
            self.seconds_per_10_steps = PROGRESS_EVERY * (time.perf_counter() - started) / taken
        return state


def _stop_times(start: float, stops: Iterable[float], t_end: float) -> list[float]:
    times = sorted({float(t) for t in stops if start <= t <= t_end} | {t_end})
    return times


def record_times(t_end: float, every: float) -> Sequence[float]:
    """Uniformly spaced record times 0, every, 2 every, ..., t_end."""
    if every <= 0.0:
        raise ValueError(f"record interval must be positive, got {every}")
    count = max(int(round(t_end / every)), 1)
    return [t_end * i / count for i in range(count + 1)]

