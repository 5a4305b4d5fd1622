"""Execute verification cases and convergence studies."""

import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, TypedDict

from rich.console import Console

from dgk.basis import BasisSet, build_basis
from dgk.cases import (
    CaseConfig,
    TgvRecord,
    build_mesh,
    exact_solution,
    initial_field,
    make_case,
    tgv_diagnostics,
    with_dissipation,
)
from dgk.discretization import DGState, ErrorNorms, ResidualAssembler, error_norms, project
from dgk.errors import ConfigError
from dgk.integrator import Solver, StepControl, record_times
from dgk.kinetics import GasModel
from dgk.mesh import Mesh
from dgk.runtime import ScalingRow, make_partition, make_worker_pool, scaling_report

from .config import RunConfig, check_doubling

console = Console(stderr=True)
logger = logging.getLogger(__name__)


class ErrorRow(TypedDict):
    """One row of an accuracy table; orders are None on the first row."""
    mesh: str
    eL1: float
    order_L1: float | None
    eL2: float
    order_L2: float | None
    ec: float
    order_c: float | None


@dataclass
class MeshRun:
    """Outcome of one case run on one mesh."""

    n: int
    case: CaseConfig
    mesh: Mesh
    basis: BasisSet
    gas: GasModel
    state: DGState
    steps: int
    seconds: float
    seconds_per_10_steps: float
    norms: ErrorNorms | None = None
    records: list[TgvRecord] = field(default_factory=list)

    @property
    def dofs(self) -> int:
        return self.mesh.ncells * self.basis.N


def convergence_orders(errors: Sequence[float]) -> list[float | None]:
    """log2(e_coarse / e_fine) between consecutive mesh doublings, None on the first."""
    orders: list[float | None] = [None]
    for coarse, fine in zip(errors, errors[1:]):
        if coarse > 0.0 and fine > 0.0:
            orders.append(math.log2(coarse / fine))
        else:
            orders.append(float("nan"))
    return orders


def error_table(runs: Sequence[MeshRun]) -> list[ErrorRow]:
    """Accuracy table rows with order columns."""
    l1 = [r.norms.l1 for r in runs]
    l2 = [r.norms.l2 for r in runs]
    ec = [r.norms.cell_average for r in runs]
    rows: list[ErrorRow] = []
    for run, e1, o1, e2, o2, e3, o3 in zip(
        runs, l1, convergence_orders(l1), l2, convergence_orders(l2), ec, convergence_orders(ec)
    ):
        label = "x".join([str(run.n)] * run.case.dim)
        rows.append(ErrorRow(mesh=label, eL1=e1, order_L1=o1, eL2=e2, order_L2=o2, ec=e3, order_c=o3))
    return rows


class CaseRunner:
    """Run a configured case on one or more meshes."""

    def __init__(self, config: RunConfig):
        """Initialize runner with a validated configuration.

        Args:
            config: Run configuration from :func:`dgv.config.build_run_config`
        """
        self.config = config

    def case_config(self, n: int) -> CaseConfig:
        cfg = self.config
        return make_case(cfg["case"], n, nonuniform=cfg["nonuniform"], t_end=cfg["tend"])

    def run_mesh(self, n: int, workers: int | None = None) -> MeshRun:
        """Project the initial field, march to the end time and evaluate diagnostics."""
        cfg = self.config
        workers = workers or cfg["workers"]
        case = self.case_config(n)
        mesh = build_mesh(case)
        basis = build_basis(cfg["order"], case.dim)
        gas = case.gas()
        state = project(initial_field(case), mesh, basis)
        partition = make_partition(mesh.ncells, workers)

        with make_worker_pool(workers) as pool:
            assembler = ResidualAssembler(
                mesh,
                basis,
                gas,
                partition=partition,
                pool=pool,
                flux_points=cfg["flux_points"],
                time_derivative=cfg["time_derivative"],
            )
            solver = Solver(assembler, StepControl(cfg["cfl"], case.t_end, cfg["dt"]))
            records: list[TgvRecord] = []
            stops: Sequence[float] = ()
            on_stop = None
            if case.name == "tgv":
                stops = record_times(case.t_end, cfg["record_every"])

                def on_stop(s: DGState) -> None:
                    records.append(tgv_diagnostics(s, mesh, basis, gas, partition=partition, pool=pool))
                    logger.info(f"t={s.time:.4f}: Ek={records[-1].ek:.8g} epsZeta={records[-1].eps_zeta:.6g}")

            started = time.perf_counter()
            spinner = f"[cyan]Running {case.name} P{basis.k} n={n}..."
            if console.is_terminal:
                with console.status(spinner):
                    final = solver.run(state, stops, on_stop)
            else:
                final = solver.run(state, stops, on_stop)
            seconds = time.perf_counter() - started

            norms = None
            if case.spec.has_exact:
                norms = error_norms(
                    final, mesh, basis, exact_solution(case), final.time, partition=partition, pool=pool
                )
                logger.info(f"n={n}: eL1={norms.l1:.6e} eL2={norms.l2:.6e} ec={norms.cell_average:.6e}")

        return MeshRun(
            n=n,
            case=case,
            mesh=mesh,
            basis=basis,
            gas=gas,
            state=final,
            steps=solver.steps,
            seconds=seconds,
            seconds_per_10_steps=solver.seconds_per_10_steps,
            norms=norms,
            records=with_dissipation(records),
        )

    def run(self) -> list[MeshRun]:
        """Run every configured mesh in order."""
        return [self.run_mesh(n) for n in self.config["mesh"]]

    def convergence_study(self) -> tuple[list[MeshRun], list[ErrorRow]]:
        """Run all meshes of an accuracy case and tabulate errors with orders.

        Raises:
            ConfigError: With fewer than two meshes, non-doubling sizes or a case without
                an exact solution
        """
        sizes = self.config["mesh"]
        if len(sizes) < 2:
            raise ConfigError("mesh", "a convergence study needs at least two mesh sizes")
        check_doubling(sizes)
        if not self.case_config(sizes[0]).spec.has_exact:
            raise ConfigError("case", f"{self.config['case']} has no exact solution")
        runs = self.run()
        return runs, error_table(runs)

    def scale(self, worker_counts: Sequence[int]) -> list[ScalingRow]:
        """Wall time and speedup for each mesh size and worker count."""
        return scaling_report(lambda n, w: self.run_mesh(n, w), self.config["mesh"], worker_counts)


def run_summary(config: RunConfig, runs: Sequence[MeshRun]) -> dict[str, Any]:
    """Key facts of a run for the terminal summary."""
    last = runs[-1]
    return {
        "case": config["case"],
        "order": f"p{config['order']}",
        "meshes": ",".join(str(r.n) for r in runs),
        "N": last.basis.N,
        "dofs": last.dofs,
        "steps": last.steps,
        "t": last.state.time,
        "seconds": round(last.seconds, 3),
        "seconds_per_10_steps": round(last.seconds_per_10_steps, 4)
        if math.isfinite(last.seconds_per_10_steps)
        else None,
        "workers": config["workers"],
    }
