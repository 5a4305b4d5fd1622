import math

import pytest

from dgk.errors import ConfigError
from dgv.config import build_run_config
from dgv.runner import CaseRunner, convergence_orders, error_table, run_summary


def test_convergence_orders_of_third_order_errors():
    errors = [h**3 for h in (0.25, 0.125, 0.0625)]
    orders = convergence_orders(errors)
    assert orders[0] is None
    assert orders[1:] == [pytest.approx(3.0), pytest.approx(3.0)]


def test_convergence_orders_with_zero_error():
    assert math.isnan(convergence_orders([1e-3, 0.0])[1])


def test_short_run_produces_error_table(tmp_path):
    config = build_run_config(case="adv2d", mesh="4,8", tend=0.01, out=tmp_path)
    runs = CaseRunner(config).run()
    assert [r.n for r in runs] == [4, 8]
    assert all(r.state.time == 0.01 for r in runs)
    rows = error_table(runs)
    assert [r["mesh"] for r in rows] == ["4x4", "8x8"]
    assert rows[0]["order_L1"] is None
    assert rows[1]["eL2"] < rows[0]["eL2"]
    summary = run_summary(config, runs)
    assert summary["dofs"] == 64 * 6
    assert summary["order"] == "p2"


def test_taylor_green_run_records_diagnostics(tmp_path):
    config = build_run_config(case="tgv", mesh="4", tend=0.02, record_every=0.01, out=tmp_path)
    run = CaseRunner(config).run_mesh(4)
    assert [r.t for r in run.records] == pytest.approx([0.0, 0.01, 0.02])
    assert run.norms is None
    assert all(math.isfinite(r.eps_ek) for r in run.records)
    assert all(r.ek > 0.0 for r in run.records)


def test_convergence_study_needs_two_meshes(tmp_path):
    config = build_run_config(case="adv2d", mesh="8", tend=0.01, out=tmp_path)
    with pytest.raises(ConfigError) as excinfo:
        CaseRunner(config).convergence_study()
    assert excinfo.value.key == "mesh"


def test_convergence_study_needs_exact_solution(tmp_path):
    config = build_run_config(case="tgv", mesh="4", tend=0.01, out=tmp_path)
    runner = CaseRunner(config)
    runner.config = {**config, "mesh": [4, 8]}
    with pytest.raises(ConfigError) as excinfo:
        runner.convergence_study()
    assert excinfo.value.key == "case"


def test_scaling_rows(tmp_path):
    config = build_run_config(case="adv2d", mesh="4", tend=0.005, out=tmp_path)
    rows = CaseRunner(config).scale([1, 2])
    assert [(r["size"], r["workers"]) for r in rows] == [(4, 1), (4, 2)]
    assert rows[0]["speedup"] == 1.0
