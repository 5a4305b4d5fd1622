import math

import numpy as np
import pytest

from dgk.basis import build_basis
from dgk.cases import (
    TgvRecord,
    build_mesh,
    density_wave,
    dissipation_from_series,
    exact_solution,
    initial_field,
    isotropic_vortex,
    make_case,
    perturbed_nodes,
    q_criterion,
    taylor_green_p0,
    tgv_diagnostics,
    with_dissipation,
)
from dgk.discretization import ResidualAssembler, error_norms, project
from dgk.integrator import Solver, StepControl
from dgk.kinetics import GasModel, conserved_from_primitive, primitive_from_conserved
from dgk.mesh import Mesh

from states import primitive


def test_make_case_uses_case_defaults():
    case = make_case("vortex2d", 20)
    assert case.dim == 2
    assert case.t_end == 10.0
    assert make_case("adv3d", 8, t_end=0.5).t_end == 0.5
    with pytest.raises(ValueError):
        make_case("shock", 8)
    with pytest.raises(ValueError):
        make_case("adv2d", 2)


def test_only_taylor_green_is_viscous():
    assert not make_case("adv2d", 8).gas().viscous
    assert make_case("tgv", 8).gas().mu_ref == pytest.approx(1.0 / 1600.0)


def test_uniform_2d_mesh():
    mesh = build_mesh(make_case("adv2d", 8))
    assert mesh.shape == (8, 8, 1)
    np.testing.assert_allclose(mesh.widths[:, :2], 0.25)
    np.testing.assert_allclose(mesh.widths[:, 2], 2.0)


def test_perturbed_nodes():
    nodes = perturbed_nodes(0.0, 2.0, 4, nonuniform=True)
    assert nodes[1] == pytest.approx(0.55)
    assert nodes[0] == 0.0
    assert nodes[-1] == 2.0


@pytest.mark.parametrize("lower, upper", [(0.0, 2.0), (-math.pi, math.pi)])
def test_perturbed_spacing_stays_close_to_uniform(lower, upper):
    n = 32
    h = (upper - lower) / n
    spacing = np.diff(perturbed_nodes(lower, upper, n, nonuniform=True))
    assert spacing.min() > 0.8 * h
    assert spacing.max() < 1.2 * h
    assert spacing.max() > 1.1 * h


def test_density_wave_values_and_period():
    x = np.array([[0.25, 0.25, 0.0], [1.3, 0.4, 0.7]])
    q0 = density_wave(2, x, 0.0)
    assert q0[0, 0] == pytest.approx(1.2)
    np.testing.assert_allclose(density_wave(2, x, 2.0), q0, rtol=1e-13)
    w = primitive_from_conserved(q0, GasModel())
    np.testing.assert_allclose(w[:, 1:3], 1.0)
    np.testing.assert_allclose(w[:, 3], 0.0)
    np.testing.assert_allclose(0.5 * w[:, 0] / w[:, 4], 1.0)


@pytest.mark.parametrize("dim", [2, 3])
def test_density_wave_solves_euler_equations(dim):
    # rho_t + sum_a (rho U_a)_x_a = 0 with unit velocities
    x = np.array([0.37, 1.21, 0.66])
    t, h = 0.3, 1e-5
    rho = lambda x, t: density_wave(dim, x, t)[0]  # noqa: E731
    rate = (rho(x, t + h) - rho(x, t - h)) / (2 * h)
    flux = 0.0
    for axis in range(dim):
        step = np.zeros(3)
        step[axis] = h
        flux += (rho(x + step, t) - rho(x - step, t)) / (2 * h)
    assert rate + flux == pytest.approx(0.0, abs=1e-8)


def test_vortex_centre_and_far_field():
    gamma, eps = 1.4, 5.0
    x = np.array([[5.0, 5.0, 0.5], [0.0, 0.0, 0.5]])
    w = primitive_from_conserved(isotropic_vortex(x, 0.0, eps, gamma), GasModel(gamma))
    temperature = 1.0 - (gamma - 1.0) * eps**2 / (8.0 * gamma * math.pi**2) * math.e
    assert w[0, 0] == pytest.approx(temperature ** (1.0 / (gamma - 1.0)))
    np.testing.assert_allclose(w[0, 1:3], 1.0)
    np.testing.assert_allclose(w[1, :4], [1.0, 1.0, 1.0, 0.0], atol=1e-9)


def test_vortex_returns_after_one_period():
    x = np.random.default_rng(7).uniform(0.0, 10.0, (32, 3))
    np.testing.assert_allclose(isotropic_vortex(x, 10.0), isotropic_vortex(x, 0.0), rtol=1e-12, atol=1e-14)


def test_taylor_green_initial_field():
    case = make_case("tgv", 8)
    assert taylor_green_p0(case) == pytest.approx(71.42857142857143)
    x = np.array([[math.pi / 2, 0.0, 0.0], [0.3, -1.1, 2.0]])
    w = primitive_from_conserved(initial_field(case)(x), case.gas())
    assert w[0, 1] == pytest.approx(1.0)
    np.testing.assert_allclose(w[:, 3], 0.0)
    temperature = 0.5 / w[:, 4]
    np.testing.assert_allclose(temperature, temperature[0])


def test_taylor_green_has_no_exact_solution():
    with pytest.raises(ValueError):
        exact_solution(make_case("tgv", 8))


def test_initial_taylor_green_diagnostics():
    case = make_case("tgv", 12)
    mesh = build_mesh(case)
    basis = build_basis(3)
    gas = case.gas()
    state = project(initial_field(case), mesh, basis)
    record = tgv_diagnostics(state, mesh, basis, gas)
    assert record.t == 0.0
    assert record.ek == pytest.approx(0.125, rel=1e-3)
    assert record.eps_zeta == pytest.approx(0.75 / 1600.0, rel=2e-2)


def test_uniform_flow_has_no_enstrophy(viscous_gas):
    mesh = build_mesh(make_case("adv3d", 4, nonuniform=True))
    basis = build_basis(2)
    q = conserved_from_primitive(primitive(1.0, 0.5, 0.2, -0.1, 1.0), viscous_gas)
    state = project(lambda x: np.broadcast_to(q, x.shape[:-1] + (5,)), mesh, basis)
    record = tgv_diagnostics(state, mesh, basis, viscous_gas)
    assert record.eps_zeta == pytest.approx(0.0, abs=1e-20)
    assert record.ek == pytest.approx(0.5 * (0.25 + 0.04 + 0.01), rel=1e-12)


def test_dissipation_of_constant_and_quadratic_series():
    t = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(dissipation_from_series(t, np.full(11, 0.125)), 0.0, atol=1e-14)
    np.testing.assert_allclose(dissipation_from_series(t, 0.125 - t * t), 2.0 * t, atol=1e-12)


def test_dissipation_of_exponential_decay():
    t = np.linspace(0.0, 1.0, 101)
    np.testing.assert_allclose(dissipation_from_series(t, np.exp(-t)), np.exp(-t), rtol=1e-3)


def test_dissipation_rejects_bad_series():
    with pytest.raises(ValueError):
        dissipation_from_series([0.0, 0.1], [1.0, 0.9])
    with pytest.raises(ValueError):
        dissipation_from_series([0.0, 0.1, 0.3], [1.0, 0.9, 0.8])


def test_with_dissipation_fills_records():
    records = [TgvRecord(t=0.1 * i, ek=1.0 - 0.1 * i, eps_zeta=0.0) for i in range(4)]
    filled = with_dissipation(records)
    np.testing.assert_allclose([r.eps_ek for r in filled], 1.0)
    assert math.isnan(with_dissipation(records[:2])[0].eps_ek)


def test_q_criterion_of_solid_body_rotation(gas):
    nodes = np.linspace(0.0, 1.0, 3)
    mesh = Mesh.from_nodes(nodes, nodes, nodes)
    basis = build_basis(2)

    def rotation(x):
        w = np.zeros(x.shape[:-1] + (5,))
        w[..., 0] = 1.0
        w[..., 1] = -x[..., 1]
        w[..., 2] = x[..., 0]
        w[..., 4] = 0.05
        return conserved_from_primitive(w, gas)

    state = project(rotation, mesh, basis)
    np.testing.assert_allclose(q_criterion(state, mesh, basis), 1.0, rtol=1e-12)


def run_wave(n, k, t_end):
    case = make_case("adv2d", n, t_end=t_end)
    mesh = build_mesh(case)
    basis = build_basis(k, 2)
    gas = case.gas()
    state = project(initial_field(case), mesh, basis)
    solver = Solver(ResidualAssembler(mesh, basis, gas), StepControl(cfl=0.15, t_end=t_end))
    final = solver.run(state)
    return error_norms(final, mesh, basis, exact_solution(case), final.time)


@pytest.mark.slow
def test_density_wave_converges_at_third_order():
    coarse, fine = run_wave(8, 2, 0.5), run_wave(16, 2, 0.5)
    assert math.log2(coarse.l2 / fine.l2) > 2.5
    assert math.log2(coarse.l1 / fine.l1) > 2.5
