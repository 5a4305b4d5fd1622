import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from dgk.cases import make_case, taylor_green_init
from dgk.errors import NonPositiveDensity, NonPositivePressure
from dgk.kinetics import (
    GasModel,
    KineticTrace,
    cell_flux_pairs,
    cell_flux_rates,
    conserved_from_primitive,
    euler_flux,
    flux_linearize,
    interface_flux_integrals,
    interface_flux_pair,
    interface_flux_rate,
    maxwellian_moments,
    micro_slope,
    moments_of_slope,
    primitive_from_conserved,
    smooth_flux_integrals,
    time_coefficient,
)

from states import primitive, primitive_states, random_primitive

AIR = GasModel(gamma=1.4)
MIRROR = np.array([1.0, -1.0, 1.0, 1.0, 1.0])


def _slopes(w, dq, gas):
    return np.stack([micro_slope(w, dq[..., s, :], gas) for s in range(3)], axis=-2)


@given(primitive_states)
def test_primitive_round_trip(w):
    q = conserved_from_primitive(w, AIR)
    np.testing.assert_allclose(primitive_from_conserved(q, AIR), w, rtol=1e-12)


def test_primitive_rejects_non_positive_density(gas):
    q = conserved_from_primitive(np.array([primitive(1.0, 0, 0, 0, 1.0)] * 3), gas)
    q[2, 0] = -1e-3
    with pytest.raises(NonPositiveDensity) as excinfo:
        primitive_from_conserved(q, gas)
    assert excinfo.value.index == 2
    assert "density" in str(excinfo.value)


def test_primitive_rejects_non_positive_pressure(gas):
    q = conserved_from_primitive(primitive(1.0, 2.0, 0, 0, 1.0), gas)
    q[4] = 0.5 * q[1] ** 2 / q[0]
    with pytest.raises(NonPositivePressure):
        primitive_from_conserved(q, gas)


def test_gas_model_validation():
    assert GasModel().K == pytest.approx(2.0)
    with pytest.raises(ValueError):
        GasModel(gamma=1.0)
    with pytest.raises(ValueError):
        GasModel(mu_ref=-1.0)
    with pytest.raises(ValueError):
        GasModel(prandtl=0.72)


def test_collision_time_is_zero_for_inviscid_gas(gas, viscous_gas):
    p = np.array([0.5, 2.0])
    np.testing.assert_array_equal(gas.collision_time(p), 0.0)
    np.testing.assert_allclose(viscous_gas.collision_time(p), [2e-3, 5e-4])


@settings(max_examples=200)
@given(primitive_states)
def test_half_moments_sum_to_full_moments(w):
    table = maxwellian_moments(w, AIR)
    scale = np.abs(table.full) + 1.0
    np.testing.assert_allclose(table.pos + table.neg, table.full, rtol=0.0, atol=1e-11 * scale.max())


@pytest.mark.parametrize("U, lam", [(0.3, 0.7), (-1.2, 2.5), (0.0, 0.4)])
def test_moments_match_numerical_integration(U, lam, gas):
    table = maxwellian_moments(np.array([1.0, U, 0.0, 0.0, lam]), gas)

    def density(u):
        return np.sqrt(lam / np.pi) * np.exp(-lam * (u - U) ** 2)

    for n in range(7):
        full = quad(lambda u: u**n * density(u), -np.inf, np.inf, epsabs=1e-13)[0]
        pos = quad(lambda u: u**n * density(u), 0.0, np.inf, epsabs=1e-13)[0]
        neg = quad(lambda u: u**n * density(u), -np.inf, 0.0, epsabs=1e-13)[0]
        assert table.full[n] == pytest.approx(full, rel=1e-9, abs=1e-12)
        assert table.pos[n] == pytest.approx(pos, rel=1e-9, abs=1e-12)
        assert table.neg[n] == pytest.approx(neg, rel=1e-9, abs=1e-12)


def test_internal_variable_moments(gas):
    table = maxwellian_moments(primitive(1.0, 0, 0, 0, 2.0), gas)
    lam = 0.25
    assert table.xi2 == pytest.approx(gas.K / (2 * lam))
    assert table.xi4 == pytest.approx(gas.K * (gas.K + 2) / (4 * lam * lam))


def test_unit_slope_moments_give_conserved_variables(gas, rng):
    w = random_primitive(rng, 50)
    table = maxwellian_moments(w, gas)
    unit = np.broadcast_to([1.0, 0, 0, 0, 0], w.shape)
    moments = w[:, 0:1] * moments_of_slope(unit, table)
    np.testing.assert_allclose(moments, conserved_from_primitive(w, gas), rtol=1e-13)


def test_micro_slope_reproduces_derivatives(gas, rng):
    w = random_primitive(rng, 200)
    dq = rng.normal(size=(200, 5))
    a = micro_slope(w, dq, gas)
    recovered = w[:, 0:1] * moments_of_slope(a, maxwellian_moments(w, gas))
    np.testing.assert_allclose(recovered, dq, rtol=1e-12, atol=1e-12)


def test_micro_slope_matches_dense_solve(gas):
    w = primitive(1.3, 0.4, -0.2, 0.7, 0.9)
    table = maxwellian_moments(w, gas)
    columns = [moments_of_slope(np.eye(5)[j], table) for j in range(5)]
    matrix = np.column_stack(columns)
    dq = np.array([0.1, -0.3, 0.2, 0.05, 0.4])
    expected = np.linalg.solve(matrix, dq / w[0])
    np.testing.assert_allclose(micro_slope(w, dq, gas), expected, rtol=1e-11, atol=1e-13)


def test_time_coefficient_satisfies_compatibility(gas, rng):
    w = random_primitive(rng, 64)
    slopes = _slopes(w, rng.normal(size=(64, 3, 5)), gas)
    table = maxwellian_moments(w, gas)
    A = time_coefficient(w, slopes, gas, table)
    powers = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    total = moments_of_slope(A, table) + sum(
        moments_of_slope(slopes[:, s], table, powers[s]) for s in range(3)
    )
    np.testing.assert_allclose(total, 0.0, atol=1e-11)


@pytest.mark.parametrize("mu", [0.0, 1e-2])
@pytest.mark.parametrize("axis", [0, 1, 2])
def test_uniform_state_gives_euler_flux(mu, axis):
    gas = GasModel(gamma=1.4, mu_ref=mu)
    q = conserved_from_primitive(primitive(1.2, 0.3, -0.5, 0.8, 1.7), gas)
    zero = np.zeros((3, 5))
    pair = interface_flux_pair(q, zero, q, zero, axis, gas, dt=0.01)
    np.testing.assert_allclose(pair.F, euler_flux(q, gas, axis), rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(pair.Ft, 0.0, atol=1e-10)


@pytest.mark.parametrize("mu", [0.0, 5e-3])
def test_interface_flux_is_mirror_symmetric(mu, rng):
    gas = GasModel(gamma=1.4, mu_ref=mu)
    wl, wr = random_primitive(rng, 2)
    ql, qr = conserved_from_primitive(wl, gas), conserved_from_primitive(wr, gas)
    dql, dqr = 0.1 * rng.normal(size=(2, 3, 5))

    def mirrored(dq):
        out = dq * MIRROR
        out[0] = -out[0]
        return out

    direct = interface_flux_pair(ql, dql, qr, dqr, 0, gas, dt=0.02)
    mirror = interface_flux_pair(qr * MIRROR, mirrored(dqr), ql * MIRROR, mirrored(dql), 0, gas, dt=0.02)
    np.testing.assert_allclose(mirror.F, -direct.F * MIRROR, rtol=1e-9, atol=1e-11)
    np.testing.assert_allclose(mirror.Ft, -direct.Ft * MIRROR, rtol=1e-8, atol=1e-9)


@pytest.mark.parametrize("tau", [0.0, 1e-4, 1e-2])
def test_continuous_interface_matches_smooth_flux(tau, gas, rng):
    w = random_primitive(rng, 16)
    dq = 0.2 * rng.normal(size=(16, 3, 5))
    tau = np.full(16, tau)
    trace = KineticTrace(w, dq)
    interface = interface_flux_integrals(trace, trace, tau, 0.01, gas)
    smooth = smooth_flux_integrals(w, _slopes(w, dq, gas), tau, 0.01, 0, gas)
    for got, expected in zip(interface, smooth):
        np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-14)


def test_flux_linearize_recovers_linear_flux():
    F, Ft, dt = np.array([1.0, -2.0, 0.5, 0.0, 3.0]), np.array([0.3, 0.1, -0.4, 2.0, 0.0]), 0.05

    def integral(delta):
        return F * delta + 0.5 * Ft * delta * delta

    pair = flux_linearize(integral(dt), integral(0.5 * dt), dt)
    np.testing.assert_allclose(pair.F, F, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(pair.Ft, Ft, rtol=1e-9, atol=1e-10)


@pytest.mark.parametrize("mu", [0.0, 1e-2])
def test_cell_flux_pairs_without_gradients(mu):
    gas = GasModel(gamma=1.4, mu_ref=mu)
    q = conserved_from_primitive(random_primitive(np.random.default_rng(3), 8), gas)
    pair = cell_flux_pairs(q, np.zeros((8, 3, 5)), gas)
    assert pair.F.shape == (8, 3, 5)
    for axis in range(3):
        np.testing.assert_allclose(pair.F[:, axis], euler_flux(q, gas, axis), rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(pair.Ft, 0.0, atol=1e-13)


def test_cell_flux_pairs_match_interface_for_smooth_data(viscous_gas, rng):
    w = random_primitive(rng, 4)
    q = conserved_from_primitive(w, viscous_gas)
    dq = 0.1 * rng.normal(size=(4, 3, 5))
    cell = cell_flux_pairs(q, dq, viscous_gas)
    for axis in range(3):
        face = interface_flux_pair(q, dq, q, dq, axis, viscous_gas, dt=0.01)
        np.testing.assert_allclose(cell.F[:, axis], face.F, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(cell.Ft[:, axis], face.Ft, rtol=1e-6, atol=1e-8)


@given(st.integers(0, 2))
def test_euler_flux_mass_component_is_momentum(axis):
    q = conserved_from_primitive(primitive(1.1, 0.2, 0.3, -0.4, 0.9), AIR)
    assert euler_flux(q, AIR, axis)[0] == pytest.approx(q[1 + axis])


def test_half_moments_sum_to_full_moments_over_many_states(rng):
    w = random_primitive(rng, 10_000)
    w[:, 4] = 0.5 * w[:, 0] / rng.uniform(0.1, 10.0, 10_000)
    table = maxwellian_moments(w, AIR)
    scale = np.abs(table.pos) + np.abs(table.neg) + 1.0
    assert np.all(np.abs(table.pos + table.neg - table.full) <= 1e-13 * scale)


def _kinetic_vacuum_flux(w, gas, lower, upper):
    # brute-force free-streaming flux of one Maxwellian at rest over lower < u < upper
    rho, lam = w[0], w[4]

    def moment(n):
        return quad(lambda u: u**n * np.sqrt(lam / np.pi) * np.exp(-lam * u * u), lower, upper, epsabs=1e-14)[0]

    transverse = (2.0 + gas.K) / (2.0 * lam)
    return rho * np.array(
        [moment(1), moment(2), 0.0, 0.0, 0.5 * (moment(3) + transverse * moment(1))]
    )


def test_large_collision_time_gives_collisionless_sod_flux(gas):
    wl, wr = primitive(1.0, 0.0, 0.0, 0.0, 1.0), primitive(0.125, 0.0, 0.0, 0.0, 0.1)
    zero = np.zeros((3, 5))
    dt = 0.01
    i_full, _ = interface_flux_integrals(KineticTrace(wl, zero), KineticTrace(wr, zero), np.array(1e2), dt, gas)
    expected = _kinetic_vacuum_flux(wl, gas, 0.0, np.inf) + _kinetic_vacuum_flux(wr, gas, -np.inf, 0.0)
    np.testing.assert_allclose(i_full / dt, expected, rtol=1e-3, atol=1e-12)
    assert expected[0] > 0.0


def test_smooth_flux_carries_the_navier_stokes_shear_stress():
    cfg = make_case("tgv", 8)
    gas = cfg.gas()
    x = np.array([0.3, -0.7, 1.1])
    h = 1e-6
    q = taylor_green_init(x, cfg)
    dq = np.stack([(taylor_green_init(x + h * e, cfg) - taylor_green_init(x - h * e, cfg)) / (2 * h) for e in np.eye(3)])
    viscous = cell_flux_pairs(q, dq, gas).F - np.stack([euler_flux(q, gas, axis) for axis in range(3)])

    sx, sy, sz = np.sin(x)
    cx, cy, cz = np.cos(x)
    # grad[i, j] = d U_j / d x_i; the field is divergence free
    grad = np.array(
        [
            [cx * cy * cz, sx * sy * cz, 0.0],
            [-sx * sy * cz, -cx * cy * cz, 0.0],
            [-sx * cy * sz, cx * sy * sz, 0.0],
        ]
    )
    stress = gas.mu_ref * (grad + grad.T)
    np.testing.assert_allclose(viscous[:, 1:4], -stress, rtol=1e-2, atol=1e-2 * np.abs(stress).max())


@pytest.mark.parametrize("bad, side", [("left", "minus"), ("right", "plus")])
def test_interface_flux_tags_the_failing_trace(bad, side, gas):
    q = conserved_from_primitive(np.array([primitive(1.0, 0.2, 0.0, 0.0, 1.0)] * 4), gas)
    broken = q.copy()
    broken[3, 0] = -0.1
    ql, qr = (broken, q) if bad == "left" else (q, broken)
    zero = np.zeros((4, 3, 5))
    with pytest.raises(NonPositiveDensity) as excinfo:
        interface_flux_pair(ql, zero, qr, zero, 1, gas, dt=0.01)
    assert excinfo.value.side == side
    assert excinfo.value.index == 3
    assert f"{side} trace" in str(excinfo.value)


def _equilibrium_rate(w, dq, gas):
    # q_t of the Euler equations at a point from the compatibility condition
    slopes = _slopes(w, dq, gas)
    table = maxwellian_moments(w, gas)
    return w[:, 0:1] * moments_of_slope(time_coefficient(w, slopes, gas, table), table)


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_flux_rates_match_kinetic_time_derivative_for_continuous_data(axis, gas, rng):
    w = random_primitive(rng, 16)
    q = conserved_from_primitive(w, gas)
    dq = 0.2 * rng.normal(size=(16, 3, 5))
    q_t = _equilibrium_rate(w, dq, gas)
    kinetic = interface_flux_pair(q, dq, q, dq, axis, gas, dt=0.01).Ft
    np.testing.assert_allclose(interface_flux_rate(q, q, q_t, q_t, axis, gas), kinetic, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(cell_flux_rates(q, q_t, gas)[:, axis], kinetic, rtol=1e-8, atol=1e-10)


def test_cell_flux_rates_differentiate_the_euler_flux(gas, rng):
    q = conserved_from_primitive(random_primitive(rng, 32), gas)
    q_t = 0.1 * rng.normal(size=(32, 5)) * q
    eps = 1e-6
    rates = cell_flux_rates(q, q_t, gas)
    for axis in range(3):
        fd = (euler_flux(q + eps * q_t, gas, axis) - euler_flux(q - eps * q_t, gas, axis)) / (2 * eps)
        np.testing.assert_allclose(rates[:, axis], fd, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("axis", [0, 2])
def test_interface_flux_rate_differentiates_the_merged_flux(axis, gas, rng):
    ql = conserved_from_primitive(random_primitive(rng, 32), gas)
    qr = conserved_from_primitive(random_primitive(rng, 32), gas)
    ql_t, qr_t = 0.1 * rng.normal(size=(2, 32, 5)) * np.stack([ql, qr])
    zero = np.zeros((32, 3, 5))
    eps = 1e-6

    def flux(sign):
        return interface_flux_pair(ql + sign * eps * ql_t, zero, qr + sign * eps * qr_t, zero, axis, gas, dt=0.01).F

    fd = (flux(1.0) - flux(-1.0)) / (2 * eps)
    np.testing.assert_allclose(interface_flux_rate(ql, qr, ql_t, qr_t, axis, gas), fd, rtol=1e-6, atol=1e-8)
