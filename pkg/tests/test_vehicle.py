import numpy as np
import numpy.testing as npt
import pytest

from gbt_tracker.exceptions import IntegrationDivergedError
from gbt_tracker.planner import solve_coefficients
from gbt_tracker.vehicle import (
    AuvParams,
    AuvState,
    Wrench,
    coriolis_matrix,
    damping_matrix,
    dynamics_derivative,
    flat_to_state,
    flat_to_wrench,
    integrate,
    rotation_matrix,
)


def test_rotation_matrix_examples():
    npt.assert_allclose(rotation_matrix(0.0), np.eye(3))
    npt.assert_allclose(rotation_matrix(np.pi / 2)[:2, :2], [[0.0, -1.0], [1.0, 0.0]], atol=1e-15)
    for psi in np.linspace(-7.0, 7.0, 15):
        J = rotation_matrix(psi)
        assert abs(np.linalg.det(J) - 1.0) < 1e-12
        npt.assert_allclose(J.T @ J, np.eye(3), atol=1e-12)
        assert J[2, 2] == 1.0


def test_falcon_derived_inertia(falcon):
    assert falcon.M_x == pytest.approx(283.6)
    assert falcon.M_y == pytest.approx(593.2)
    assert falcon.M_psi == pytest.approx(29.0)
    assert falcon.validate() == []


def test_scaled_limits(falcon):
    half = falcon.scaled(0.5)
    npt.assert_allclose(half.upper, [2500.0, 2500.0, 750.0])
    npt.assert_allclose(half.lower, [-2500.0, -2500.0, -750.0])
    assert half.m == falcon.m


def test_validate_names_bad_fields():
    errors = AuvParams(m=-1.0, D_u=-3.0, tau_max=(5000.0, -1.0, 1500.0)).validate()
    assert any("vehicle.params.m" in e for e in errors)
    assert any("D_u" in e for e in errors)
    assert any("F_v" in e for e in errors)


def test_rest_is_equilibrium(falcon):
    x = AuvState(eta=[1.0, 2.0, 0.3], nu=np.zeros(3))
    npt.assert_allclose(dynamics_derivative(x, Wrench(), falcon), np.zeros(6))


def test_surge_drag_balance(falcon):
    x = AuvState(eta=np.zeros(3), nu=[1.0, 0.0, 0.0])
    deriv = dynamics_derivative(x, Wrench(268.2, 0.0, 0.0), falcon)
    npt.assert_allclose(deriv[:3], [1.0, 0.0, 0.0])
    npt.assert_allclose(deriv[3:], np.zeros(3), atol=1e-12)


def test_unit_acceleration_from_rest(falcon):
    x = AuvState(eta=np.zeros(3), nu=np.zeros(3))
    deriv = dynamics_derivative(x, Wrench(falcon.M_x, 0.0, 0.0), falcon)
    npt.assert_allclose(deriv[3:], [1.0, 0.0, 0.0])


def test_coriolis_is_skew_and_damping_dissipates(falcon, rng):
    for _ in range(50):
        nu = rng.normal(size=3)
        C = coriolis_matrix(nu, falcon)
        npt.assert_allclose(C, -C.T)
        assert abs(nu @ C @ nu) < 1e-12
        D = damping_matrix(nu, falcon)
        assert np.all(np.diag(D) >= 0.0)
        assert nu @ D @ nu >= 0.0


def test_integrate_rest_stays_put(falcon):
    x0 = AuvState(eta=[0.5, -0.5, 1.0], nu=np.zeros(3))
    x1 = integrate(x0, lambda t: Wrench(), 0.0, 0.7, 1e-3, falcon)
    npt.assert_allclose(x1.eta, x0.eta)
    npt.assert_allclose(x1.nu, x0.nu)


def test_integrate_straight_line(falcon):
    psi = 0.3
    x0 = AuvState(eta=[0.0, 0.0, psi], nu=[1.0, 0.0, 0.0])
    x1 = integrate(x0, lambda t: Wrench(268.2, 0.0, 0.0), 0.0, 0.55, 0.1, falcon)
    npt.assert_allclose(x1.eta[:2], [0.55 * np.cos(psi), 0.55 * np.sin(psi)], atol=1e-9)
    npt.assert_allclose(x1.nu, [1.0, 0.0, 0.0], atol=1e-9)


def test_integrate_fourth_order(falcon):
    x0 = AuvState(eta=[0.0, 0.0, 0.2], nu=[0.5, 0.1, 0.2])
    tau = Wrench(300.0, 50.0, 20.0)
    finals = [integrate(x0, lambda t: tau, 0.0, 2.0, dt, falcon).as_vector() for dt in (0.2, 0.1, 0.05)]
    coarse = np.linalg.norm(finals[0] - finals[1])
    fine = np.linalg.norm(finals[1] - finals[2])
    assert coarse / fine > 8.0


def test_integrate_rejects_bad_interval(falcon):
    x0 = AuvState(eta=np.zeros(3), nu=np.zeros(3))
    with pytest.raises(ValueError):
        integrate(x0, lambda t: Wrench(), 1.0, 1.0, 1e-3, falcon)
    with pytest.raises(ValueError):
        integrate(x0, lambda t: Wrench(), 0.0, 1.0, 0.0, falcon)


def test_integrate_divergence_raises(falcon):
    x0 = AuvState(eta=np.zeros(3), nu=[1e160, 0.0, 0.0])
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(IntegrationDivergedError):
            integrate(x0, lambda t: Wrench(), 0.0, 1.0, 0.1, falcon)


def test_flat_to_state_examples():
    state = flat_to_state([0.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    npt.assert_allclose(state.nu, [1.0, 0.0, 0.0])
    state = flat_to_state([0.0, 0.0, np.pi / 2], [1.0, 0.0, 0.0])
    npt.assert_allclose(state.nu, [0.0, -1.0, 0.0], atol=1e-15)


def test_flat_to_state_inverts_rotation(rng):
    for _ in range(20):
        z = rng.normal(size=3)
        zdot = rng.normal(size=3)
        state = flat_to_state(z, zdot)
        npt.assert_allclose(rotation_matrix(z[2]) @ state.nu, zdot, atol=1e-12)


def test_flat_to_wrench_examples(falcon):
    rest = flat_to_wrench(np.zeros(3), np.zeros(3), np.zeros(3), falcon)
    npt.assert_allclose(rest.as_array(), np.zeros(3))
    straight = flat_to_wrench(np.zeros(3), [1.0, 0.0, 0.0], np.zeros(3), falcon)
    npt.assert_allclose(straight.as_array(), [268.2, 0.0, 0.0])


def test_flatness_round_trip(falcon, rng):
    for _ in range(5):
        eta0 = np.array([*rng.uniform(-2.0, 2.0, size=2), rng.uniform(-np.pi, np.pi)])
        nu0 = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.2, 0.2), rng.uniform(-0.5, 0.5)])
        zbar = eta0 + np.cumsum(rng.normal(scale=[0.05, 0.05, 0.1], size=(5, 3)), axis=0)
        traj = solve_coefficients(eta0, nu0, zbar, 0.1)

        state = AuvState(eta0, nu0)
        for i in range(traj.p):
            def tau_fn(t, piece=i):
                return flat_to_wrench(*traj.evaluate(t, piece), falcon)

            state = integrate(state, tau_fn, 0.1 * i, 0.1 * (i + 1), 1e-3, falcon)
            assert np.linalg.norm(state.position - traj.endpoints()[i, :2]) < 1e-4
