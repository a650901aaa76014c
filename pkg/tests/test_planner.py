from dataclasses import replace

import numpy as np
import numpy.testing as npt
import pytest

from gbt_tracker.exceptions import DegenerateBearingSetError, MatrixRootError, NearSingularBearingError
from gbt_tracker.planner import (
    FAILURE_FLOOR,
    PlanObjective,
    PlannerConfig,
    constraint_violation,
    desired_bearing,
    initial_endpoints,
    optimal_bearing_set,
    optimize_endpoints,
    penalty_g,
    repair_feasibility,
    sigma_points,
    similarity_cost,
    similarity_cost_mc,
    solve_coefficients,
    trapezoid_weights,
    wrench_profile,
)
from gbt_tracker.pipeline.checks import random_covariance
from gbt_tracker.sensing import condition_ratio, cumulative_bearing_matrix
from gbt_tracker.vehicle import AuvState, rotation_matrix

SQRT3 = np.sqrt(3.0)


def test_desired_bearing_examples():
    npt.assert_allclose(desired_bearing(0.0, 2.0 * np.pi), [1.0, 0.0])
    npt.assert_allclose(desired_bearing(0.25, 2.0 * np.pi), [0.0, 1.0], atol=1e-15)
    schedule = desired_bearing(0.1 * np.arange(10), 2.0 * np.pi)
    steps = np.arccos(np.clip(np.einsum("ij,ij->i", schedule[1:], schedule[:-1]), -1.0, 1.0))
    npt.assert_allclose(np.degrees(steps), 36.0)


def test_optimal_bearing_sets():
    four = optimal_bearing_set(4)
    npt.assert_allclose(sorted(map(tuple, np.round(four, 12))),
                        sorted([(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]), atol=1e-12)
    npt.assert_allclose(cumulative_bearing_matrix(optimal_bearing_set(3)), 3.0 * np.eye(2), atol=1e-12)
    for m in range(3, 21):
        assert abs(condition_ratio(cumulative_bearing_matrix(optimal_bearing_set(m))) - 1.0) <= 1e-9
    with pytest.raises(DegenerateBearingSetError):
        optimal_bearing_set(2)


def test_no_random_triple_beats_uniform(rng):
    angles = rng.uniform(-np.pi, np.pi, size=(10000, 3))
    best = min(condition_ratio(cumulative_bearing_matrix(np.column_stack([np.cos(a), np.sin(a)])))
               for a in angles)
    assert best >= 1.0 - 1e-12


def test_sigma_points_identity():
    sigma = sigma_points(np.zeros(2), np.eye(2), 1.0)
    npt.assert_allclose(sigma.points, [[0.0, 0.0], [SQRT3, 0.0], [0.0, SQRT3], [-SQRT3, 0.0], [0.0, -SQRT3]],
                        atol=1e-12)
    npt.assert_allclose(sigma.weights, [1.0 / 3.0] + [1.0 / 6.0] * 4)


def test_sigma_points_match_moments(rng):
    for _ in range(50):
        A = rng.normal(size=(2, 2))
        cov = A @ A.T
        mu = rng.normal(size=2)
        sigma = sigma_points(mu, cov, 1.0)
        npt.assert_allclose(sigma.mean(), mu, atol=1e-10)
        npt.assert_allclose(sigma.covariance(), cov, atol=1e-10)


def test_sigma_points_collapse_and_reject():
    mu = np.array([1.0, -2.0])
    npt.assert_allclose(sigma_points(mu, np.zeros((2, 2))).points, np.tile(mu, (5, 1)))
    with pytest.raises(MatrixRootError):
        sigma_points(mu, np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        sigma_points(mu, np.eye(2), kappa=-2.0)


def _posteriors(means, var=0.0):
    return [(np.asarray(m, dtype=float), var * np.eye(2)) for m in means]


def test_similarity_alignment_extremes():
    schedule = desired_bearing(0.1 * np.arange(1, 6), 2.0 * np.pi)
    means = np.array([[0.5, 0.0]] * 5)
    behind = means - 2.0 * schedule
    ahead = means + 2.0 * schedule
    assert similarity_cost(behind, schedule, _posteriors(means)) == pytest.approx(5.0)
    assert similarity_cost(ahead, schedule, _posteriors(means)) == pytest.approx(-5.0)


def test_similarity_rejects_coincident_points():
    schedule = desired_bearing([0.1], 2.0 * np.pi)
    with pytest.raises(NearSingularBearingError):
        similarity_cost(np.array([[1.0, 1.0]]), schedule, _posteriors([[1.0, 1.0]]))


def test_unscented_estimate_tracks_monte_carlo(rng):
    for _ in range(5):
        mu = rng.uniform(-3.0, 3.0, size=2)
        cov = random_covariance(rng)
        angle = rng.uniform(-np.pi, np.pi)
        endpoint = np.atleast_2d(mu - rng.uniform(1.5, 4.0) * np.array([np.cos(angle), np.sin(angle)]))
        schedule = desired_bearing([rng.uniform(0.0, 1.0)], 2.0 * np.pi)
        ut = similarity_cost(endpoint, schedule, [(mu, cov)])
        _, mc, se = similarity_cost_mc(endpoint, schedule, [(mu, cov)], 20000, rng)
        assert abs(ut - mc[0]) <= max(0.05, 4.0 * se[0])


def test_single_piece_spline():
    traj = solve_coefficients([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [[2.0, 0.0, 0.0]], 1.0)
    npt.assert_allclose(traj.coeffs[0, 0], [0.0, 1.0, 1.0], atol=1e-12)
    npt.assert_allclose(traj.coeffs[0, 1:], 0.0, atol=1e-12)


def test_spline_reproduces_global_quadratic(rng):
    a, b, c = rng.normal(size=(3, 3))

    def q(t):
        return a + b * t + c * t ** 2

    T = 0.1
    eta0 = q(0.0)
    nu0 = rotation_matrix(eta0[2]).T @ b
    endpoints = np.array([q(T * (i + 1)) for i in range(5)])
    traj = solve_coefficients(eta0, nu0, endpoints, T, t_start=0.0)
    for t in rng.uniform(0.0, 5 * T, size=20):
        npt.assert_allclose(traj.evaluate(t)[0], q(t), atol=1e-10)
    assert traj.junction_residuals().max() <= 1e-9


def test_spline_continuity(rng):
    traj = solve_coefficients(rng.normal(size=3), rng.normal(size=3), rng.normal(size=(6, 3)), 0.1, t_start=2.0)
    assert traj.p == 6
    assert traj.t_end == pytest.approx(2.6)
    assert traj.junction_residuals().max() <= 1e-9


def test_penalty_g_branches():
    varpi = 0.7
    assert penalty_g(-2.0 * varpi, varpi) == 0.0
    assert penalty_g(0.0, varpi) == pytest.approx(varpi / 4.0)
    assert penalty_g(varpi, varpi) == pytest.approx(varpi)
    h = 1e-7
    left = (penalty_g(varpi, varpi) - penalty_g(varpi - h, varpi)) / h
    right = (penalty_g(varpi + h, varpi) - penalty_g(varpi, varpi)) / h
    assert left == pytest.approx(1.0, abs=1e-5)
    assert right == pytest.approx(1.0, abs=1e-5)
    values = penalty_g(np.linspace(-3.0, 3.0, 61), varpi)
    assert np.all(np.diff(values) >= 0.0)
    with pytest.raises(ValueError):
        penalty_g(0.0, 0.0)


def test_trapezoid_weights():
    npt.assert_allclose(trapezoid_weights(4), [0.5, 1.0, 1.0, 1.0, 0.5])


def test_stationary_plan_has_no_violation(falcon):
    eta0 = np.array([1.0, 2.0, 0.5])
    traj = solve_coefficients(eta0, np.zeros(3), np.tile(eta0, (5, 1)), 0.1)
    assert constraint_violation(traj, falcon, PlannerConfig()) == 0.0


def test_tight_limits_are_violated(falcon):
    tiny = replace(falcon, tau_max=(1.0, 1.0, 1.0), tau_min=(-1.0, -1.0, -1.0))
    zbar = np.array([[0.3 * (i + 1), 0.0, 0.0] for i in range(5)])
    traj = solve_coefficients(np.zeros(3), [2.0, 0.0, 0.0], zbar, 0.1)
    assert constraint_violation(traj, tiny, PlannerConfig()) > 0.0


def test_violation_quadrature_converges(falcon):
    tight = replace(falcon, tau_max=(200.0, 200.0, 50.0), tau_min=(-200.0, -200.0, -50.0))
    zbar = np.array([[0.25 * (i + 1) ** 1.5, 0.05 * i, 0.1 * i] for i in range(5)])
    traj = solve_coefficients(np.zeros(3), [1.0, 0.0, 0.0], zbar, 0.1)
    coarse, mid, fine = (constraint_violation(traj, tight, PlannerConfig(n_c=n)) for n in (10, 20, 40))
    assert abs(mid - fine) <= abs(coarse - mid) + 1e-12


def test_wrench_profile_shape(falcon):
    traj = solve_coefficients(np.zeros(3), np.zeros(3), np.zeros((5, 3)), 0.1)
    assert wrench_profile(traj, falcon, 20).shape == (5, 21, 3)


def _planning_problem():
    state = AuvState(eta=[1.5, 0.0, np.pi / 2], nu=np.zeros(3))
    times = 0.1 * np.arange(1, 6)
    schedule = desired_bearing(times, 2.0 * np.pi)
    means = np.column_stack([-1.0 + 0.5 * times, -1.0 + 0.5 * times])
    return state, _posteriors(means, 0.01), schedule, means


def test_standoff_guess_is_aligned():
    state, posteriors, schedule, means = _planning_problem()
    cfg = PlannerConfig()
    guess = initial_endpoints(state, means, schedule, means[0], cfg)
    assert similarity_cost(guess, schedule, posteriors) >= 0.0
    r0 = np.clip(np.linalg.norm(means[0] - state.position), cfg.r_min, cfg.r_max)
    npt.assert_allclose(np.linalg.norm(means - guess[:, :2], axis=1), r0)


def test_optimisation_never_increases_objective(falcon):
    state, posteriors, schedule, means = _planning_problem()
    cfg = PlannerConfig(max_iters=20)
    zbar, traj, diag = optimize_endpoints(state, posteriors, schedule, falcon, cfg, t_start=0.0, mu_now=means[0])
    assert zbar.shape == (5, 3)
    assert diag.objective <= diag.initial_objective + 1e-9
    assert not diag.degraded
    npt.assert_allclose(traj.endpoints(), zbar, atol=1e-9)
    assert diag.max_abs_wrench.shape == (3,)


def test_optimisation_is_deterministic(falcon):
    state, posteriors, schedule, means = _planning_problem()
    cfg = PlannerConfig(max_iters=10)
    first = optimize_endpoints(state, posteriors, schedule, falcon, cfg, mu_now=means[0])[0]
    second = optimize_endpoints(state, posteriors, schedule, falcon, cfg, mu_now=means[0])[0]
    npt.assert_array_equal(first, second)


def test_repair_reduces_violation(falcon):
    weak = falcon.scaled(0.1)
    state = AuvState(eta=np.zeros(3), nu=np.zeros(3))
    cfg = PlannerConfig(max_iters=30)
    guess = np.array([[0.2 * (i + 1), 0.0, 0.0] for i in range(5)])
    before = constraint_violation(solve_coefficients(state.eta, state.nu, guess, cfg.T), weak, cfg)
    _, _, diag = repair_feasibility(state, guess, weak, cfg)
    assert diag.penalty <= before


def test_config_validation():
    assert PlannerConfig().validate() == []
    errors = PlannerConfig(p=12, gamma=1.5, r_min=6.0).validate()
    assert any("planner.p" in e for e in errors)
    assert any("planner.gamma" in e for e in errors)
    assert any("planner.r_min" in e for e in errors)


def _far_plan():
    state = AuvState(eta=[1.0, 0.0, 0.0], nu=np.zeros(3))
    schedule = desired_bearing(0.1 * np.arange(1, 6), 2.0 * np.pi)
    posteriors = _posteriors(np.zeros((5, 2)))
    far = np.array([[20.0 + i, 0.0, 0.0] for i in range(5)])
    return state, posteriors, schedule, far


def test_failed_evaluation_scores_above_real_objective(falcon):
    state, posteriors, schedule, far = _far_plan()
    objective = PlanObjective.from_posteriors(state, posteriors, schedule, falcon, PlannerConfig())
    real = objective(far.ravel())
    assert real > FAILURE_FLOOR
    coincident = far.copy()
    coincident[0] = [0.0, 0.0, 0.0]
    assert objective.value(coincident.ravel()) is None
    assert objective(coincident.ravel()) > real
    assert objective.failures == 1


def test_large_objective_is_not_degraded(falcon):
    state, posteriors, schedule, far = _far_plan()
    cfg = PlannerConfig(max_iters=15)
    _, _, diag = optimize_endpoints(state, posteriors, schedule, falcon, cfg, zbar_init=far)
    assert diag.initial_objective > FAILURE_FLOOR
    assert not diag.degraded
    assert diag.objective <= diag.initial_objective


def test_default_start_is_repaired(falcon):
    state, posteriors, schedule, means = _planning_problem()
    cfg = PlannerConfig(max_iters=20)
    raw = initial_endpoints(state, means, schedule, means[0], cfg)
    raw_penalty = constraint_violation(solve_coefficients(state.eta, state.nu, raw, cfg.T), falcon, cfg)
    repaired, _, _ = repair_feasibility(state, raw, falcon, cfg)
    repaired_penalty = constraint_violation(solve_coefficients(state.eta, state.nu, repaired, cfg.T), falcon, cfg)
    assert repaired_penalty <= raw_penalty
    _, _, diag = optimize_endpoints(state, posteriors, schedule, falcon, cfg, mu_now=means[0])
    assert diag.penalty <= raw_penalty
