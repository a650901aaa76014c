import numpy as np
import numpy.testing as npt
import pytest

from gbt_tracker.baselines import (
    PlkfState,
    motion_policy,
    placement_pose,
    plkf_init,
    plkf_predict,
    plkf_step,
    poly_fit,
    poly_predict,
    triangulate,
)
from gbt_tracker.exceptions import DegenerateGeometryError, FilterDegenerateError
from gbt_tracker.models import MotionMode
from gbt_tracker.sensing import BearingSample, SlidingDataset, measure_bearing
from gbt_tracker.vehicle import AuvState, Wrench


def _case1(t):
    return np.array([-1.0 + 0.5 * t, -1.0 + 0.5 * t])


def test_consistent_measurement_leaves_mean(rng):
    target = np.array([2.0, 1.0])
    p_auv = np.array([-1.0, 3.0])
    q = target - p_auv
    sample = BearingSample(t=0.1, bearing=q / np.linalg.norm(q), p_auv=p_auv)
    state = plkf_init(target, pos_var=1.0, vel_var=1.0)
    updated = plkf_step(state, sample, 0.1, q_accel=0.0, sigma_eps=0.0)
    npt.assert_allclose(updated.position, target, atol=1e-12)
    npt.assert_allclose(updated.velocity, np.zeros(2), atol=1e-12)


def test_covariance_stays_symmetric_psd(rng):
    state = plkf_init([0.0, 0.0])
    for k in range(2000):
        angle = rng.uniform(-np.pi, np.pi)
        sample = BearingSample(t=0.1 * k, bearing=[np.cos(angle), np.sin(angle)], p_auv=rng.normal(size=2))
        state = plkf_step(state, sample, 0.1, q_accel=0.1, sigma_eps=0.001)
        npt.assert_allclose(state.cov, state.cov.T)
        assert np.linalg.eigvalsh(state.cov).min() >= -1e-10


def test_zero_innovation_variance_raises():
    state = PlkfState(mean=np.zeros(4), cov=np.zeros((4, 4)))
    sample = BearingSample(t=0.0, bearing=[1.0, 0.0], p_auv=[0.0, 1.0])
    with pytest.raises(FilterDegenerateError):
        plkf_step(state, sample, 0.1, q_accel=0.0, sigma_eps=0.0)


def test_filter_converges_on_constant_velocity(rng, make_dataset):
    d = make_dataset(_case1, n=2, T=0.1)
    state = plkf_init(triangulate(d))
    for k in range(2, 200):
        t = 0.1 * k
        p_auv = 3.0 * np.array([np.cos(2.0 * np.pi * t), np.sin(2.0 * np.pi * t)]) + _case1(t)
        sample = BearingSample(t=t, bearing=measure_bearing(_case1(t), p_auv, 0.001, rng), p_auv=p_auv)
        state = plkf_step(state, sample, 0.1, q_accel=0.1, sigma_eps=0.001)
    assert np.linalg.norm(state.position - _case1(19.9)) < 0.3
    npt.assert_allclose(plkf_predict(state, 0.0), state.position)


def test_triangulation(make_dataset):
    target = np.array([0.7, -0.4])
    d = make_dataset(lambda t: target, n=5)
    npt.assert_allclose(triangulate(d), target, atol=1e-9)

    parallel = SlidingDataset.from_samples(
        [BearingSample(t=0.1 * i, bearing=[1.0, 0.0], p_auv=[-i, 0.0]) for i in range(4)])
    assert triangulate(parallel) is None
    assert triangulate(SlidingDataset.from_samples(list(parallel)[:1])) is None


def test_linear_fit_recovers_constant_velocity(make_dataset):
    d = make_dataset(_case1, n=20, T=0.1, t0=3.0)
    fit = poly_fit(d, order=1)
    t_mid = 0.5 * (d.times[0] + d.times[-1])
    npt.assert_allclose(fit.coeffs, [[-1.0 + 0.5 * t_mid, 0.5], [-1.0 + 0.5 * t_mid, 0.5]], atol=1e-8)
    npt.assert_allclose(poly_predict(fit, d.times), np.array([_case1(t) for t in d.times]), atol=1e-8)
    npt.assert_allclose(poly_predict(fit, 4.0), _case1(4.0), atol=1e-8)


def test_fit_is_invariant_to_time_shift(make_dataset):
    target = lambda t: np.array([np.sin(t), 0.2 * t ** 2])
    d = make_dataset(target, n=20)
    shifted = SlidingDataset.from_samples(
        [BearingSample(t=s.t + 5.0, bearing=s.bearing, p_auv=s.p_auv) for s in d])
    a = poly_fit(d, order=3)
    b = poly_fit(shifted, order=3)
    npt.assert_allclose(a.coeffs, b.coeffs, atol=1e-8)
    query = np.linspace(0.0, 2.0, 9)
    npt.assert_allclose(poly_predict(a, query), poly_predict(b, query + 5.0), atol=1e-8)


def test_degenerate_fits_raise():
    same = SlidingDataset.from_samples(
        [BearingSample(t=0.1 * i, bearing=[1.0, 0.0], p_auv=[-1.0 - 0.1 * i, 0.0]) for i in range(12)])
    with pytest.raises(DegenerateGeometryError):
        poly_fit(same, order=1)
    with pytest.raises(DegenerateGeometryError):
        poly_fit(SlidingDataset.from_samples(list(same)[:3]), order=4)


def test_static_policy_is_zero(falcon, rng):
    state = AuvState(eta=np.zeros(3), nu=np.zeros(3))
    assert motion_policy(MotionMode.STATIC, state, rng, falcon) == Wrench()


def test_random_policy_is_reproducible(falcon):
    state = AuvState(eta=np.zeros(3), nu=np.zeros(3))
    a = motion_policy(MotionMode.RANDOM, state, np.random.default_rng(5), falcon)
    b = motion_policy(MotionMode.RANDOM, state, np.random.default_rng(5), falcon)
    assert a == b
    wrench = a.as_array()
    assert np.all(wrench <= falcon.upper) and np.all(wrench >= falcon.lower)


def test_direct_placement(falcon, rng):
    state = AuvState(eta=[0.0, 0.0, 6.0], nu=[0.3, 0.0, 0.1])
    mu = np.array([1.0, 2.0])
    bearing = np.array([0.0, 1.0])
    placed = motion_policy(MotionMode.DIRECT_PLACEMENT, state, rng, falcon, mu=mu, bearing=bearing, r0=2.0)
    npt.assert_allclose(placed.position, [1.0, 0.0])
    npt.assert_allclose(placed.nu, np.zeros(3))
    assert abs(placed.eta[2] - 6.0) <= np.pi
    npt.assert_allclose(measure_bearing(mu, placed.position, 0.0, rng), bearing, atol=1e-12)
    with pytest.raises(ValueError):
        motion_policy(MotionMode.DIRECT_PLACEMENT, state, rng, falcon)
    with pytest.raises(ValueError):
        motion_policy(MotionMode.GBT, state, rng, falcon)


def test_placement_heading_faces_target():
    pose = placement_pose([0.0, 0.0], [np.cos(0.4), np.sin(0.4)], 1.0, heading=0.4 + 4.0 * np.pi)
    assert pose.eta[2] == pytest.approx(0.4 + 4.0 * np.pi)
