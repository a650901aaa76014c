from dataclasses import replace

import numpy as np
import pytest

from gbt_tracker.models import OutputConfig, ScenarioConfig, StepRecord, TrackerConfig
from gbt_tracker.planner import PlannerConfig
from gbt_tracker.sensing import BearingSample, SlidingDataset
from gbt_tracker.vehicle import AuvParams


@pytest.fixture
def falcon():
    return AuvParams()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def unit(angle):
    return np.array([np.cos(angle), np.sin(angle)])


@pytest.fixture
def make_dataset():
    """Window of exact bearings from an AUV circling the origin toward a target function."""

    def factory(target_fn, n=20, T=0.1, radius=3.0, omega=2.0 * np.pi, t0=0.0):
        d = SlidingDataset(n, period=T)
        for i in range(n):
            t = t0 + i * T
            p_auv = radius * unit(omega * t)
            q = np.asarray(target_fn(t), dtype=float) - p_auv
            d.push(BearingSample(t=t, bearing=q / np.linalg.norm(q), p_auv=p_auv))
        return d

    return factory


@pytest.fixture
def short_config():
    """One second of simulation with a cheap planner and no figures."""
    base = ScenarioConfig()
    return replace(
        base,
        duration=1.0,
        planner=replace(PlannerConfig(), max_iters=10),
        tracker=replace(TrackerConfig(), max_iter=20),
        output=replace(OutputConfig(), plots=False),
    )


@pytest.fixture
def make_records():
    def factory(n):
        records = []
        for k in range(n):
            t = 0.1 * k
            records.append(StepRecord(
                k=k, t=t, target_x=-1.0 + 0.5 * t, target_y=-1.0 + 0.5 * t,
                auv_x=1.5, auv_y=0.1 * k, auv_psi=np.pi / 2, u=0.0, v=0.0, r=0.0,
                tau_u_max_abs=10.0 * k, tau_v_max_abs=1.0, tau_r_max_abs=0.5,
                bearing_x=1.0, bearing_y=0.0,
                avg_err=1.0 / (k + 3), bound=0.5, ccbm=0.25 if k else float("inf"),
                cost=4.5, penalty=0.0, iters=k % 7, ms=0.0,
                covered=True,
                horizon_times=t + 0.1 * np.arange(3),
                horizon_means=np.zeros((3, 2)),
                horizon_truth=np.ones((3, 2)),
            ))
        return records

    return factory
