"""
One tracking episode: sample a bearing, update the tracker, plan, move.

Per step k at t_k = k T the AUV measures the target, the window is updated,
the kernel is retuned, the posterior is predicted over T_k = {t_k, ..., t_k + nT},
and the AUV follows the first interval of its plan open loop.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from ..baselines import (
    PlkfState,
    motion_policy,
    plkf_init,
    plkf_predict,
    plkf_step,
    poly_fit,
    poly_predict,
    triangulate,
)
from ..exceptions import DegenerateGeometryError, GbtError, NearSingularBearingError
from ..gp_tracker import KernelParams, build_posterior, error_bound, predict_many, tune_hyperparameters
from ..models import Estimator, MotionMode, RunSummary, ScenarioConfig, StepRecord
from ..planner import (
    FlatTrajectory,
    desired_bearing,
    initial_endpoints,
    optimize_endpoints,
    repair_feasibility,
    similarity_cost,
)
from ..sensing import BearingSample, SlidingDataset, measure_bearing
from ..vehicle import AuvParams, AuvState, Wrench, flat_to_wrench, integrate
from .metrics import average_error, summarize
from .targets import TargetModel, build_target

logger = logging.getLogger(__name__)

WARMUP_SAMPLES = 3


@dataclass
class EpisodeStreams:
    """Independent random streams spawned from the config seed."""
    sensor: np.random.Generator
    policy: np.random.Generator
    target: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "EpisodeStreams":
        sensor, policy, target = np.random.SeedSequence(seed).spawn(3)
        return cls(np.random.default_rng(sensor), np.random.default_rng(policy), np.random.default_rng(target))


@dataclass
class StepOutcome:
    """What moving the AUV over one interval produced."""
    state: AuvState
    tau_abs: np.ndarray = field(default_factory=lambda: np.zeros(3))
    cost: float = float("nan")
    penalty: float = 0.0
    iters: int = 0
    plan: Optional[FlatTrajectory] = None


class _WrenchTracker:
    """Wraps a wrench function and keeps the per-axis maximum |tau| it returned."""

    def __init__(self, fn: Callable[[float], Wrench]):
        self.fn = fn
        self.max_abs = np.zeros(3)

    def __call__(self, t: float) -> Wrench:
        wrench = self.fn(t)
        self.max_abs = np.maximum(self.max_abs, np.abs(wrench.as_array()))
        return wrench


def _follow(state: AuvState, tau_fn: Callable[[float], Wrench], t0: float, T: float,
            params: AuvParams, dt: float) -> Tuple[AuvState, np.ndarray]:
    tracker = _WrenchTracker(tau_fn)
    new_state = integrate(state, tracker, t0, t0 + T, dt, params)
    return new_state, tracker.max_abs


def _plan_wrench(plan: FlatTrajectory, params: AuvParams) -> Callable[[float], Wrench]:
    def tau_fn(t: float) -> Wrench:
        z, zdot, zddot = plan.evaluate(t, piece=0)
        return flat_to_wrench(z, zdot, zddot, params)
    return tau_fn


class Episode:
    """Mutable loop state for one run; run() drives it to completion."""

    def __init__(self, config: ScenarioConfig, streams: Optional[EpisodeStreams] = None):
        self.config = config
        self.streams = streams or EpisodeStreams.from_seed(config.seed)
        self.params = config.vehicle_params
        self.T = config.sensor.T
        self.horizon_offsets = np.arange(config.planner.n + 1) * self.T
        horizon_end = config.duration + (config.planner.n + 1) * self.T
        self.target: TargetModel = build_target(config.scenario, horizon_end, self.T, self.streams.target)
        self.state = AuvState(eta=config.vehicle.initial_eta, nu=config.vehicle.initial_nu)
        self.dataset = SlidingDataset(config.sensor.N_c, period=self.T)
        self.kernel: KernelParams = config.tracker.initial_params(config.sensor.sigma_eps ** 2)
        self.plkf: Optional[PlkfState] = None
        self.records: List[StepRecord] = []

    def _tune(self, k: int) -> None:
        tracker = self.config.tracker
        if k % tracker.tune_every_k:
            return
        self.kernel = tune_hyperparameters(
            self.dataset, self.kernel,
            length_bounds=(tracker.l_min, tracker.l_max),
            signal_bounds=(tracker.sf_min, tracker.sf_max),
            max_iter=tracker.max_iter,
            gtol=tracker.gtol,
        )

    def _baseline_estimates(self, sample: BearingSample, horizon: np.ndarray, gp_means: np.ndarray) -> np.ndarray:
        """Horizon prediction of the scored estimator; falls back to the GP while a baseline cannot start."""
        cfg = self.config
        if cfg.estimator is Estimator.PLKF:
            if self.plkf is None:
                position = triangulate(self.dataset)
                if position is not None:
                    self.plkf = plkf_init(position, cfg.baselines.plkf_pos_var, cfg.baselines.plkf_vel_var)
                    logger.debug(f"[Episode] PLKF initialised at t={sample.t:.2f}")
            else:
                self.plkf = plkf_step(self.plkf, sample, self.T, cfg.baselines.q_accel, cfg.sensor.sigma_eps)
            if self.plkf is None:
                return gp_means
            return np.array([plkf_predict(self.plkf, t - sample.t) for t in horizon])

        if cfg.estimator is Estimator.PR:
            order = min(cfg.baselines.poly_order, len(self.dataset) // 2 - 1)
            if order < 0:
                return gp_means
            try:
                return poly_predict(poly_fit(self.dataset, order), horizon)
            except DegenerateGeometryError:
                logger.debug(f"[Episode] Polynomial fit degenerate at t={sample.t:.2f}, using GP mean")
                return gp_means
        return gp_means

    def _plan_gbt(self, t_k: float, means: np.ndarray, covs: np.ndarray) -> StepOutcome:
        cfg = self.config
        pcfg = cfg.planner
        p = pcfg.p
        noise = cfg.sensor.sigma_eps ** 2 * np.eye(2)
        posteriors = [(means[i], covs[i] + noise) for i in range(1, p + 1)]
        schedule = desired_bearing(t_k + self.horizon_offsets[1:p + 1], pcfg.omega)

        if len(self.dataset) < WARMUP_SAMPLES:
            guess = initial_endpoints(self.state, means[1:p + 1], schedule, means[0], pcfg)
            _, plan, diag = repair_feasibility(self.state, guess, self.params, pcfg, t_k)
            try:
                diag.similarity = similarity_cost(plan.endpoints(), schedule, posteriors, pcfg.kappa)
            except NearSingularBearingError:
                diag.similarity = float("nan")
        else:
            _, plan, diag = optimize_endpoints(self.state, posteriors, schedule, self.params, pcfg,
                                               t_start=t_k, mu_now=means[0])

        new_state, tau_abs = _follow(self.state, _plan_wrench(plan, self.params), t_k, self.T,
                                     self.params, cfg.vehicle.dt)
        drift = np.linalg.norm(plan.evaluate(t_k + self.T)[0][:2] - new_state.position)
        logger.debug(f"[Episode] t={t_k:.2f} plan iters={diag.iterations} penalty={diag.penalty:.3e} "
                     f"open-loop drift={drift:.2e} m")
        return StepOutcome(state=new_state, tau_abs=tau_abs, cost=float(diag.similarity),
                           penalty=diag.penalty, iters=diag.iterations, plan=plan)

    def _move(self, t_k: float, means: np.ndarray, covs: np.ndarray) -> StepOutcome:
        cfg = self.config
        mode = cfg.mode
        if mode is MotionMode.GBT:
            return self._plan_gbt(t_k, means, covs)

        if mode is MotionMode.DIRECT_PLACEMENT:
            pcfg = cfg.planner
            r0 = float(np.clip(np.linalg.norm(means[0] - self.state.position), pcfg.r_min, pcfg.r_max))
            bearing = desired_bearing(t_k + self.T, pcfg.omega)
            placed = motion_policy(mode, self.state, self.streams.policy, self.params,
                                   mu=means[1], bearing=bearing, r0=r0)
            return StepOutcome(state=placed)

        wrench = motion_policy(mode, self.state, self.streams.policy, self.params)
        new_state, tau_abs = _follow(self.state, lambda t: wrench, t_k, self.T, self.params, cfg.vehicle.dt)
        return StepOutcome(state=new_state, tau_abs=tau_abs)

    def step(self, k: int) -> StepRecord:
        cfg = self.config
        started = time.perf_counter()
        t_k = k * self.T
        truth = self.target.position(t_k)

        bearing = measure_bearing(truth, self.state.position, cfg.sensor.sigma_eps, self.streams.sensor)
        sample = BearingSample(t=t_k, bearing=bearing, p_auv=self.state.position.copy())
        self.dataset.push(sample)

        self._tune(k)
        gp = build_posterior(self.dataset, self.kernel)
        horizon = t_k + self.horizon_offsets
        means, covs = predict_many(gp, horizon)
        report = error_bound(gp, horizon, cfg.tracker.delta, self.dataset)

        truth_h = self.target.position(horizon)
        estimates = self._baseline_estimates(sample, horizon, means)
        covered = bool(np.all(np.linalg.norm(truth_h - means, axis=1) <= report.radius))

        before = self.state
        outcome = self._move(t_k, means, covs)
        self.state = outcome.state

        elapsed = (time.perf_counter() - started) * 1000.0 if cfg.output.wall_time else 0.0
        return StepRecord(
            k=k, t=t_k,
            target_x=float(truth[0]), target_y=float(truth[1]),
            auv_x=float(before.eta[0]), auv_y=float(before.eta[1]), auv_psi=float(before.eta[2]),
            u=float(before.nu[0]), v=float(before.nu[1]), r=float(before.nu[2]),
            tau_u_max_abs=float(outcome.tau_abs[0]),
            tau_v_max_abs=float(outcome.tau_abs[1]),
            tau_r_max_abs=float(outcome.tau_abs[2]),
            bearing_x=float(bearing[0]), bearing_y=float(bearing[1]),
            avg_err=average_error(estimates, truth_h),
            bound=float(report.radius[0]),
            ccbm=report.ccbm_value,
            cost=float(outcome.cost),
            penalty=float(outcome.penalty),
            iters=int(outcome.iters),
            ms=float(elapsed),
            covered=covered,
            horizon_times=horizon,
            horizon_means=estimates,
            horizon_truth=truth_h,
        )

    def run(self, progress: bool = False) -> Tuple[List[StepRecord], Optional[GbtError]]:
        steps = range(self.config.n_steps)
        if progress:
            steps = tqdm(steps, desc="Episode", unit="step")
        for k in steps:
            try:
                self.records.append(self.step(k))
            except GbtError as e:
                logger.error(f"[Episode] Aborted at step {k} ({e.code}): {e}")
                return self.records, e
        return self.records, None


def run_episode(config: ScenarioConfig, progress: bool = False) -> Tuple[List[StepRecord], RunSummary]:
    """
    Run one episode end to end.

    A module error stops the run; the records collected so far are kept and the
    summary carries the failure code.
    """
    logger.info(f"[Episode] {config.scenario.kind.value} mode={config.mode.value} "
                f"estimator={config.estimator.value} scale={config.ability_scale} seed={config.seed}")
    records, failure = Episode(config).run(progress=progress)
    summary = summarize(records, config, failure)
    if not summary.failed:
        logger.info(f"[Episode] Done: steady mean error {summary.mean_error:.4f} m, "
                    f"coverage {summary.coverage_fraction:.3f}")
    return records, summary
