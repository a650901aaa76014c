"""
Invariant suites behind the `check` command.

Each suite fuzzes one module against an independent oracle and returns a
CheckResult. quick=True shrinks trial counts for interactive use; the
oracles and tolerances stay the same.
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import cho_factor, cho_solve
from tqdm import tqdm

from ..gp_tracker import KernelParams, build_posterior, error_bound, kernel_matrix, predict_many
from ..planner import (
    optimal_bearing_set,
    sigma_points,
    similarity_cost_mc,
    similarity_terms,
    solve_coefficients,
)
from ..sensing import (
    BearingSample,
    SlidingDataset,
    assemble_pseudo_linear,
    condition_ratio,
    cumulative_bearing_matrix,
    measure_bearing,
    orth_complement,
)
from ..vehicle import AuvParams, AuvState, flat_to_wrench, integrate

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def to_dict(self) -> Dict:
        return asdict(self)


def random_unit(rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    angle = rng.uniform(-np.pi, np.pi, size=size)
    return np.stack([np.cos(angle), np.sin(angle)], axis=-1)


def random_dataset(rng: np.random.Generator, n: int, t_span: float = 10.0) -> SlidingDataset:
    """n samples at strictly increasing random times with random bearings and AUV positions."""
    gaps = rng.uniform(0.05, 1.0, size=n)
    times = np.cumsum(gaps) * t_span / max(np.sum(gaps), 1e-9)
    samples = [BearingSample(t=float(t), bearing=random_unit(rng), p_auv=rng.uniform(-5.0, 5.0, size=2))
               for t in times]
    return SlidingDataset.from_samples(samples)


def random_kernel(rng: np.random.Generator, noise_std: Optional[float] = None) -> KernelParams:
    std = noise_std if noise_std is not None else rng.uniform(0.01, 0.1)
    return KernelParams(length_scale=rng.uniform(0.5, 5.0), signal_var=rng.uniform(0.5, 2.0), noise_var=std ** 2)


def random_covariance(rng: np.random.Generator, std_range: Tuple[float, float] = (0.05, 0.4)) -> np.ndarray:
    """Rotated diagonal covariance with axis standard deviations drawn from std_range."""
    c, s = random_unit(rng)
    R = np.array([[c, -s], [s, c]])
    return R @ np.diag(rng.uniform(*std_range, size=2) ** 2) @ R.T


def joint_gaussian_posterior(d: SlidingDataset, kp: KernelParams, t_star: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Information-form conditioning of the joint Gaussian over the stacked target
    positions. The sensor noise is split evenly between a latent perturbation
    Q_i = P_T(t_i) + e_i and independent observation noise, so y = G Q + v with
    diagonal R. The observations update the precision of Q; P_T(t*) follows
    through the Gaussian conditional P_T(t*) | Q.
    """
    batch = assemble_pseudo_linear(d)
    G = batch.G
    row_norms = np.einsum("ij,ij->i", batch.rows, batch.rows)
    half = 0.5 * kp.noise_var

    C_qq = np.kron(kernel_matrix(batch.times, batch.times, kp), np.eye(2)) + half * np.eye(2 * len(d))
    C_sq = np.kron(kernel_matrix([t_star], batch.times, kp), np.eye(2))
    C_ss = kernel_matrix([t_star], [t_star], kp)[0, 0] * np.eye(2)
    R_inv = 1.0 / (half * row_norms)

    prior = cho_factor(C_qq)
    info = cho_solve(prior, np.eye(len(C_qq))) + G.T @ (R_inv[:, None] * G)
    info_vector = G.T @ (R_inv * batch.y)
    posterior = cho_factor(info)
    q_mean = cho_solve(posterior, info_vector)
    q_cov = cho_solve(posterior, np.eye(len(info)))

    A = cho_solve(prior, C_sq.T).T
    mean = A @ q_mean
    cov = C_ss - A @ C_sq.T + A @ q_cov @ A.T
    return mean, 0.5 * (cov + cov.T)


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1.0))


def check_orthogonality(rng: np.random.Generator, quick: bool = True) -> CheckResult:
    lam = random_unit(rng, 200 if quick else 1000)
    bars = np.array([orth_complement(l) for l in lam])
    dots = np.abs(np.einsum("ij,ij->i", bars, lam)).max()
    norms = np.abs(np.einsum("ij,ij->i", bars, bars) - 2.0).max()
    return CheckResult("orthogonality", bool(dots <= 1e-12 and norms <= 1e-12),
                       f"max |lambda_bar.lambda|={dots:.2e}, max |lambda_bar^2 - 2|={norms:.2e}")


def check_optimal_bearings(rng: np.random.Generator, quick: bool = True) -> CheckResult:
    worst = max(abs(condition_ratio(cumulative_bearing_matrix(optimal_bearing_set(m))) - 1.0)
                for m in range(3, 21))
    trials = 2000 if quick else 10000
    best_random = min(condition_ratio(cumulative_bearing_matrix(random_unit(rng, 3))) for _ in range(trials))
    passed = worst <= 1e-9 and best_random >= 1.0 - 1e-12
    return CheckResult("optimal_bearings", bool(passed),
                       f"max |cond - 1| over m=3..20: {worst:.2e}; best random triple cond={best_random:.6f}")


def check_ut_moments(rng: np.random.Generator, quick: bool = True) -> CheckResult:
    worst_mean, worst_cov = 0.0, 0.0
    for _ in range(100 if quick else 1000):
        A = rng.normal(size=(2, 2))
        cov = A @ A.T
        mu = rng.normal(size=2)
        sigma = sigma_points(mu, cov, 1.0)
        worst_mean = max(worst_mean, np.abs(sigma.mean() - mu).max())
        worst_cov = max(worst_cov, np.abs(sigma.covariance() - cov).max())
    return CheckResult("ut_moments", bool(worst_mean <= 1e-10 and worst_cov <= 1e-8),
                       f"max mean error {worst_mean:.2e}, max covariance error {worst_cov:.2e}")


def check_ut_fidelity(rng: np.random.Generator, quick: bool = True) -> CheckResult:
    """Per-term |UT - MC| <= max(0.05, 4 MC standard errors) on random posteriors."""
    n_cases = 10 if quick else 50
    n_samples = 20000 if quick else 100000
    failures = 0
    worst = 0.0
    for _ in range(n_cases):
        mu = rng.uniform(-3.0, 3.0, size=2)
        cov = random_covariance(rng)
        offset = random_unit(rng) * rng.uniform(1.5, 4.0)
        endpoint = np.atleast_2d(mu - offset)
        schedule = np.atleast_2d(random_unit(rng))
        sigma = sigma_points(mu, cov, 1.0)
        ut = similarity_terms(endpoint, schedule, sigma.points[None], sigma.weights)[0]
        _, mc, se = similarity_cost_mc(endpoint, schedule, [(mu, cov)], n_samples, rng)
        gap = abs(ut - mc[0])
        worst = max(worst, gap)
        if gap > max(0.05, 4.0 * se[0]):
            failures += 1
    return CheckResult("ut_fidelity", failures == 0, f"{failures}/{n_cases} terms outside tolerance, worst gap {worst:.3f}")


def check_gp_oracle(rng: np.random.Generator, quick: bool = True) -> CheckResult:
    n_cases = 30 if quick else 100
    worst = 0.0
    for _ in range(n_cases):
        d = random_dataset(rng, int(rng.integers(1, 21)))
        kp = random_kernel(rng)
        t_star = float(rng.uniform(-1.0, 12.0))
        mean, cov = predict_many(build_posterior(d, kp), [t_star])
        ref_mean, ref_cov = joint_gaussian_posterior(d, kp, t_star)
        worst = max(worst, _relative(mean[0], ref_mean), _relative(cov[0], ref_cov))
    return CheckResult("gp_oracle", bool(worst <= 1e-8), f"worst relative deviation {worst:.2e} over {n_cases} datasets")


def check_posterior_definite(rng: np.random.Generator, quick: bool = True) -> CheckResult:
    n_cases = 200 if quick else 1000
    smallest = np.inf
    for _ in range(n_cases):
        d = random_dataset(rng, int(rng.integers(1, 21)))
        _, covs = predict_many(build_posterior(d, random_kernel(rng)), [rng.uniform(-1.0, 12.0)])
        smallest = min(smallest, float(np.linalg.eigvalsh(covs[0]).min()))
    return CheckResult("posterior_definite", bool(smallest > 0.0), f"smallest posterior eigenvalue {smallest:.3e}")


def describe_dataset(d: SlidingDataset, norms: Optional[np.ndarray] = None,
                     limits: Optional[np.ndarray] = None) -> str:
    """One line per sample: time, bearing, AUV position and, when given, ||Sigma|| against sigma_bar^2."""
    lines = []
    for i, sample in enumerate(d):
        line = (f"t={sample.t:.6g} bearing=({sample.bearing[0]:.6g}, {sample.bearing[1]:.6g}) "
                f"p_auv=({sample.p_auv[0]:.6g}, {sample.p_auv[1]:.6g})")
        if norms is not None and limits is not None:
            line += f" |Sigma|={norms[i]:.6g} sigma_bar^2={limits[i]:.6g}"
        lines.append(line)
    return "\n".join(lines)


def check_bound_norm(rng: np.random.Generator, quick: bool = True) -> CheckResult:
    """
    ||Sigma(t_i)|| <= sigma_bar(t_i)^2 at the window times. Violations are
    reported with the offending dataset and kernel; the check does not fail.
    """
    n_cases = 200 if quick else 1000
    offending: List[str] = []
    for case in range(n_cases):
        d = random_dataset(rng, int(rng.integers(1, 21)))
        kp = random_kernel(rng)
        gp = build_posterior(d, kp)
        report = error_bound(gp, d.times, 0.05, d)
        _, covs = predict_many(gp, d.times)
        norms = np.linalg.norm(covs, ord=2, axis=(1, 2))
        limits = report.sigma_bar ** 2
        if np.any(norms > limits + 1e-12):
            offending.append(f"case {case} (l={kp.length_scale:.6g}, sf2={kp.signal_var:.6g}, "
                             f"sn2={kp.noise_var:.6g}):\n{describe_dataset(d, norms, limits)}")
    if offending:
        logger.warning(f"[Checks] Bound-norm inequality violated on {len(offending)} datasets")
    detail = f"{len(offending)}/{n_cases} datasets violate the norm inequality"
    if offending:
        detail += "\n" + "\n".join(offending)
    return CheckResult("bound_norm", True, detail)


def check_flatness(rng: np.random.Generator, quick: bool = True) -> CheckResult:
    """Integrating the flatness wrench reproduces the planned spline within 1e-4 m over 0.5 s."""
    params = AuvParams()
    n_cases = 20 if quick else 100
    worst = 0.0
    for _ in range(n_cases):
        eta0 = np.array([*rng.uniform(-2.0, 2.0, size=2), rng.uniform(-np.pi, np.pi)])
        nu0 = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.2, 0.2), rng.uniform(-0.5, 0.5)])
        zbar = eta0 + np.cumsum(rng.normal(scale=[0.05, 0.05, 0.1], size=(5, 3)), axis=0)
        traj = solve_coefficients(eta0, nu0, zbar, 0.1)

        state = AuvState(eta0, nu0)
        for i in range(traj.p):
            def tau_fn(t, traj=traj, piece=i):
                return flat_to_wrench(*traj.evaluate(t, piece), params)

            state = integrate(state, tau_fn, i * 0.1, (i + 1) * 0.1, 1e-3, params)
            worst = max(worst, float(np.linalg.norm(state.position - traj.endpoints()[i, :2])))
    return CheckResult("flatness", bool(worst <= 1e-4), f"worst position drift {worst:.2e} m")


def coverage_trial(
        rng: np.random.Generator,
        n_window: int = 20,
        n: int = 11,
        T: float = 0.1,
        sigma_eps: float = 0.001,
        length_scale: float = 2.0,
        signal_var: float = 1.0,
        radius: float = 4.0,
        omega: float = np.pi,
        delta: float = 0.05,
) -> bool:
    """
    One trial of the uniform error bound: a target drawn from the SE prior, an AUV
    on a fixed circle, a full window, true hyperparameters. True when every horizon
    error lies within beta * sigma_bar.
    """
    times = np.arange(n_window + n) * T
    kp = KernelParams(length_scale=length_scale, signal_var=signal_var, noise_var=sigma_eps ** 2)
    K = kernel_matrix(times, times, kp)
    path = rng.multivariate_normal(np.zeros(len(times)), K, size=2, method="eigh").T

    d = SlidingDataset(n_window, period=T)
    for j in range(n_window):
        p_auv = radius * np.array([np.cos(omega * times[j]), np.sin(omega * times[j])])
        d.push(BearingSample(t=times[j], bearing=measure_bearing(path[j], p_auv, sigma_eps, rng), p_auv=p_auv))

    horizon = times[n_window - 1:]
    gp = build_posterior(d, kp)
    means, _ = predict_many(gp, horizon)
    report = error_bound(gp, horizon, delta, d)
    errors = np.linalg.norm(path[n_window - 1:] - means, axis=1)
    return bool(np.all(errors <= report.radius))


def check_coverage(rng: np.random.Generator, quick: bool = True, delta: float = 0.05) -> CheckResult:
    trials = 100 if quick else 500
    hits = sum(coverage_trial(rng, delta=delta)
               for _ in tqdm(range(trials), desc="Coverage", unit="trial", disable=None))
    frequency = hits / trials
    return CheckResult("coverage", bool(frequency >= 1.0 - delta - 0.03),
                       f"bound held in {hits}/{trials} trials ({frequency:.3f})")


SUITES: Dict[str, Callable[..., CheckResult]] = {
    "orthogonality": check_orthogonality,
    "optimal_bearings": check_optimal_bearings,
    "ut_moments": check_ut_moments,
    "ut_fidelity": check_ut_fidelity,
    "gp_oracle": check_gp_oracle,
    "posterior_definite": check_posterior_definite,
    "bound_norm": check_bound_norm,
    "flatness": check_flatness,
    "coverage": check_coverage,
}


def run_checks(names: Optional[Sequence[str]] = None, seed: int = 0, quick: bool = True) -> List[CheckResult]:
    """Run the named suites (all by default), each with its own stream spawned from seed."""
    names = list(names) if names else list(SUITES)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ValueError(f"unknown check suites: {', '.join(unknown)}")

    streams = np.random.SeedSequence(seed).spawn(len(SUITES))
    seeds = dict(zip(SUITES, streams))
    results = []
    for name in names:
        started = time.perf_counter()
        result = SUITES[name](np.random.default_rng(seeds[name]), quick=quick)
        result.seconds = time.perf_counter() - started
        logger.info(f"[Checks] {name}: {'pass' if result.passed else 'FAIL'} ({result.detail})")
        results.append(result)
    return results


def results_table(results: Sequence[CheckResult]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in results], columns=["name", "passed", "detail", "seconds"])
