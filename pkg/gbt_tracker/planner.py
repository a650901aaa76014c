"""
Receding-horizon trajectory optimisation for the sensing AUV.

The plan is a quadratic spline in the flat output z = [x_A, y_A, psi] with p
pieces of length T. Its free variables are the piece endpoints z_bar_i; the
spline coefficients follow from the start state and continuity. The objective

    J(z_bar) = -F(z_bar) + w_p I(z_bar)

trades the unscented estimate F of bearing similarity to a circular schedule
against the trapezoid-integrated smoothed violation I of the wrench limits.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve
from scipy.optimize import minimize

from .exceptions import (
    DegenerateBearingSetError,
    MatrixRootError,
    NearSingularBearingError,
    SplineSolveError,
)
from .sections import ConfigSection
from .vehicle import AuvParams, AuvState, flat_wrench_profile, rotation_matrix

logger = logging.getLogger(__name__)

MIN_SIGMA_RANGE = 1e-6
FAILURE_FLOOR = 1e6


@dataclass(frozen=True)
class PlannerConfig(ConfigSection):
    """Planner settings; defaults are the ones used for the Falcon studies."""
    p: int = 5
    n: int = 11
    omega: float = 2.0 * np.pi
    kappa: float = 1.0
    n_c: int = 20
    gamma: float = 0.98
    w_p: float = 1000.0
    varpi: float = 1.0
    T: float = 0.1
    max_iters: int = 100
    tol: float = 1e-6
    r_min: float = 0.5
    r_max: float = 5.0
    fd_step_pos: float = 1e-6
    fd_step_psi: float = 1e-5
    # Optional range-keeping term, off by default
    range_weight: float = 0.0

    def validate(self) -> List[str]:
        errors = []
        if not 2 <= self.p <= self.n:
            errors.append(f"planner.p: need 2 <= p <= n, got p={self.p}, n={self.n}")
        if self.n_c < 2:
            errors.append(f"planner.n_c: need at least 2 quadrature intervals, got {self.n_c}")
        if not 0.0 < self.gamma <= 1.0:
            errors.append(f"planner.gamma: must lie in (0, 1], got {self.gamma}")
        if self.kappa <= -2.0:
            errors.append(f"planner.kappa: must exceed -2, got {self.kappa}")
        for name in ("T", "varpi", "tol", "fd_step_pos", "fd_step_psi"):
            if getattr(self, name) <= 0:
                errors.append(f"planner.{name}: must be positive")
        if self.w_p < 0 or self.range_weight < 0:
            errors.append("planner.w_p/range_weight: weights must be nonnegative")
        if self.max_iters < 1:
            errors.append("planner.max_iters: must be at least 1")
        if not 0.0 < self.r_min <= self.r_max:
            errors.append(f"planner.r_min/r_max: need 0 < r_min <= r_max, got {self.r_min}, {self.r_max}")
        return errors


@dataclass(frozen=True)
class FlatTrajectory:
    """
    coeffs[i, d] holds the quadratic coefficients [c0, c1, c2] of flat output d
    on piece i, in the local time s = t - t_start - i T in [0, T].
    """
    coeffs: np.ndarray
    t_start: float
    T: float

    @property
    def p(self) -> int:
        return self.coeffs.shape[0]

    @property
    def t_end(self) -> float:
        return self.t_start + self.p * self.T

    def _locate(self, t: np.ndarray, piece: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        offset = np.asarray(t, dtype=float) - self.t_start
        if piece is None:
            index = np.clip(np.floor(offset / self.T + 1e-12).astype(int), 0, self.p - 1)
        else:
            index = np.full(offset.shape, piece)
        return index, offset - index * self.T

    def evaluate(self, t, piece: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        z, z_dot and z_ddot at t; arrays shaped (3,) for scalar t, else (3, M).
        piece pins the polynomial used, so a piece's closing node keeps its own acceleration.
        """
        scalar = np.ndim(t) == 0
        piece, s = self._locate(np.atleast_1d(t), piece)
        c = self.coeffs[piece]
        z = c[:, :, 0] + c[:, :, 1] * s[:, None] + c[:, :, 2] * s[:, None] ** 2
        zdot = c[:, :, 1] + 2.0 * c[:, :, 2] * s[:, None]
        zddot = 2.0 * c[:, :, 2]
        if scalar:
            return z[0], zdot[0], zddot[0]
        return z.T, zdot.T, zddot.T

    def piece_values(self, piece: int, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat output and derivatives on one piece at local times s, each (3, M)."""
        c = self.coeffs[piece]
        s = np.asarray(s, dtype=float)
        z = c[:, 0:1] + c[:, 1:2] * s + c[:, 2:3] * s ** 2
        zdot = c[:, 1:2] + 2.0 * c[:, 2:3] * s
        zddot = np.repeat(2.0 * c[:, 2:3], s.size, axis=1)
        return z, zdot, zddot

    def endpoints(self) -> np.ndarray:
        """z at the end of every piece, shape (p, 3)."""
        c = self.coeffs
        return c[:, :, 0] + c[:, :, 1] * self.T + c[:, :, 2] * self.T ** 2

    def junction_residuals(self) -> np.ndarray:
        """Largest position and velocity mismatch at each interior junction."""
        c = self.coeffs
        pos = c[:-1, :, 0] + c[:-1, :, 1] * self.T + c[:-1, :, 2] * self.T ** 2 - c[1:, :, 0]
        vel = c[:-1, :, 1] + 2.0 * c[:-1, :, 2] * self.T - c[1:, :, 1]
        return np.maximum(np.abs(pos).max(axis=1), np.abs(vel).max(axis=1))


@dataclass(frozen=True)
class SigmaSet:
    points: np.ndarray
    weights: np.ndarray

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def covariance(self) -> np.ndarray:
        diff = self.points - self.mean()
        return (self.weights[:, None] * diff).T @ diff


@dataclass
class PlanDiagnostics:
    """Solver report for one planning step."""
    iterations: int = 0
    evaluations: int = 0
    similarity: float = 0.0
    penalty: float = 0.0
    objective: float = 0.0
    initial_objective: float = 0.0
    degraded: bool = False
    message: str = ""
    max_abs_wrench: np.ndarray = field(default_factory=lambda: np.zeros(3))


def desired_bearing(t, omega: float) -> np.ndarray:
    """[cos wt, sin wt] in absolute time; shape (2,) or (M, 2)."""
    angle = omega * np.asarray(t, dtype=float)
    return np.stack([np.cos(angle), np.sin(angle)], axis=-1)


def optimal_bearing_set(m: int) -> np.ndarray:
    """m bearings evenly spaced on the circle; their cumulative matrix is m I."""
    if m < 3:
        raise DegenerateBearingSetError(f"an optimal bearing set needs at least 3 bearings, got {m}")
    angles = 2.0 * np.pi * np.arange(1, m + 1) / m
    return np.column_stack([np.cos(angles), np.sin(angles)])


def symmetric_sqrt(A: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD 2x2 matrix in closed form."""
    A = 0.5 * (np.asarray(A, dtype=float) + np.asarray(A, dtype=float).T)
    trace = A[0, 0] + A[1, 1]
    det = A[0, 0] * A[1, 1] - A[0, 1] ** 2
    tol = 1e-12 * max(abs(trace), 1.0)
    if not np.all(np.isfinite(A)) or A[0, 0] < -tol or A[1, 1] < -tol or det < -tol * max(abs(trace), 1.0):
        raise MatrixRootError(f"matrix is not positive semidefinite (trace {trace:.3e}, det {det:.3e})")
    s = np.sqrt(max(det, 0.0))
    t = np.sqrt(max(trace + 2.0 * s, 0.0))
    if t == 0.0:
        return np.zeros((2, 2))
    return (A + s * np.eye(2)) / t


def sigma_points(mu: np.ndarray, sigma_tilde: np.ndarray, kappa: float = 1.0) -> SigmaSet:
    """Five unscented points of N(mu, sigma_tilde) with L = 2."""
    L = 2
    if kappa <= -L:
        raise ValueError(f"kappa must exceed -{L}, got {kappa}")
    mu = np.asarray(mu, dtype=float).reshape(2)
    root = symmetric_sqrt((L + kappa) * np.asarray(sigma_tilde, dtype=float))
    points = np.vstack([mu, mu + root[:, 0], mu + root[:, 1], mu - root[:, 0], mu - root[:, 1]])
    weights = np.array([kappa / (L + kappa)] + [1.0 / (2.0 * (L + kappa))] * (2 * L))
    return SigmaSet(points=points, weights=weights)


def _sigma_arrays(posteriors: Sequence[Tuple[np.ndarray, np.ndarray]], kappa: float) -> Tuple[np.ndarray, np.ndarray]:
    sets = [sigma_points(mu, cov, kappa) for mu, cov in posteriors]
    return np.stack([s.points for s in sets]), sets[0].weights


def similarity_terms(endpoints: np.ndarray, schedule: np.ndarray, points: np.ndarray,
                     weights: np.ndarray) -> np.ndarray:
    """Per-horizon unscented similarity, each in [-1, 1]."""
    diff = points - np.asarray(endpoints, dtype=float)[:, None, :2]
    dist = np.linalg.norm(diff, axis=2)
    if np.min(dist) < MIN_SIGMA_RANGE:
        raise NearSingularBearingError(f"planned position within {np.min(dist):.2e} m of a sigma point")
    cosines = np.einsum("pjd,pd->pj", diff, np.asarray(schedule, dtype=float)) / dist
    return cosines @ weights


def similarity_cost(endpoints: np.ndarray, schedule: np.ndarray,
                    posteriors: Sequence[Tuple[np.ndarray, np.ndarray]], kappa: float = 1.0) -> float:
    """
    Unscented estimate of sum_i E[<lambda*(t_i), bearing from z_bar_i to P_T(t_i)>].

    Args:
      endpoints: (p, 2) or (p, 3) AUV endpoints; only positions are used.
      schedule: (p, 2) desired bearings.
      posteriors: p pairs (mu, sigma_tilde) of the predicted target position.
      kappa: UT spread.
    """
    points, weights = _sigma_arrays(posteriors, kappa)
    return float(np.sum(similarity_terms(endpoints, schedule, points, weights)))


def similarity_cost_mc(endpoints: np.ndarray, schedule: np.ndarray,
                       posteriors: Sequence[Tuple[np.ndarray, np.ndarray]], n_samples: int,
                       rng: np.random.Generator) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Monte-Carlo reference for the similarity expectation.

    Returns:
      (total estimate, per-term means, per-term standard errors)
    """
    endpoints = np.asarray(endpoints, dtype=float)
    schedule = np.asarray(schedule, dtype=float)
    means, errors = [], []
    for i, (mu, cov) in enumerate(posteriors):
        samples = rng.multivariate_normal(np.asarray(mu, dtype=float), np.asarray(cov, dtype=float),
                                          size=n_samples, method="eigh")
        diff = samples - endpoints[i, :2]
        dist = np.linalg.norm(diff, axis=1)
        keep = dist >= MIN_SIGMA_RANGE
        values = diff[keep] @ schedule[i] / dist[keep]
        means.append(values.mean())
        errors.append(values.std(ddof=1) / np.sqrt(len(values)))
    means = np.array(means)
    return float(means.sum()), means, np.array(errors)


@lru_cache(maxsize=32)
def _spline_lu(p: int, T: float):
    """LU factors of the 3p x 3p endpoint/continuity system (same for every flat output)."""
    A = np.zeros((3 * p, 3 * p))
    row = 0
    A[row, 0] = 1.0
    row += 1
    A[row, 1] = 1.0
    row += 1
    for i in range(p):
        A[row, 3 * i:3 * i + 3] = [1.0, T, T ** 2]
        row += 1
    for i in range(p - 1):
        A[row, 3 * i:3 * i + 3] = [1.0, T, T ** 2]
        A[row, 3 * (i + 1)] = -1.0
        row += 1
        A[row, 3 * i + 1:3 * i + 3] = [1.0, 2.0 * T]
        A[row, 3 * (i + 1) + 1] = -1.0
        row += 1
    try:
        factors = lu_factor(A, check_finite=True)
    except (LinAlgError, ValueError) as e:
        raise SplineSolveError(f"spline system could not be factored: {e}") from e
    if np.min(np.abs(np.diag(factors[0]))) < 1e-14:
        raise SplineSolveError(f"spline system is singular for p={p}, T={T}")
    return factors


def solve_coefficients(eta0: np.ndarray, nu0: np.ndarray, endpoints_zbar: np.ndarray, T: float,
                       t_start: float = 0.0) -> FlatTrajectory:
    """
    Quadratic spline through the endpoints that starts at the current pose with
    the current earth-frame velocity J(eta) nu, continuous in position and velocity.
    """
    if not T > 0:
        raise SplineSolveError(f"segment duration must be positive, got {T}")
    zbar = np.asarray(endpoints_zbar, dtype=float).reshape(-1, 3)
    p = zbar.shape[0]
    eta0 = np.asarray(eta0, dtype=float)
    zdot0 = rotation_matrix(eta0[2]) @ np.asarray(nu0, dtype=float)

    rhs = np.zeros((3 * p, 3))
    rhs[0] = eta0
    rhs[1] = zdot0
    rhs[2:2 + p] = zbar
    sol = lu_solve(_spline_lu(p, float(T)), rhs)
    if not np.all(np.isfinite(sol)):
        raise SplineSolveError("spline solve produced non-finite coefficients")
    # sol[3i + power, d] -> coeffs[i, d, power]
    coeffs = sol.reshape(p, 3, 3).transpose(0, 2, 1)
    return FlatTrajectory(coeffs=np.ascontiguousarray(coeffs), t_start=t_start, T=T)


def penalty_g(x, varpi: float):
    """Smoothed hinge: 0 below -varpi, (x + varpi)^2 / (4 varpi) in between, x above varpi."""
    if varpi <= 0:
        raise ValueError(f"varpi must be positive, got {varpi}")
    x = np.asarray(x, dtype=float)
    out = np.where(x <= -varpi, 0.0, np.where(x >= varpi, x, (x + varpi) ** 2 / (4.0 * varpi)))
    return out if out.ndim else float(out)


def wrench_profile(traj: FlatTrajectory, params: AuvParams, n_c: int) -> np.ndarray:
    """Flatness wrench at the n_c + 1 quadrature nodes of every piece, shape (p, n_c + 1, 3)."""
    s = np.linspace(0.0, traj.T, n_c + 1)
    profile = np.empty((traj.p, n_c + 1, 3))
    for i in range(traj.p):
        z, zdot, zddot = traj.piece_values(i, s)
        profile[i] = flat_wrench_profile(z, zdot, zddot, params).T
    return profile


def trapezoid_weights(n_c: int) -> np.ndarray:
    w = np.ones(n_c + 1)
    w[0] = w[-1] = 0.5
    return w


def constraint_violation(traj: FlatTrajectory, params: AuvParams, cfg: PlannerConfig,
                         profile: Optional[np.ndarray] = None) -> float:
    """Trapezoid estimate of the integrated smoothed violation of the gamma-scaled wrench limits."""
    if profile is None:
        profile = wrench_profile(traj, params, cfg.n_c)
    upper = cfg.gamma * params.upper
    lower = cfg.gamma * params.lower
    violation = penalty_g(profile - upper, cfg.varpi) + penalty_g(lower - profile, cfg.varpi)
    weights = trapezoid_weights(cfg.n_c)
    return float((traj.T / cfg.n_c) * np.einsum("pjr,j->", violation, weights))


def initial_endpoints(state: AuvState, means: np.ndarray, schedule: np.ndarray, mu_now: np.ndarray,
                      cfg: PlannerConfig) -> np.ndarray:
    """
    Standoff guess: z_bar_i sits r0 behind the predicted target along lambda*(t_i),
    heading toward it. r0 is the current estimated range clamped to [r_min, r_max].
    """
    means = np.asarray(means, dtype=float).reshape(-1, 2)
    schedule = np.asarray(schedule, dtype=float).reshape(-1, 2)
    r0 = float(np.clip(np.linalg.norm(np.asarray(mu_now) - state.position), cfg.r_min, cfg.r_max))

    zbar = np.empty((len(means), 3))
    zbar[:, :2] = means - r0 * schedule
    heading = state.eta[2]
    for i, bearing in enumerate(schedule):
        target_angle = np.arctan2(bearing[1], bearing[0])
        heading = heading + np.angle(np.exp(1j * (target_angle - heading)))
        zbar[i, 2] = heading
    return zbar


def _fd_steps(p: int, cfg: PlannerConfig) -> np.ndarray:
    return np.tile([cfg.fd_step_pos, cfg.fd_step_pos, cfg.fd_step_psi], p)


def _central_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, steps: np.ndarray) -> np.ndarray:
    grad = np.empty_like(x)
    for i, h in enumerate(steps):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad


def _minimise(objective: Callable[[np.ndarray], float], x0: np.ndarray, cfg: PlannerConfig, p: int):
    steps = _fd_steps(p, cfg)
    return minimize(
        objective,
        x0,
        jac=lambda x: _central_gradient(objective, x, steps),
        method="BFGS",
        options={"maxiter": cfg.max_iters, "gtol": cfg.tol},
    )


class _FailureScore:
    """Score for failed evaluations: strictly above every finite value recorded so far."""

    def __init__(self):
        self.largest = 0.0
        self.failures = 0

    def record(self, value: float) -> float:
        self.largest = max(self.largest, abs(value))
        return value

    def fail(self) -> float:
        self.failures += 1
        return FAILURE_FLOOR + 10.0 * self.largest


class PlanObjective:
    """
    J(z_bar) with evaluation bookkeeping. Failed evaluations (coincident
    bearing, singular spline, non-finite value) are counted and scored above
    every finite value seen so far.
    """

    def __init__(self, state: AuvState, t_start: float, points: np.ndarray, weights: np.ndarray,
                 schedule: np.ndarray, means: np.ndarray, r0: float, params: AuvParams, cfg: PlannerConfig):
        self.state = state
        self.t_start = t_start
        self.points = points
        self.weights = weights
        self.schedule = schedule
        self.means = means
        self.r0 = r0
        self.params = params
        self.cfg = cfg
        self.evaluations = 0
        self.score = _FailureScore()

    @classmethod
    def from_posteriors(cls, state: AuvState, posteriors: Sequence[Tuple[np.ndarray, np.ndarray]],
                        schedule: np.ndarray, params: AuvParams, cfg: PlannerConfig, t_start: float = 0.0,
                        mu_now: Optional[np.ndarray] = None) -> "PlanObjective":
        means = np.array([np.asarray(mu, dtype=float) for mu, _ in posteriors])
        if mu_now is None:
            mu_now = means[0]
        r0 = float(np.clip(np.linalg.norm(np.asarray(mu_now) - state.position), cfg.r_min, cfg.r_max))
        points, weights = _sigma_arrays(posteriors, cfg.kappa)
        schedule = np.asarray(schedule, dtype=float).reshape(-1, 2)
        return cls(state, t_start, points, weights, schedule, means, r0, params, cfg)

    @property
    def failures(self) -> int:
        return self.score.failures

    def parts(self, x: np.ndarray) -> Tuple[float, float, FlatTrajectory]:
        zbar = x.reshape(-1, 3)
        traj = solve_coefficients(self.state.eta, self.state.nu, zbar, self.cfg.T, self.t_start)
        similarity = float(np.sum(similarity_terms(zbar, self.schedule, self.points, self.weights)))
        penalty = constraint_violation(traj, self.params, self.cfg)
        return similarity, penalty, traj

    def value(self, x: np.ndarray) -> Optional[float]:
        """J at x, or None when the evaluation fails."""
        try:
            similarity, penalty, _ = self.parts(x)
        except (NearSingularBearingError, SplineSolveError):
            return None
        value = -similarity + self.cfg.w_p * penalty
        if self.cfg.range_weight > 0:
            ranges = np.linalg.norm(self.means - x.reshape(-1, 3)[:, :2], axis=1)
            value += self.cfg.range_weight * float(np.sum((ranges - self.r0) ** 2))
        return float(value) if np.isfinite(value) else None

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        value = self.value(x)
        if value is None:
            return self.score.fail()
        return self.score.record(value)


def optimize_endpoints(
        state: AuvState,
        posteriors: Sequence[Tuple[np.ndarray, np.ndarray]],
        schedule: np.ndarray,
        params: AuvParams,
        cfg: PlannerConfig,
        t_start: float = 0.0,
        mu_now: Optional[np.ndarray] = None,
        zbar_init: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, FlatTrajectory, PlanDiagnostics]:
    """
    Minimise -F(z_bar) + w_p I(z_bar) over the p endpoints with BFGS and
    central-difference gradients.

    Args:
      state: AUV state at t_start.
      posteriors: (mu, sigma_tilde) of the target at t_start + i T, i = 1..p.
      schedule: desired bearings at the same times.
      params: Vehicle parameters (already scaled for reduced ability).
      cfg: Planner settings.
      t_start: Absolute time of the current step.
      mu_now: Estimated target position at t_start, used for the standoff range.
      zbar_init: Optional initial endpoints; defaults to the standoff guess
        after repair_feasibility has pulled it toward the wrench limits.

    Returns:
      (z_bar, trajectory, diagnostics). If the chosen point cannot be
      evaluated, the initial guess is returned with diagnostics.degraded set.
    """
    objective = PlanObjective.from_posteriors(state, posteriors, schedule, params, cfg, t_start, mu_now)
    p = len(posteriors)
    if zbar_init is None:
        anchor = objective.means[0] if mu_now is None else mu_now
        guess = initial_endpoints(state, objective.means, objective.schedule, anchor, cfg)
        zbar_init = repair_feasibility(state, guess, params, cfg, t_start)[0]
    x0 = np.asarray(zbar_init, dtype=float).ravel()
    f0 = objective(x0)

    diagnostics = PlanDiagnostics(initial_objective=f0)
    best_x, best_f = x0, f0
    try:
        result = _minimise(objective, x0, cfg, p)
        diagnostics.iterations = int(result.nit)
        diagnostics.message = str(result.message)
        if np.all(np.isfinite(result.x)) and np.isfinite(result.fun) and result.fun <= f0:
            best_x, best_f = result.x, float(result.fun)
    except (ValueError, ArithmeticError) as e:
        logger.warning(f"[Planner] Endpoint optimisation failed at t={t_start:.2f}: {e}")
        diagnostics.message = str(e)

    if objective.value(best_x) is None:
        diagnostics.degraded = True
        diagnostics.message = diagnostics.message or "no successful evaluation"
        best_x = x0

    similarity, penalty, traj = _safe_parts(objective, best_x, x0)
    diagnostics.evaluations = objective.evaluations
    diagnostics.similarity = similarity
    diagnostics.penalty = penalty
    diagnostics.objective = best_f
    diagnostics.max_abs_wrench = np.abs(wrench_profile(traj, params, cfg.n_c)).max(axis=(0, 1))
    if diagnostics.degraded:
        logger.warning(f"[Planner] Degraded plan at t={t_start:.2f} ({diagnostics.message})")
    elif objective.failures:
        logger.debug(f"[Planner] {objective.failures} failed evaluations at t={t_start:.2f}")
    return best_x.reshape(p, 3), traj, diagnostics


def _safe_parts(objective: PlanObjective, x: np.ndarray, fallback: np.ndarray) -> Tuple[float, float, FlatTrajectory]:
    try:
        return objective.parts(x)
    except NearSingularBearingError:
        zbar = fallback.reshape(-1, 3)
        traj = solve_coefficients(objective.state.eta, objective.state.nu, zbar, objective.cfg.T, objective.t_start)
        return float("nan"), constraint_violation(traj, objective.params, objective.cfg), traj


def repair_feasibility(
        state: AuvState,
        zbar_guess: np.ndarray,
        params: AuvParams,
        cfg: PlannerConfig,
        t_start: float = 0.0,
) -> Tuple[np.ndarray, FlatTrajectory, PlanDiagnostics]:
    """
    Pull a guessed endpoint set toward input feasibility by minimising
    w_p I(z_bar) + ||z_bar - z_bar_guess||^2.
    """
    guess = np.asarray(zbar_guess, dtype=float).reshape(-1, 3)
    p = len(guess)
    evaluations = [0]
    score = _FailureScore()

    def objective(x: np.ndarray) -> float:
        evaluations[0] += 1
        try:
            traj = solve_coefficients(state.eta, state.nu, x.reshape(-1, 3), cfg.T, t_start)
        except SplineSolveError:
            return score.fail()
        value = cfg.w_p * constraint_violation(traj, params, cfg) + float(np.sum((x - guess.ravel()) ** 2))
        return score.record(value) if np.isfinite(value) else score.fail()

    x0 = guess.ravel()
    f0 = objective(x0)
    diagnostics = PlanDiagnostics(initial_objective=f0)
    best_x, best_f = x0, f0
    if f0 > 0:
        try:
            result = _minimise(objective, x0, cfg, p)
            diagnostics.iterations = int(result.nit)
            diagnostics.message = str(result.message)
            if np.all(np.isfinite(result.x)) and result.fun <= f0:
                best_x, best_f = result.x, float(result.fun)
        except (ValueError, ArithmeticError) as e:
            logger.warning(f"[Planner] Feasibility repair failed at t={t_start:.2f}: {e}")
            diagnostics.degraded = True
            diagnostics.message = str(e)

    traj = solve_coefficients(state.eta, state.nu, best_x.reshape(-1, 3), cfg.T, t_start)
    profile = wrench_profile(traj, params, cfg.n_c)
    diagnostics.evaluations = evaluations[0]
    diagnostics.objective = best_f
    diagnostics.penalty = constraint_violation(traj, params, cfg, profile)
    diagnostics.max_abs_wrench = np.abs(profile).max(axis=(0, 1))
    return best_x.reshape(p, 3), traj, diagnostics
