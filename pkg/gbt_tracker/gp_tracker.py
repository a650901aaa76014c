"""
Gaussian-process tracking from pseudo-linear bearing data.

Each target coordinate has the same scalar kernel k(t, t'), so the 2x2 block
kernel is k(t, t') I. With the window rows lambda_bar_i the prior covariance
of the pseudo measurements is

    Omega_yy = G (K (x) I2 + sigma_eps^2 I) G^T,

and the posterior at t* follows from conditioning the joint Gaussian of
y and P_T(t*).
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .exceptions import IllConditionedPriorError
from .sensing import (
    ORTH,
    PseudoLinearBatch,
    SlidingDataset,
    assemble_pseudo_linear,
    condition_ratio,
    cumulative_bearing_matrix,
)

logger = logging.getLogger(__name__)

LENGTH_BOUNDS = (0.05, 50.0)
SIGNAL_BOUNDS = (1e-4, 1e4)
JITTER_SCALE = 1e-10
JITTER_ATTEMPTS = 3
FAILED_LML = 1e12


class KernelKind(Enum):
    """Scalar kernel shared by both target coordinates."""
    SE = "se"
    POLY = "poly"


@dataclass(frozen=True)
class KernelParams:
    """
    Hyperparameters theta = {l, sigma_f^2}; noise_var is the known sensor variance.
    For the polynomial kernel length_scale acts as the time scale s.
    """
    length_scale: float = 1.0
    signal_var: float = 1.0
    noise_var: float = 1e-6
    kind: KernelKind = KernelKind.SE

    def clipped(self, length_bounds=LENGTH_BOUNDS, signal_bounds=SIGNAL_BOUNDS) -> "KernelParams":
        return replace(
            self,
            length_scale=float(np.clip(self.length_scale, *length_bounds)),
            signal_var=float(np.clip(self.signal_var, *signal_bounds)),
        )

    @property
    def log_theta(self) -> np.ndarray:
        return np.log([self.length_scale, self.signal_var])

    def with_log_theta(self, theta: np.ndarray) -> "KernelParams":
        return replace(self, length_scale=float(np.exp(theta[0])), signal_var=float(np.exp(theta[1])))


@dataclass(frozen=True)
class GpPosterior:
    """Conditioned GP for one window. Immutable; predictions only read it."""
    batch: PseudoLinearBatch
    params: KernelParams
    omega_yy: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return self.batch.times

    def __len__(self) -> int:
        return len(self.alpha)


@dataclass(frozen=True)
class BoundReport:
    """High-probability error bound at each query time; radius = beta * sigma_bar."""
    query_times: np.ndarray
    sigma_bar: np.ndarray
    xi: np.ndarray
    beta: float
    delta: float
    ccbm_value: float
    radius: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "radius", self.beta * np.asarray(self.sigma_bar))


def kernel_matrix(t1: Sequence[float], t2: Sequence[float], kp: KernelParams) -> np.ndarray:
    """Scalar kernel evaluated on every pair of (t1, t2)."""
    a = np.asarray(t1, dtype=float).reshape(-1, 1)
    b = np.asarray(t2, dtype=float).reshape(1, -1)
    if kp.kind is KernelKind.POLY:
        return kp.signal_var * (a * b / kp.length_scale ** 2 + 1.0) ** 2
    return kp.signal_var * np.exp(-((a - b) ** 2) / (2.0 * kp.length_scale ** 2))


def kernel_eval(t: float, t2: float, kp: KernelParams) -> float:
    return float(kernel_matrix([t], [t2], kp)[0, 0])


def _kernel_diag(times: np.ndarray, kp: KernelParams) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if kp.kind is KernelKind.POLY:
        return kp.signal_var * (times ** 2 / kp.length_scale ** 2 + 1.0) ** 2
    return np.full(times.shape, kp.signal_var)


def prior_covariance(batch: PseudoLinearBatch, kp: KernelParams) -> np.ndarray:
    """
    Omega_yy from the block-diagonal rows. Entry (i, j) is
    lambda_bar_i^T lambda_bar_j k(t_i, t_j) plus 2 sigma_eps^2 on the diagonal.
    """
    K = kernel_matrix(batch.times, batch.times, kp)
    gram = batch.rows @ batch.rows.T
    return gram * K + kp.noise_var * np.diag(np.einsum("ij,ij->i", batch.rows, batch.rows))


def _factor(omega: np.ndarray) -> Tuple[np.ndarray, float]:
    """Lower Cholesky factor, adding diagonal jitter only when the plain factorisation fails."""
    n = omega.shape[0]
    try:
        return cholesky(omega, lower=True), 0.0
    except LinAlgError:
        pass

    jitter = JITTER_SCALE * np.trace(omega) / n
    for attempt in range(JITTER_ATTEMPTS + 1):
        try:
            chol = cholesky(omega + jitter * np.eye(n), lower=True)
            logger.debug(f"[Tracker] Cholesky needed jitter {jitter:.3e} (attempt {attempt + 1})")
            return chol, jitter
        except LinAlgError:
            jitter *= 10.0
    raise IllConditionedPriorError(f"Omega_yy not positive definite after jitter {jitter / 10.0:.3e}")


def build_posterior(d: SlidingDataset, kp: KernelParams) -> GpPosterior:
    """Assemble Omega_yy for the window, factor it and precompute alpha = Omega_yy^-1 y."""
    batch = assemble_pseudo_linear(d)
    omega = prior_covariance(batch, kp)
    if not np.all(np.isfinite(omega)):
        raise IllConditionedPriorError("Omega_yy has non-finite entries")
    chol, jitter = _factor(omega)
    alpha = solve_triangular(chol.T, solve_triangular(chol, batch.y, lower=True), lower=False)
    return GpPosterior(batch=batch, params=kp, omega_yy=omega, chol=chol, alpha=alpha, jitter=jitter)


def predict_many(gp: GpPosterior, times: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior means (M x 2) and covariances (M x 2 x 2) at each query time.

    mean = Omega_yP*^T alpha and cov = k(t*, t*) I - Omega_yP*^T Omega_yy^-1 Omega_yP*
    with Omega_yP* = G (k* (x) I2), whose i-th row is k(t_i, t*) lambda_bar_i^T.
    """
    query = np.atleast_1d(np.asarray(times, dtype=float))
    rows = gp.batch.rows
    k_star = kernel_matrix(gp.times, query, gp.params)

    means = (k_star * gp.alpha[:, None]).T @ rows

    n, m = k_star.shape
    cross = rows[:, None, :] * k_star[:, :, None]
    v = solve_triangular(gp.chol, cross.reshape(n, 2 * m), lower=True).reshape(n, m, 2)
    reduction = np.einsum("nma,nmb->mab", v, v)
    covs = _kernel_diag(query, gp.params)[:, None, None] * np.eye(2) - reduction
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    return means, covs


def predict(gp: GpPosterior, t_star: float) -> Tuple[np.ndarray, np.ndarray]:
    means, covs = predict_many(gp, [t_star])
    return means[0], covs[0]


def _lml_from_factor(y: np.ndarray, chol: np.ndarray) -> float:
    w = solve_triangular(chol, y, lower=True)
    n = len(y)
    return float(-0.5 * w @ w - np.sum(np.log(np.diag(chol))) - 0.5 * n * np.log(2.0 * np.pi))


def _kernel_log_derivatives(times: np.ndarray, kp: KernelParams) -> Tuple[np.ndarray, np.ndarray]:
    """dK/d(log l) and dK/d(log sigma_f^2) of the scalar kernel matrix."""
    K = kernel_matrix(times, times, kp)
    a = np.asarray(times, dtype=float).reshape(-1, 1)
    b = a.T
    if kp.kind is KernelKind.POLY:
        u = a * b / kp.length_scale ** 2
        d_length = kp.signal_var * 2.0 * (u + 1.0) * (-2.0 * u)
    else:
        d_length = K * (a - b) ** 2 / kp.length_scale ** 2
    return d_length, K


def _lml_and_gradient(batch: PseudoLinearBatch, kp: KernelParams) -> Tuple[float, np.ndarray]:
    """
    LML and its gradient in (log l, log sigma_f^2):
    0.5 tr((alpha alpha^T - Omega^-1) dOmega/dtheta_j).
    """
    chol, _ = _factor(prior_covariance(batch, kp))
    value = _lml_from_factor(batch.y, chol)
    alpha = cho_solve((chol, True), batch.y)
    inner = np.outer(alpha, alpha) - cho_solve((chol, True), np.eye(len(alpha)))
    gram = batch.rows @ batch.rows.T
    grad = np.array([0.5 * np.sum(inner * (gram * dK)) for dK in _kernel_log_derivatives(batch.times, kp)])
    return value, grad


def log_marginal_likelihood(d: SlidingDataset, kp: KernelParams) -> float:
    """log p(y | t, theta) through the Cholesky factor of Omega_yy."""
    batch = assemble_pseudo_linear(d)
    chol, _ = _factor(prior_covariance(batch, kp))
    return _lml_from_factor(batch.y, chol)


def log_marginal_likelihood_gradient(d: SlidingDataset, kp: KernelParams) -> np.ndarray:
    """Gradient of the LML with respect to (log l, log sigma_f^2)."""
    return _lml_and_gradient(assemble_pseudo_linear(d), kp)[1]


def tune_hyperparameters(
        d: SlidingDataset,
        warm_start: KernelParams,
        length_bounds: Tuple[float, float] = LENGTH_BOUNDS,
        signal_bounds: Tuple[float, float] = SIGNAL_BOUNDS,
        max_iter: int = 50,
        gtol: float = 1e-6,
) -> KernelParams:
    """
    Maximise the log marginal likelihood over (log l, log sigma_f^2) with L-BFGS-B
    and the closed-form gradient.

    Windows with fewer than three samples return warm_start unchanged. The result
    never scores below the (clipped) warm start.
    """
    if len(d) < 3:
        return warm_start

    batch = assemble_pseudo_linear(d)
    start = warm_start.clipped(length_bounds, signal_bounds)

    def objective(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        try:
            value, grad = _lml_and_gradient(batch, start.with_log_theta(theta))
        except IllConditionedPriorError:
            return FAILED_LML, np.zeros(2)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            return FAILED_LML, np.zeros(2)
        return -value, -grad

    x0 = start.log_theta
    f0, _ = objective(x0)
    if f0 >= FAILED_LML:
        logger.warning("[Tracker] Objective not finite at warm start, keeping hyperparameters")
        return warm_start

    bounds = [tuple(np.log(length_bounds)), tuple(np.log(signal_bounds))]
    try:
        result = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                          options={"maxiter": max_iter, "gtol": gtol})
    except (ValueError, FloatingPointError) as e:
        logger.warning(f"[Tracker] Hyperparameter search failed ({e}), keeping warm start")
        return start

    if not np.all(np.isfinite(result.x)) or not np.isfinite(result.fun) or result.fun >= FAILED_LML:
        logger.warning("[Tracker] Hyperparameter search returned a non-finite objective, keeping warm start")
        return start
    if result.fun > f0:
        return start

    tuned = start.with_log_theta(np.clip(result.x, [b[0] for b in bounds], [b[1] for b in bounds]))
    logger.debug(f"[Tracker] Tuned l={tuned.length_scale:.4f} sf2={tuned.signal_var:.4f} "
                 f"in {result.nit} iterations")
    return tuned


def confidence_scale(n_query: int, delta: float) -> float:
    """beta(delta) = sqrt(2 ln(|T_k| / delta))."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if n_query < 1:
        raise ValueError("need at least one query time")
    return float(np.sqrt(2.0 * np.log(n_query / delta)))


def error_bound(
        gp: GpPosterior,
        query_times: Sequence[float],
        delta: float,
        d: Optional[SlidingDataset] = None,
) -> BoundReport:
    """
    Probabilistic tracking-error bound at each query time.

    xi(t_i) = k(t_i, t_i) kmax - min_t k(t_i, t)^2 / cond(P)
    sigma_bar(t_i) = sqrt(2 k(t_i, t_i) sigma_eps^2 / (N kmax) + xi(t_i) / kmax)

    kmax and the minimum run over the window's sample times; N is the current
    window size. A singular bearing matrix drops the second xi term.
    """
    query = np.atleast_1d(np.asarray(query_times, dtype=float))
    beta = confidence_scale(len(query), delta)

    kp = gp.params
    data_times = gp.times if d is None else d.times
    bearings = gp.batch.rows @ np.linalg.inv(ORTH).T if d is None else d.bearings
    n = len(data_times)

    ratio = condition_ratio(cumulative_bearing_matrix(bearings))
    ccbm_value = float(np.log10(ratio)) if np.isfinite(ratio) else float("inf")

    k_max = float(np.max(_kernel_diag(data_times, kp)))
    k_ii = _kernel_diag(query, kp)
    k_min_sq = np.min(kernel_matrix(query, data_times, kp) ** 2, axis=1)

    if np.isfinite(ratio):
        xi = k_ii * k_max - k_min_sq / ratio
    else:
        xi = k_ii * k_max

    sigma_sq = 2.0 * k_ii * kp.noise_var / (n * k_max) + xi / k_max
    sigma_bar = np.sqrt(np.maximum(sigma_sq, 0.0))
    return BoundReport(query_times=query, sigma_bar=sigma_bar, xi=xi, beta=beta,
                       delta=delta, ccbm_value=ccbm_value)
