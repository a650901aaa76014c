"""
Comparison estimators and motion policies.

Estimators: a constant-velocity pseudo-linear Kalman filter and a windowed
polynomial regression on the pseudo-linear rows. Policies: a static AUV, a
randomly driven AUV and ideal direct placement on the standoff circle.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .exceptions import DegenerateGeometryError, FilterDegenerateError
from .models import MotionMode
from .sensing import (
    BearingSample,
    SlidingDataset,
    assemble_pseudo_linear,
    condition_ratio,
    orth_complement,
)
from .vehicle import AuvParams, AuvState, Wrench

logger = logging.getLogger(__name__)

MAX_TRIANGULATION_COND = 1e8


@dataclass(frozen=True)
class PlkfState:
    """mean = [x, y, vx, vy]; cov is the 4x4 error covariance."""
    mean: np.ndarray
    cov: np.ndarray

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.mean[2:]


@dataclass(frozen=True)
class PolyFit:
    """Per-coordinate polynomial in the centred time tau = t - t_mid."""
    order: int
    coeffs: np.ndarray
    times: np.ndarray
    t_mid: float


def plkf_init(position: np.ndarray, pos_var: float = 10.0, vel_var: float = 4.0) -> PlkfState:
    """Zero-velocity start at a triangulated position with a weakly informative covariance."""
    mean = np.concatenate([np.asarray(position, dtype=float).reshape(2), np.zeros(2)])
    return PlkfState(mean=mean, cov=np.diag([pos_var, pos_var, vel_var, vel_var]))


def _transition(T: float, q_accel: float):
    I2 = np.eye(2)
    F = np.block([[I2, T * I2], [np.zeros((2, 2)), I2]])
    Q = q_accel * np.block([
        [T ** 3 / 3.0 * I2, T ** 2 / 2.0 * I2],
        [T ** 2 / 2.0 * I2, T * I2],
    ])
    return F, Q


def plkf_step(s: PlkfState, sample: BearingSample, T: float, q_accel: float, sigma_eps: float,
              predict_first: bool = True) -> PlkfState:
    """
    Constant-velocity prediction followed by the scalar pseudo-linear update
    y = lambda_bar^T P_A with R = 2 sigma_eps^2 and a Joseph-form covariance.
    """
    mean, cov = s.mean, s.cov
    if predict_first:
        F, Q = _transition(T, q_accel)
        mean = F @ mean
        cov = F @ cov @ F.T + Q

    row = orth_complement(sample.bearing)
    H = np.concatenate([row, np.zeros(2)])
    y = float(row @ sample.p_auv)
    R = 2.0 * sigma_eps ** 2

    S = float(H @ cov @ H + R)
    if not np.isfinite(S) or S <= 0.0:
        raise FilterDegenerateError(f"innovation variance {S:.3e} at t={sample.t:.2f}")
    gain = cov @ H / S
    mean = mean + gain * (y - H @ mean)
    A = np.eye(4) - np.outer(gain, H)
    cov = A @ cov @ A.T + R * np.outer(gain, gain)
    cov = 0.5 * (cov + cov.T)
    return PlkfState(mean=mean, cov=cov)


def plkf_predict(s: PlkfState, dt: float) -> np.ndarray:
    return s.position + dt * s.velocity


def triangulate(d: SlidingDataset) -> Optional[np.ndarray]:
    """Least-squares intersection of the window's pseudo-linear rows; None when the bearings are parallel."""
    if len(d) < 2:
        return None
    batch = assemble_pseudo_linear(d)
    normal = batch.rows.T @ batch.rows
    if condition_ratio(normal) > MAX_TRIANGULATION_COND:
        return None
    return np.linalg.solve(normal, batch.rows.T @ batch.y)


def _design(rows: np.ndarray, tau: np.ndarray, order: int) -> np.ndarray:
    basis = np.vander(tau, order + 1, increasing=True)
    return np.hstack([rows[:, 0:1] * basis, rows[:, 1:2] * basis])


def poly_fit(d: SlidingDataset, order: int = 4) -> PolyFit:
    """
    Least-squares fit of y_i = lambda_bar_i^T [poly_x(t_i), poly_y(t_i)] over the
    2 (order + 1) coefficients, with times centred at the window midpoint.
    """
    if order < 0:
        raise ValueError(f"order must be nonnegative, got {order}")
    n_coeffs = 2 * (order + 1)
    if len(d) < n_coeffs:
        raise DegenerateGeometryError(f"order {order} needs {n_coeffs} rows, window has {len(d)}")

    batch = assemble_pseudo_linear(d)
    t_mid = 0.5 * (batch.times[0] + batch.times[-1])
    tau = batch.times - t_mid
    A = _design(batch.rows, tau, order)
    coeffs, _, rank, _ = np.linalg.lstsq(A, batch.y, rcond=None)
    if rank < n_coeffs:
        raise DegenerateGeometryError(f"pseudo-linear design has rank {rank} < {n_coeffs}")
    return PolyFit(order=order, coeffs=coeffs.reshape(2, order + 1), times=batch.times, t_mid=t_mid)


def poly_predict(fit: PolyFit, t) -> np.ndarray:
    """Fitted position at t; shape (2,) for scalar t, else (M, 2)."""
    tau = np.atleast_1d(np.asarray(t, dtype=float)) - fit.t_mid
    basis = np.vander(tau, fit.order + 1, increasing=True)
    out = basis @ fit.coeffs.T
    return out[0] if np.ndim(t) == 0 else out


def placement_pose(mu: np.ndarray, bearing: np.ndarray, r0: float, heading: float) -> AuvState:
    """Pose r0 behind mu along bearing, facing the target, at rest."""
    bearing = np.asarray(bearing, dtype=float)
    position = np.asarray(mu, dtype=float) - r0 * bearing
    target_angle = np.arctan2(bearing[1], bearing[0])
    psi = heading + np.angle(np.exp(1j * (target_angle - heading)))
    return AuvState(eta=[position[0], position[1], psi], nu=np.zeros(3))


def motion_policy(
        mode: MotionMode,
        state: AuvState,
        rng: np.random.Generator,
        params: AuvParams,
        mu: Optional[np.ndarray] = None,
        bearing: Optional[np.ndarray] = None,
        r0: float = 1.0,
) -> Union[Wrench, AuvState]:
    """
    Non-planning behaviours.

    static returns a zero wrench, random a wrench uniform within the limits (held
    for the interval), direct_placement the placed pose for the next sample.
    """
    if mode is MotionMode.STATIC:
        return Wrench()
    if mode is MotionMode.RANDOM:
        return Wrench.from_array(rng.uniform(params.lower, params.upper))
    if mode is MotionMode.DIRECT_PLACEMENT:
        if mu is None or bearing is None:
            raise ValueError("direct placement needs a target estimate and a desired bearing")
        return placement_pose(mu, bearing, r0, state.eta[2])
    raise ValueError(f"motion_policy does not handle mode {mode.value}")
