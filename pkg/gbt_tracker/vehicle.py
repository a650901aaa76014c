"""
Fossen 3-DOF AUV model.

Rigid-body dynamics with added mass, Coriolis/centripetal and linear plus
quadratic damping (M nu_dot + C(nu) nu + D(nu) nu = tau), fixed-step RK4
integration, and the differential-flatness maps from the flat output
z = [x_A, y_A, psi] and its derivatives to the state and the wrench.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, List, Tuple

import numpy as np

from .exceptions import IntegrationDivergedError
from .sections import ConfigSection

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuvParams(ConfigSection):
    """
    Vehicle parameters. Defaults are the identified Falcon model.
    Added-mass coefficients are negative by convention, so the derived
    inertias m - X_du etc. exceed the rigid-body values.
    """
    m: float = 116.0
    I_z: float = 13.1
    X_du: float = -167.6
    Y_dv: float = -477.2
    N_dr: float = -15.9
    X_u: float = 26.9
    Y_v: float = 35.8
    N_r: float = 3.5
    D_u: float = 241.3
    D_v: float = 503.8
    D_r: float = 76.9
    tau_max: Tuple[float, float, float] = (5000.0, 5000.0, 1500.0)
    tau_min: Tuple[float, float, float] = (-5000.0, -5000.0, -1500.0)

    @property
    def M_x(self) -> float:
        return self.m - self.X_du

    @property
    def M_y(self) -> float:
        return self.m - self.Y_dv

    @property
    def M_psi(self) -> float:
        return self.I_z - self.N_dr

    @property
    def inertia(self) -> np.ndarray:
        """Diagonal of M."""
        return np.array([self.M_x, self.M_y, self.M_psi])

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.tau_max, dtype=float)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.tau_min, dtype=float)

    def scaled(self, scale: float) -> "AuvParams":
        """Same vehicle with both wrench limits multiplied by scale."""
        return replace(
            self,
            tau_max=tuple(float(v) * scale for v in self.tau_max),
            tau_min=tuple(float(v) * scale for v in self.tau_min),
        )

    def validate(self) -> List[str]:
        """Validate parameters and return any errors."""
        errors = []
        values = [getattr(self, name) for name in
                  ("m", "I_z", "X_du", "Y_dv", "N_dr", "X_u", "Y_v", "N_r", "D_u", "D_v", "D_r")]
        if not np.all(np.isfinite(values)):
            errors.append("vehicle.params: all coefficients must be finite")
        if self.m <= 0:
            errors.append(f"vehicle.params.m: mass must be positive, got {self.m}")
        if self.I_z <= 0:
            errors.append(f"vehicle.params.I_z: yaw inertia must be positive, got {self.I_z}")
        for name, value in (("M_x", self.M_x), ("M_y", self.M_y), ("M_psi", self.M_psi)):
            if value <= 0:
                errors.append(f"vehicle.params: derived inertia {name} must be positive, got {value:.3f}")
        for name in ("X_u", "Y_v", "N_r", "D_u", "D_v", "D_r"):
            if getattr(self, name) < 0:
                errors.append(f"vehicle.params.{name}: damping must be nonnegative")
        for i, axis in enumerate(("F_u", "F_v", "F_r")):
            if not self.tau_min[i] < 0 < self.tau_max[i]:
                errors.append(f"vehicle.params.tau_min/tau_max: {axis} limits must straddle zero")
        return errors


@dataclass(frozen=True)
class AuvState:
    """Pose eta = [x_A, y_A, psi] (psi unwrapped) and body velocities nu = [u, v, r]."""
    eta: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float).reshape(3))
        object.__setattr__(self, "nu", np.asarray(self.nu, dtype=float).reshape(3))

    @property
    def position(self) -> np.ndarray:
        return self.eta[:2]

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.eta, self.nu])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "AuvState":
        return cls(eta=x[:3], nu=x[3:])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.eta)) and np.all(np.isfinite(self.nu)))


@dataclass(frozen=True)
class Wrench:
    """Body-frame control forces F_u, F_v (N) and yaw moment F_r (N·m)."""
    F_u: float = 0.0
    F_v: float = 0.0
    F_r: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.F_u, self.F_v, self.F_r], dtype=float)

    @classmethod
    def from_array(cls, tau: np.ndarray) -> "Wrench":
        return cls(float(tau[0]), float(tau[1]), float(tau[2]))


def rotation_matrix(psi: float) -> np.ndarray:
    """Body-to-earth transformation J(psi), a rotation about z."""
    c, s = np.cos(psi), np.sin(psi)
    return np.array([
        [c, -s, 0.0],
        [s, c, 0.0],
        [0.0, 0.0, 1.0],
    ])


def coriolis_matrix(nu: np.ndarray, params: AuvParams) -> np.ndarray:
    """C(nu) with added mass; skew-symmetric."""
    u, v, _ = nu
    return np.array([
        [0.0, 0.0, -params.M_y * v],
        [0.0, 0.0, params.M_x * u],
        [params.M_y * v, -params.M_x * u, 0.0],
    ])


def damping_matrix(nu: np.ndarray, params: AuvParams) -> np.ndarray:
    """D(nu) = diag(X_u + D_u|u|, Y_v + D_v|v|, N_r + D_r|r|)."""
    u, v, r = nu
    return np.diag([
        params.X_u + params.D_u * abs(u),
        params.Y_v + params.D_v * abs(v),
        params.N_r + params.D_r * abs(r),
    ])


def _hydro_forces(nu: np.ndarray, params: AuvParams) -> np.ndarray:
    """C(nu) nu + D(nu) nu, for nu of shape (3,) or (3, M)."""
    u, v, r = nu
    coriolis = np.array([
        -params.M_y * v * r,
        params.M_x * u * r,
        (params.M_y - params.M_x) * u * v,
    ])
    drag = np.array([
        (params.X_u + params.D_u * np.abs(u)) * u,
        (params.Y_v + params.D_v * np.abs(v)) * v,
        (params.N_r + params.D_r * np.abs(r)) * r,
    ])
    return coriolis + drag


def _derivative(x: np.ndarray, tau: np.ndarray, params: AuvParams) -> np.ndarray:
    psi = x[2]
    nu = x[3:]
    eta_dot = rotation_matrix(psi) @ nu
    nu_dot = (tau - _hydro_forces(nu, params)) / params.inertia
    return np.concatenate([eta_dot, nu_dot])


def dynamics_derivative(x: AuvState, tau: Wrench, params: AuvParams) -> np.ndarray:
    """
    State time-derivative [J(eta) nu ; M^-1 (tau - C(nu) nu - D(nu) nu)].

    Drag opposes motion (M nu_dot + C nu + D nu = tau).
    """
    return _derivative(x.as_vector(), tau.as_array(), params)


def integrate(
        x0: AuvState,
        tau_fn: Callable[[float], Wrench],
        t0: float,
        t1: float,
        dt: float,
        params: AuvParams,
) -> AuvState:
    """
    Classical RK4 over [t0, t1] with fixed step dt; the final step is shortened
    to land exactly on t1.

    Args:
      x0: Initial state.
      tau_fn: Wrench as a function of absolute time.
      t0, t1: Integration interval, t1 > t0.
      dt: Step size, dt > 0.
      params: Vehicle parameters.

    Returns:
      AuvState at t1.
    """
    if not t1 > t0:
        raise ValueError(f"integrate needs t1 > t0, got t0={t0}, t1={t1}")
    if not dt > 0:
        raise ValueError(f"integrate needs dt > 0, got {dt}")

    x = x0.as_vector()
    t = t0
    # Step count is fixed up front so the grid is identical across calls
    n_full = int(np.floor((t1 - t0) / dt + 1e-9))
    steps = [dt] * n_full
    remainder = (t1 - t0) - n_full * dt
    if remainder > 1e-12:
        steps.append(remainder)

    def f(time, state):
        return _derivative(state, tau_fn(time).as_array(), params)

    for h in steps:
        k1 = f(t, x)
        k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = f(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        if not np.all(np.isfinite(x)):
            logger.error(f"[Vehicle] Integration diverged at t={t:.4f}")
            raise IntegrationDivergedError(f"non-finite state at t={t:.6f}")

    return AuvState.from_vector(x)


def flat_to_state(z: np.ndarray, zdot: np.ndarray) -> AuvState:
    """eta = z, nu = J(z_psi)^T z_dot."""
    z = np.asarray(z, dtype=float)
    zdot = np.asarray(zdot, dtype=float)
    return AuvState(eta=z, nu=rotation_matrix(z[2]).T @ zdot)


def flat_wrench_profile(z: np.ndarray, zdot: np.ndarray, zddot: np.ndarray, params: AuvParams) -> np.ndarray:
    """
    Inverse dynamics along a flat trajectory.

    tau = M (J^T z_ddot + J_dot^T z_dot) + C(nu) nu + D(nu) nu with nu = J^T z_dot.
    Inputs have shape (3,) or (3, M); the result has the same shape.
    """
    c, s = np.cos(z[2]), np.sin(z[2])
    xd, yd, psid = zdot
    xdd, ydd, psidd = zddot

    u = c * xd + s * yd
    v = -s * xd + c * yd
    r = psid
    nu = np.array([u, v, r])

    nu_dot = np.array([
        c * xdd + s * ydd + r * v,
        -s * xdd + c * ydd - r * u,
        psidd,
    ])
    inertia = params.inertia.reshape((3,) + (1,) * (nu_dot.ndim - 1))
    return inertia * nu_dot + _hydro_forces(nu, params)


def flat_to_wrench(z: np.ndarray, zdot: np.ndarray, zddot: np.ndarray, params: AuvParams) -> Wrench:
    """Wrench realising the flat output derivatives exactly."""
    tau = flat_wrench_profile(
        np.asarray(z, dtype=float), np.asarray(zdot, dtype=float), np.asarray(zddot, dtype=float), params
    )
    return Wrench.from_array(tau)
