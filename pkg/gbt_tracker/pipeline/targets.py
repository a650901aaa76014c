"""
Target motion models.

case1: constant velocity along the diagonal.
case2: 8-shaped orbit through the origin starting at [3, 0].
case3: unicycle with unit speed and turn rate 0.5 sin^2(3t), integrated by RK4.
gp_sample: one draw from the per-coordinate SE prior, held by cubic interpolation.
custom: cubic interpolation through user waypoints.
"""

import logging
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from ..gp_tracker import KernelParams, kernel_matrix
from ..models import ScenarioSection, TargetKind

logger = logging.getLogger(__name__)

CASE2_RATE = 0.125 * np.pi


def _case1(t: float) -> np.ndarray:
    return np.array([-1.0 + 0.5 * t, -1.0 + 0.5 * t])


def _case2(t: float) -> np.ndarray:
    a = CASE2_RATE * t
    denom = (1.0 + np.sin(a) ** 2) ** 2
    return np.array([3.0 * np.cos(a) / denom, 3.0 * np.cos(a) * np.sin(a) / denom])


class UnicycleTrack:
    """
    Fixed-step RK4 solution of x' = v cos psi, y' = v sin psi, psi' = 0.5 sin^2(3t).
    Off-grid times take one partial RK4 step from the preceding grid state.
    """

    def __init__(self, start, heading: float, speed: float, dt: float):
        self.speed = speed
        self.dt = dt
        self._states = [np.array([start[0], start[1], heading], dtype=float)]

    def _f(self, t: float, s: np.ndarray) -> np.ndarray:
        return np.array([self.speed * np.cos(s[2]), self.speed * np.sin(s[2]), 0.5 * np.sin(3.0 * t) ** 2])

    def _rk4(self, t: float, s: np.ndarray, h: float) -> np.ndarray:
        k1 = self._f(t, s)
        k2 = self._f(t + 0.5 * h, s + 0.5 * h * k1)
        k3 = self._f(t + 0.5 * h, s + 0.5 * h * k2)
        k4 = self._f(t + h, s + h * k3)
        return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def _extend(self, index: int) -> None:
        while len(self._states) <= index:
            i = len(self._states) - 1
            self._states.append(self._rk4(i * self.dt, self._states[-1], self.dt))

    def state(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError(f"target time must be nonnegative, got {t}")
        index = int(np.floor(t / self.dt + 1e-9))
        self._extend(index)
        h = t - index * self.dt
        if h <= 1e-12:
            return self._states[index].copy()
        return self._rk4(index * self.dt, self._states[index], h)

    def __call__(self, t: float) -> np.ndarray:
        return self.state(t)[:2]


class TargetModel:
    """Target position P_T(t) for t >= 0."""

    def __init__(self, kind: TargetKind, position_fn: Callable[[float], np.ndarray],
                 params: Optional[Dict[str, Any]] = None):
        self.kind = kind
        self._position_fn = position_fn
        self.params = params or {}

    def position(self, t):
        """(2,) for scalar t, (M, 2) for an array of times."""
        if np.ndim(t) == 0:
            return np.asarray(self._position_fn(float(t)), dtype=float)
        return np.array([self._position_fn(float(ti)) for ti in np.asarray(t, dtype=float)]).reshape(-1, 2)


def target_position(model: TargetModel, t):
    return model.position(t)


def _splined(times: np.ndarray, xy: np.ndarray) -> Callable[[float], np.ndarray]:
    spline = CubicSpline(times, xy, axis=0, bc_type="natural")
    return lambda t: spline(t)


def sample_gp_target(length_scale: float, signal_var: float, times: np.ndarray,
                     rng: np.random.Generator) -> TargetModel:
    """Draw both coordinates from the zero-mean SE prior on times and hold them with a cubic spline."""
    times = np.asarray(times, dtype=float)
    K = kernel_matrix(times, times, KernelParams(length_scale=length_scale, signal_var=signal_var))
    xy = rng.multivariate_normal(np.zeros(len(times)), K, size=2, method="eigh").T
    return TargetModel(TargetKind.GP_SAMPLE, _splined(times, xy),
                       {"length_scale": length_scale, "signal_var": signal_var})


def build_target(section: ScenarioSection, horizon_end: float, T: float,
                 rng: Optional[np.random.Generator] = None) -> TargetModel:
    """
    Target for a scenario.

    Args:
      section: Scenario settings.
      horizon_end: Latest time the run will query.
      T: Sampling period, the grid for GP draws.
      rng: Needed for gp_sample targets only.
    """
    kind = section.kind
    if kind is TargetKind.CASE1:
        return TargetModel(kind, _case1)
    if kind is TargetKind.CASE2:
        return TargetModel(kind, _case2)
    if kind is TargetKind.CASE3:
        track = UnicycleTrack(section.case3_start, section.case3_heading, section.case3_speed, section.dt_fine)
        return TargetModel(kind, track, {"heading": section.case3_heading, "speed": section.case3_speed})
    if kind is TargetKind.GP_SAMPLE:
        if rng is None:
            raise ValueError("gp_sample targets need an rng")
        n_grid = int(np.ceil(horizon_end / T)) + 2
        return sample_gp_target(section.gp_length_scale, section.gp_signal_var, np.arange(n_grid) * T, rng)
    if kind is TargetKind.CUSTOM:
        waypoints = np.asarray(section.waypoints, dtype=float)
        return TargetModel(kind, _splined(waypoints[:, 0], waypoints[:, 1:3]), {"waypoints": len(waypoints)})
    raise ValueError(f"unknown target kind {kind}")
