"""
Bearing measurements and their pseudo-linear form.

A bearing lambda is projected onto its orthogonal complement
lambda_bar = [[0, sqrt2], [-sqrt2, 0]] lambda, which turns the nonlinear
measurement into y = lambda_bar^T P_A = lambda_bar^T P_T + lambda_bar^T eps.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .exceptions import CoincidentPositionError, EmptyBatchError

logger = logging.getLogger(__name__)

ORTH = np.array([[0.0, np.sqrt(2.0)], [-np.sqrt(2.0), 0.0]])
MIN_RANGE = 1e-9


@dataclass(frozen=True)
class BearingSample:
    """One stored measurement: time, unit bearing and AUV position."""
    t: float
    bearing: np.ndarray
    p_auv: np.ndarray

    def __post_init__(self):
        bearing = np.asarray(self.bearing, dtype=float).reshape(2)
        if abs(np.linalg.norm(bearing) - 1.0) > 1e-12:
            raise ValueError(f"bearing must be a unit vector, got norm {np.linalg.norm(bearing):.15f}")
        object.__setattr__(self, "bearing", bearing)
        object.__setattr__(self, "p_auv", np.asarray(self.p_auv, dtype=float).reshape(2))


class SlidingDataset:
    """
    Bounded window D_{c:k} of the latest samples.
    Holds N = min(k+1, N_c) samples; pushing beyond capacity drops the oldest.
    """

    def __init__(self, capacity: int, period: Optional[float] = None):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.period = period
        self._samples = deque(maxlen=capacity)

    @classmethod
    def from_samples(cls, samples: Iterable[BearingSample], capacity: Optional[int] = None,
                     period: Optional[float] = None) -> "SlidingDataset":
        samples = list(samples)
        dataset = cls(capacity or max(len(samples), 1), period)
        for sample in samples:
            dataset.push(sample)
        return dataset

    def push(self, sample: BearingSample) -> None:
        if self._samples:
            last = self._samples[-1].t
            if sample.t <= last:
                raise ValueError(f"sample times must increase strictly ({sample.t} after {last})")
            if self.period is not None and abs((sample.t - last) - self.period) > 1e-9:
                raise ValueError(f"sample spacing {sample.t - last} differs from period {self.period}")
        self._samples.append(sample)

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self):
        return iter(self._samples)

    @property
    def samples(self) -> Tuple[BearingSample, ...]:
        """Read-only snapshot, oldest first."""
        return tuple(self._samples)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self._samples])

    @property
    def bearings(self) -> np.ndarray:
        return np.array([s.bearing for s in self._samples]).reshape(-1, 2)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.p_auv for s in self._samples]).reshape(-1, 2)


@dataclass(frozen=True)
class PseudoLinearBatch:
    """
    y = G P_T + G eps for the window.
    G is N x 2N block diagonal with rows lambda_bar_i^T; rows keeps those N x 2 rows.
    """
    G: np.ndarray
    y: np.ndarray
    times: np.ndarray
    rows: np.ndarray

    def __len__(self) -> int:
        return len(self.y)


def measure_bearing(p_target: np.ndarray, p_auv: np.ndarray, sigma_eps: float,
                    rng: np.random.Generator) -> np.ndarray:
    """
    Noisy unit bearing (q + eps) / ||q + eps|| with q = p_target - p_auv.
    Noise is a position perturbation, std sigma_eps per axis; exactly two
    normal variates are drawn from rng.
    """
    q = np.asarray(p_target, dtype=float) - np.asarray(p_auv, dtype=float)
    eps = rng.normal(0.0, sigma_eps, size=2)
    noisy = q + eps
    dist = np.linalg.norm(noisy)
    if dist < MIN_RANGE:
        raise CoincidentPositionError(f"AUV and target coincide (range {dist:.3e} m)")
    return noisy / dist


def orth_complement(bearing: np.ndarray) -> np.ndarray:
    """lambda_bar; lambda_bar^T lambda = 0 and lambda_bar^T lambda_bar = 2."""
    return ORTH @ np.asarray(bearing, dtype=float)


def assemble_pseudo_linear(dataset: SlidingDataset) -> PseudoLinearBatch:
    """Stack lambda_bar rows into G and form the pseudo measurements y."""
    n = len(dataset)
    if n == 0:
        raise EmptyBatchError("cannot assemble pseudo-linear rows from an empty window")

    rows = dataset.bearings @ ORTH.T
    G = np.zeros((n, 2 * n))
    for i in range(n):
        G[i, 2 * i:2 * i + 2] = rows[i]
    y = np.einsum("ij,ij->i", rows, dataset.positions)
    return PseudoLinearBatch(G=G, y=y, times=dataset.times, rows=rows)


def cumulative_bearing_matrix(bearings: Sequence[np.ndarray]) -> np.ndarray:
    """P = sum_i (2I - 2 lambda_i lambda_i^T); trace(P) = 2N."""
    lam = np.asarray(bearings, dtype=float).reshape(-1, 2)
    if len(lam) == 0:
        raise ValueError("need at least one bearing")
    return 2.0 * len(lam) * np.eye(2) - 2.0 * lam.T @ lam


def _symmetric_eigenvalues(P: np.ndarray) -> Tuple[float, float]:
    """Closed-form (lambda_max, lambda_min) of a symmetric 2x2 matrix."""
    a, b, c = P[0, 0], 0.5 * (P[0, 1] + P[1, 0]), P[1, 1]
    mean = 0.5 * (a + c)
    radius = np.hypot(0.5 * (a - c), b)
    return mean + radius, mean - radius


def condition_ratio(P: np.ndarray) -> float:
    """sigma_max / sigma_min of a symmetric PSD 2x2 matrix, inf when singular."""
    high, low = _symmetric_eigenvalues(np.asarray(P, dtype=float))
    if high <= 0.0 or low < 1e-12 * high:
        return float("inf")
    return float(high / low)


def ccbm(P: np.ndarray) -> float:
    """log10 condition number of the cumulative bearing matrix; +inf when singular."""
    ratio = condition_ratio(P)
    if not np.isfinite(ratio):
        return float("inf")
    return float(np.log10(ratio))


def window_ccbm(dataset: SlidingDataset) -> float:
    return ccbm(cumulative_bearing_matrix(dataset.bearings))
