"""
Run metrics derived from the step log.
"""

import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..exceptions import GbtError
from ..models import CSV_COLUMNS, RunSummary, ScenarioConfig, StepRecord

logger = logging.getLogger(__name__)


def average_error(estimates: np.ndarray, truth: np.ndarray) -> float:
    """Mean Euclidean error over the horizon; a single instant gives the instantaneous error."""
    diff = np.asarray(estimates, dtype=float).reshape(-1, 2) - np.asarray(truth, dtype=float).reshape(-1, 2)
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def convergence_time(times: np.ndarray, errors: np.ndarray, threshold: float) -> Optional[float]:
    """Earliest time after which the error stays at or below threshold; None if it never settles."""
    above = np.flatnonzero(np.asarray(errors) > threshold)
    if len(above) == 0:
        return float(times[0]) if len(times) else None
    if above[-1] == len(errors) - 1:
        return None
    return float(times[above[-1] + 1])


def limit_ratio(frame: pd.DataFrame, limits: np.ndarray) -> float:
    """Largest applied |tau| over the run as a fraction of the per-axis limit."""
    if frame.empty:
        return 0.0
    applied = frame[["tau_u_max_abs", "tau_v_max_abs", "tau_r_max_abs"]].to_numpy()
    return float(np.max(applied / limits))


def summarize(records: Sequence[StepRecord], config: ScenarioConfig,
              failure: Optional[GbtError] = None) -> RunSummary:
    """Summary metrics over the configured steady window."""
    summary = RunSummary(
        seed=config.seed,
        config_hash=config.config_hash(),
        mode=config.mode.value,
        estimator=config.estimator.value,
        target=config.scenario.kind.value,
        ability_scale=config.ability_scale,
        n_steps=len(records),
    )
    if failure is not None:
        summary.failed = True
        summary.failure_code = failure.code
        summary.failure_message = str(failure)

    if not records:
        return summary

    frame = pd.DataFrame([r.to_row() for r in records], columns=CSV_COLUMNS)
    start, end = config.output.steady_window
    steady = frame[(frame["t"] >= start - 1e-9) & (frame["t"] <= end + 1e-9)]
    if steady.empty:
        steady = frame.iloc[len(frame) // 2:]

    summary.mean_error = float(steady["avg_err"].mean())
    summary.max_error = float(steady["avg_err"].max())
    summary.final_error = float(frame["avg_err"].iloc[-1])
    summary.convergence_time = convergence_time(frame["t"].to_numpy(), frame["avg_err"].to_numpy(),
                                                config.output.convergence_threshold)

    covered = [r.covered for r in records if r.covered is not None]
    if covered:
        summary.coverage_fraction = float(np.mean(covered))

    finite = frame[np.isfinite(frame["ccbm"])]
    if len(finite):
        summary.mean_ccbm = float(finite["ccbm"].mean())
    if len(finite) > 2 and finite["ccbm"].std() > 0 and finite["avg_err"].std() > 0:
        summary.error_ccbm_corr = float(finite["avg_err"].corr(finite["ccbm"]))

    params = config.vehicle_params
    limits = np.maximum(np.abs(params.upper), np.abs(params.lower))
    summary.max_limit_ratio = limit_ratio(frame, limits)
    return summary
