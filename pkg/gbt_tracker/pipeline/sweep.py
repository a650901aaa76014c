"""
Parameter sweeps and paired comparisons over shared seeds.

Every cell (variant, seed) is an independent episode written to its own
subdirectory, so cells may run in parallel worker processes.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..managers import RecordManager, echo_config, write_table
from ..models import Estimator, MotionMode, ScenarioConfig, SweepKind
from .episode import run_episode
from .metrics import summarize

logger = logging.getLogger(__name__)

ABILITY_SCALES = (0.1, 0.25, 0.5, 1.0)


def sweep_variants(kind: SweepKind, base: ScenarioConfig) -> List[Tuple[str, ScenarioConfig]]:
    """Labelled configs for one sweep; seeds are applied per cell."""
    if kind is SweepKind.MOTION_MODES:
        return [(mode.value, replace(base, mode=mode)) for mode in MotionMode]
    if kind is SweepKind.ABILITY:
        variants = [(f"scale_{scale:g}", replace(base, mode=MotionMode.GBT, ability_scale=scale))
                    for scale in ABILITY_SCALES]
        variants.append(("direct", replace(base, mode=MotionMode.DIRECT_PLACEMENT)))
        return variants
    if kind is SweepKind.BASELINES:
        return [(est.value, replace(base, mode=MotionMode.GBT, estimator=est)) for est in Estimator]
    raise ValueError(f"unknown sweep kind {kind}")


def worker_count(n_jobs: int) -> int:
    """GBT_THREADS caps the worker processes; default is the CPU count."""
    limit = os.environ.get("GBT_THREADS")
    workers = os.cpu_count() or 1
    if limit:
        try:
            workers = max(1, int(limit))
        except ValueError:
            logger.warning(f"[Sweep] Ignoring GBT_THREADS={limit!r}, not an integer")
    return max(1, min(workers, n_jobs))


def _run_cell(label: str, config: ScenarioConfig, out_dir: Optional[str]) -> Dict:
    records, summary = run_episode(config)
    if out_dir:
        cell_dir = os.path.join(out_dir, label, f"seed_{config.seed}")
        echo_config(config, cell_dir)
        manager = RecordManager(cell_dir, config.output.format)
        manager.write_records(records)
        manager.write_summary(summary)
    row = summary.to_dict()
    row["label"] = label
    return row


def _failed_row(label: str, config: ScenarioConfig, error: BaseException) -> Dict:
    summary = summarize([], config)
    summary.failed = True
    summary.failure_code = getattr(error, "code", type(error).__name__)
    summary.failure_message = str(error)
    row = summary.to_dict()
    row["label"] = label
    return row


def _guarded_cell(label: str, config: ScenarioConfig, out_dir: Optional[str]) -> Dict:
    try:
        return _run_cell(label, config, out_dir)
    except Exception as e:
        logger.error(f"[Sweep] Cell {label} seed {config.seed} raised {type(e).__name__}: {e}")
        return _failed_row(label, config, e)


def run_cells(variants: Sequence[Tuple[str, ScenarioConfig]], seeds: Sequence[int],
              out_dir: Optional[str] = None, progress: bool = True) -> pd.DataFrame:
    """
    Run every (variant, seed) cell and return one summary row per cell.
    A cell that raises, in-process or in a worker, becomes a failed row carrying
    the error code (or exception name) and does not stop the others.
    """
    jobs = [(label, replace(config, seed=int(seed)), out_dir) for label, config in variants for seed in seeds]
    workers = worker_count(len(jobs))
    logger.info(f"[Sweep] Running {len(jobs)} cells on {workers} workers")

    rows = []
    if workers == 1:
        for job in tqdm(jobs, desc="Cells", unit="run", disable=not progress):
            rows.append(_guarded_cell(*job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_guarded_cell, *job): job for job in jobs}
            for future in tqdm(as_completed(futures), total=len(futures), desc="Cells", unit="run",
                               disable=not progress):
                label, config, _ = futures[future]
                try:
                    rows.append(future.result())
                except Exception as e:
                    logger.error(f"[Sweep] Worker for {label} seed {config.seed} died: {e}")
                    rows.append(_failed_row(label, config, e))

    frame = pd.DataFrame(rows)
    order = {label: i for i, (label, _) in enumerate(variants)}
    frame["_order"] = frame["label"].map(order)
    frame = frame.sort_values(["_order", "seed"]).drop(columns="_order").reset_index(drop=True)
    failed = frame[frame["failed"]]
    for _, row in failed.iterrows():
        logger.warning(f"[Sweep] Cell {row['label']} seed {row['seed']} failed: {row['failure_code']}")
    return frame


def paired_table(cells: pd.DataFrame, reference: Optional[str] = None) -> pd.DataFrame:
    """
    Per-label mean and std of the steady-state error plus paired differences
    against the reference label over the seeds both completed.
    """
    labels = list(dict.fromkeys(cells["label"]))
    reference = reference or labels[0]
    ok = cells[~cells["failed"]]
    pivot = ok.pivot_table(index="seed", columns="label", values="mean_error") if len(ok) else pd.DataFrame()

    rows = []
    for label in labels:
        group = cells[cells["label"] == label]
        errors = group.loc[~group["failed"], "mean_error"]
        row = {
            "label": label,
            "runs": len(group),
            "failed": int(group["failed"].sum()),
            "mean_error": float(errors.mean()) if len(errors) else float("nan"),
            "std_error": float(errors.std(ddof=1)) if len(errors) > 1 else float("nan"),
            "mean_coverage": float(group["coverage_fraction"].mean()),
            "mean_diff_vs_ref": float("nan"),
            "wins_vs_ref": 0,
        }
        if label != reference and label in pivot and reference in pivot:
            both = pivot[[label, reference]].dropna()
            if len(both):
                diff = both[label] - both[reference]
                row["mean_diff_vs_ref"] = float(diff.mean())
                row["wins_vs_ref"] = int((diff < 0).sum())
        rows.append(row)
    return pd.DataFrame(rows)


def sweep(kind: SweepKind, base: ScenarioConfig, seeds: Sequence[int], out_dir: Optional[str] = None,
          progress: bool = True) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Run a sweep and return (cell rows, paired summary)."""
    cells = run_cells(sweep_variants(kind, base), seeds, out_dir, progress)
    table = paired_table(cells)
    if out_dir:
        write_table(cells, out_dir, f"sweep_{kind.value}_cells.csv")
        write_table(table, out_dir, f"sweep_{kind.value}_summary.csv")
    return cells, table


def compare(configs: Sequence[Tuple[str, ScenarioConfig]], seeds: Sequence[int], out_dir: Optional[str] = None,
            progress: bool = True) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Paired comparison of two or more configs over shared seeds; the first is the reference."""
    if len(configs) < 2:
        raise ValueError("compare needs at least two configs")
    cells = run_cells(configs, seeds, out_dir, progress)
    table = paired_table(cells, reference=configs[0][0])
    if out_dir:
        write_table(cells, out_dir, "compare_cells.csv")
        write_table(table, out_dir, "compare_summary.csv")
    return cells, table


def default_seeds(base_seed: int, count: int) -> List[int]:
    return list(range(base_seed, base_seed + count))


def monotone_within_noise(means: Sequence[float], stds: Sequence[float]) -> bool:
    """True when each mean is at most the previous one plus the pooled std of the pair."""
    means = np.asarray(means, dtype=float)
    stds = np.nan_to_num(np.asarray(stds, dtype=float))
    for i in range(1, len(means)):
        pooled = np.sqrt(0.5 * (stds[i] ** 2 + stds[i - 1] ** 2))
        if means[i] > means[i - 1] + pooled:
            return False
    return True
