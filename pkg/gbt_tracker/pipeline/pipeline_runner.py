import logging
import os
from typing import Dict, List, Tuple

from ..display.run_display import emit_plots
from ..managers import RecordManager, echo_config
from ..models import RunSummary, ScenarioConfig, StepRecord
from .episode import run_episode

logger = logging.getLogger(__name__)


def run_pipeline(config: ScenarioConfig, out_dir: str, progress: bool = True) -> Tuple[RunSummary, Dict[str, List[str]]]:
    """
    Runs one scenario end to end and persists everything it produced.

    Args:
      config (ScenarioConfig): Validated scenario.
      out_dir (str): Run directory; created if missing.
      progress (bool): Show a per-step progress bar.

    Returns:
      (summary, paths) where paths maps "config", "records", "summary", "plots" to written files.
    """
    os.makedirs(out_dir, exist_ok=True)

    # Step 1: Echo the resolved config with its hash.
    paths: Dict[str, List[str]] = {"config": [echo_config(config, out_dir)]}

    # Step 2: Simulate.
    records, summary = run_episode(config, progress=progress)

    # Step 3: Write the step log and the summary.
    manager = RecordManager(out_dir, config.output.format)
    paths["records"] = [manager.write_records(records)]
    paths["summary"] = [manager.write_summary(summary)]

    # Step 4: Figures; failures leave the log-only output.
    paths["plots"] = _plots(records, config, out_dir) if config.output.plots else []

    logger.info(f"[Pipeline] Run complete in {out_dir}")
    return summary, paths


def _plots(records: List[StepRecord], config: ScenarioConfig, out_dir: str) -> List[str]:
    return emit_plots(records, out_dir, config.output.snapshot_times, config.output.log_scale)
