"""
Persistence managers: scenario configs in, step records and summaries out.
"""

import json
import logging
import math
import os
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .exceptions import ConfigValidationError
from .models import CSV_COLUMNS, OutputFormat, RunSummary, ScenarioConfig, StepRecord

logger = logging.getLogger(__name__)

RESOLVED_CONFIG = "config.resolved.json"
FLOAT_FORMAT = "%.9g"


class DataManager:
    """Base class for managing data persistence."""

    def __init__(self, storage_dir: str, filename: str):
        self.storage_dir = storage_dir
        self.filename = filename
        self.filepath = os.path.join(storage_dir, filename)
        os.makedirs(storage_dir, exist_ok=True)

    def _load_data(self) -> Dict[str, Any]:
        """Load data from file."""
        try:
            if os.path.exists(self.filepath):
                with open(self.filepath, "r") as f:
                    return json.load(f)
            return {}
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"[Writer] Error loading data from {self.filepath}: {e}")
            return {}

    def _save_data(self, data: Dict[str, Any]):
        """Save data to file."""
        try:
            with open(self.filepath, "w") as f:
                json.dump(data, f, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            logger.error(f"[Writer] Error saving data to {self.filepath}: {e}")
            raise OSError(f"cannot write {self.filepath}: {e}") from e


class ConfigManager(DataManager):
    """Echoes the resolved scenario config (with its hash) into a run directory."""

    def __init__(self, storage_dir: str):
        super().__init__(storage_dir, RESOLVED_CONFIG)

    def echo(self, config: ScenarioConfig) -> str:
        self._save_data({"config": config.to_dict(), "config_hash": config.config_hash()})
        logger.info(f"[Config] Resolved config {config.config_hash()} written to {self.filepath}")
        return self.filepath

    def load_echo(self) -> Optional[ScenarioConfig]:
        data = self._load_data()
        if not data:
            return None
        return config_from_document(data, self.filepath)


class RecordManager(DataManager):
    """Writes step records and run summaries for one run."""

    def __init__(self, storage_dir: str, fmt: OutputFormat = OutputFormat.CSV):
        super().__init__(storage_dir, f"records.{fmt.value}")
        self.fmt = fmt

    def write_records(self, records: Sequence[StepRecord]) -> str:
        frame = records_frame(records)
        try:
            if self.fmt is OutputFormat.CSV:
                frame.to_csv(self.filepath, index=False, float_format=FLOAT_FORMAT,
                             na_rep="nan", lineterminator="\n")
            else:
                self._save_data({"columns": CSV_COLUMNS, "records": [_json_row(row) for row in frame.to_dict("records")]})
        except OSError as e:
            raise OSError(f"cannot write records to {self.filepath}: {e}") from e
        logger.info(f"[Writer] Wrote {len(frame)} records to {self.filepath}")
        return self.filepath

    def write_summary(self, summary: RunSummary) -> str:
        path = os.path.join(self.storage_dir, "summary.json")
        with open(path, "w") as f:
            json.dump(_json_row(summary.to_dict()), f, indent=2, sort_keys=True)
            f.write("\n")
        return path


def _json_value(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if not math.isfinite(number):
            return str(number)
        return float(FLOAT_FORMAT % number)
    return value


def _json_row(row: Dict[str, Any]) -> Dict[str, Any]:
    return {key: _json_value(value) for key, value in row.items()}


def records_frame(records: Sequence[StepRecord]) -> pd.DataFrame:
    """Step records as a frame with the fixed column order; empty runs give a header-only frame."""
    frame = pd.DataFrame([r.to_row() for r in records], columns=CSV_COLUMNS)
    if len(frame):
        frame = frame.astype({"k": "int64", "iters": "int64"})
    return frame


def config_from_document(data: Dict[str, Any], source: str = "config") -> ScenarioConfig:
    """
    Build and validate a ScenarioConfig from parsed JSON. Accepts a bare config
    object or a resolved echo ({"config": ..., "config_hash": ...}).
    """
    if isinstance(data, dict) and set(data) == {"config", "config_hash"}:
        config = config_from_document(data["config"], source)
        if config.config_hash() != data["config_hash"]:
            logger.warning(f"[Config] Hash mismatch in {source}: recorded {data['config_hash']}, "
                           f"resolved {config.config_hash()}")
        return config

    config = ScenarioConfig.from_dict(data)
    errors = config.validate()
    if errors:
        raise ConfigValidationError(errors)
    return config


def load_config(path: str) -> ScenarioConfig:
    """Parse a JSON scenario file, fill defaults and validate it."""
    if not os.path.exists(path):
        raise ConfigValidationError([f"{path}: file not found"])
    try:
        with open(path, "r") as f:
            text = f.read()
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ConfigValidationError([f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"])
    except OSError as e:
        raise ConfigValidationError([f"{path}: {e}"])

    config = config_from_document(data, path)
    logger.info(f"[Config] Loaded {path} (hash {config.config_hash()})")
    return config


def echo_config(config: ScenarioConfig, out_dir: str) -> str:
    return ConfigManager(out_dir).echo(config)


def write_records(records: Sequence[StepRecord], fmt: OutputFormat, out_dir: str) -> List[str]:
    """Write the step log in the requested format; returns the written paths."""
    return [RecordManager(out_dir, fmt).write_records(records)]


def write_table(frame: pd.DataFrame, out_dir: str, name: str) -> str:
    """Sweep/compare/check tables share the record float format."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    logger.info(f"[Writer] Wrote {path}")
    return path
