"""
Data models for the bearing-only tracking simulator.
Scenario configuration sections, per-step log records and run summaries.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, ClassVar, Dict, List, Optional

import numpy as np

from .gp_tracker import KernelKind, KernelParams
from .planner import PlannerConfig
from .sections import ConfigSection
from .vehicle import AuvParams


class TargetKind(Enum):
    """Target motion models."""
    CASE1 = "case1"
    CASE2 = "case2"
    CASE3 = "case3"
    GP_SAMPLE = "gp_sample"
    CUSTOM = "custom"


class MotionMode(Enum):
    """How the sensing AUV moves."""
    GBT = "gbt"
    STATIC = "static"
    RANDOM = "random"
    DIRECT_PLACEMENT = "direct_placement"


class Estimator(Enum):
    """Estimator whose prediction is scored in the log."""
    GP = "gp"
    PLKF = "plkf"
    PR = "pr"


class OutputFormat(Enum):
    CSV = "csv"
    JSON = "json"


class SweepKind(Enum):
    MOTION_MODES = "motion_modes"
    ABILITY = "ability"
    BASELINES = "baselines"


@dataclass(frozen=True)
class ScenarioSection(ConfigSection):
    """
    Target definition.
    waypoints are [t, x, y] triples for the custom kind.
    """
    kind: TargetKind = TargetKind.CASE1
    dt_fine: float = 1e-3
    case3_start: tuple = (-2.0, -2.0)
    case3_heading: float = 0.0
    case3_speed: float = 1.0
    gp_length_scale: float = 2.0
    gp_signal_var: float = 1.0
    waypoints: list = field(default_factory=list)

    _enums: ClassVar[Dict[str, type]] = {"kind": TargetKind}

    def validate(self) -> List[str]:
        errors = []
        if self.dt_fine <= 0:
            errors.append(f"scenario.dt_fine: must be positive, got {self.dt_fine}")
        if self.gp_length_scale <= 0 or self.gp_signal_var <= 0:
            errors.append("scenario.gp_length_scale/gp_signal_var: must be positive")
        if self.case3_speed < 0:
            errors.append(f"scenario.case3_speed: must be nonnegative, got {self.case3_speed}")
        if self.kind is TargetKind.CUSTOM:
            if len(self.waypoints) < 2:
                errors.append("scenario.waypoints: the custom target needs at least 2 [t, x, y] waypoints")
            elif any(len(w) != 3 for w in self.waypoints):
                errors.append("scenario.waypoints: every waypoint must be [t, x, y]")
            else:
                times = [w[0] for w in self.waypoints]
                if any(b <= a for a, b in zip(times, times[1:])):
                    errors.append("scenario.waypoints: times must increase strictly")
        return errors


@dataclass(frozen=True)
class VehicleConfig(ConfigSection):
    """AUV parameters, initial state and the RK4 step."""
    params: AuvParams = field(default_factory=AuvParams)
    initial_eta: tuple = (1.5, 0.0, float(np.pi / 2.0))
    initial_nu: tuple = (0.0, 0.0, 0.0)
    dt: float = 1e-3

    _nested: ClassVar[Dict[str, type]] = {"params": AuvParams}

    def validate(self) -> List[str]:
        errors = self.params.validate()
        if self.dt <= 0:
            errors.append(f"vehicle.dt: must be positive, got {self.dt}")
        return errors


@dataclass(frozen=True)
class SensorConfig(ConfigSection):
    """Sampling period T (s), noise std sigma_eps (m) and window capacity N_c."""
    T: float = 0.1
    sigma_eps: float = 0.001
    N_c: int = 20

    def validate(self) -> List[str]:
        errors = []
        if self.T <= 0:
            errors.append(f"sensor.T: must be positive, got {self.T}")
        if self.sigma_eps <= 0:
            errors.append(f"sensor.sigma_eps: must be positive, got {self.sigma_eps}")
        if self.N_c < 1:
            errors.append(f"sensor.N_c: must be at least 1, got {self.N_c}")
        return errors


@dataclass(frozen=True)
class TrackerConfig(ConfigSection):
    """Kernel choice, initial hyperparameters, their box bounds and the bound confidence."""
    kernel: KernelKind = KernelKind.SE
    length_scale: float = 1.0
    signal_var: float = 1.0
    l_min: float = 0.05
    l_max: float = 50.0
    sf_min: float = 1e-4
    sf_max: float = 1e4
    delta: float = 0.05
    tune_every_k: int = 1
    max_iter: int = 50
    gtol: float = 1e-6

    _enums: ClassVar[Dict[str, type]] = {"kernel": KernelKind}

    def initial_params(self, noise_var: float) -> KernelParams:
        return KernelParams(self.length_scale, self.signal_var, noise_var, self.kernel)

    def validate(self) -> List[str]:
        errors = []
        if not 0 < self.l_min <= self.l_max:
            errors.append(f"tracker.l_min/l_max: need 0 < l_min <= l_max, got {self.l_min}, {self.l_max}")
        if not 0 < self.sf_min <= self.sf_max:
            errors.append(f"tracker.sf_min/sf_max: need 0 < sf_min <= sf_max, got {self.sf_min}, {self.sf_max}")
        if self.length_scale <= 0 or self.signal_var <= 0:
            errors.append("tracker.length_scale/signal_var: must be positive")
        if not 0 < self.delta <= 1:
            errors.append(f"tracker.delta: must lie in (0, 1], got {self.delta}")
        if self.tune_every_k < 1:
            errors.append(f"tracker.tune_every_k: must be at least 1, got {self.tune_every_k}")
        if self.max_iter < 1 or self.gtol <= 0:
            errors.append("tracker.max_iter/gtol: must be positive")
        return errors


@dataclass(frozen=True)
class BaselineConfig(ConfigSection):
    """PLKF and polynomial-regression settings."""
    q_accel: float = 0.1
    poly_order: int = 4
    plkf_pos_var: float = 10.0
    plkf_vel_var: float = 4.0

    def validate(self) -> List[str]:
        errors = []
        if self.q_accel < 0:
            errors.append(f"baselines.q_accel: must be nonnegative, got {self.q_accel}")
        if self.poly_order < 0:
            errors.append(f"baselines.poly_order: must be nonnegative, got {self.poly_order}")
        if self.plkf_pos_var <= 0 or self.plkf_vel_var <= 0:
            errors.append("baselines.plkf_pos_var/plkf_vel_var: must be positive")
        return errors


@dataclass(frozen=True)
class OutputConfig(ConfigSection):
    """Log format, plot options and the summary windows."""
    format: OutputFormat = OutputFormat.CSV
    plots: bool = True
    log_scale: bool = False
    snapshot_times: list = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0])
    wall_time: bool = False
    steady_window: tuple = (10.0, 20.0)
    convergence_threshold: float = 0.3

    _enums: ClassVar[Dict[str, type]] = {"format": OutputFormat}

    def validate(self) -> List[str]:
        errors = []
        if self.steady_window[0] > self.steady_window[1]:
            errors.append("output.steady_window: start must not exceed end")
        if self.convergence_threshold <= 0:
            errors.append("output.convergence_threshold: must be positive")
        if any(not isinstance(t, (int, float)) or t < 0 for t in self.snapshot_times):
            errors.append("output.snapshot_times: must be nonnegative numbers")
        return errors


@dataclass(frozen=True)
class ScenarioConfig(ConfigSection):
    """
    Complete episode configuration. All randomness derives from seed.
    ability_scale multiplies both wrench limits.
    """
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    vehicle: VehicleConfig = field(default_factory=VehicleConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    mode: MotionMode = MotionMode.GBT
    ability_scale: float = 1.0
    estimator: Estimator = Estimator.GP
    duration: float = 20.0
    seed: int = 0

    _nested: ClassVar[Dict[str, type]] = {
        "scenario": ScenarioSection,
        "vehicle": VehicleConfig,
        "sensor": SensorConfig,
        "tracker": TrackerConfig,
        "planner": PlannerConfig,
        "baselines": BaselineConfig,
        "output": OutputConfig,
    }
    _enums: ClassVar[Dict[str, type]] = {"mode": MotionMode, "estimator": Estimator}

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.sensor.T))

    @property
    def vehicle_params(self) -> AuvParams:
        """Vehicle with the ability scale applied to its limits."""
        return self.vehicle.params.scaled(self.ability_scale)

    def validate(self) -> List[str]:
        """Validate every section and return any errors."""
        errors = []
        for name in self._nested:
            errors.extend(getattr(self, name).validate())
        if self.ability_scale <= 0:
            errors.append(f"ability_scale: must be positive, got {self.ability_scale}")
        if self.duration <= 0:
            errors.append(f"duration: must be positive, got {self.duration}")
        if self.seed < 0:
            errors.append(f"seed: must be nonnegative, got {self.seed}")
        if abs(self.planner.T - self.sensor.T) > 1e-12:
            errors.append(f"planner.T: must equal sensor.T ({self.planner.T} != {self.sensor.T})")
        return errors

    def config_hash(self) -> str:
        """First 12 hex chars of the sha256 of the canonical JSON form."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


CSV_COLUMNS = [
    "k", "t", "target_x", "target_y", "auv_x", "auv_y", "auv_psi", "u", "v", "r",
    "tau_u_max_abs", "tau_v_max_abs", "tau_r_max_abs", "bearing_x", "bearing_y",
    "avg_err", "bound", "ccbm", "cost", "penalty", "iters", "ms",
]


@dataclass
class StepRecord:
    """
    One control step. The CSV columns come first; the horizon arrays and the
    coverage flag feed plots and summaries only.
    """
    k: int
    t: float
    target_x: float
    target_y: float
    auv_x: float
    auv_y: float
    auv_psi: float
    u: float
    v: float
    r: float
    tau_u_max_abs: float
    tau_v_max_abs: float
    tau_r_max_abs: float
    bearing_x: float
    bearing_y: float
    avg_err: float
    bound: float
    ccbm: float
    cost: float
    penalty: float
    iters: int
    ms: float = 0.0

    covered: Optional[bool] = None
    horizon_times: Optional[np.ndarray] = None
    horizon_means: Optional[np.ndarray] = None
    horizon_truth: Optional[np.ndarray] = None

    def to_row(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in CSV_COLUMNS}


@dataclass
class RunSummary:
    """Per-run metrics derived from the step records."""
    seed: int
    config_hash: str
    mode: str
    estimator: str
    target: str
    ability_scale: float
    n_steps: int
    mean_error: float = float("nan")
    max_error: float = float("nan")
    final_error: float = float("nan")
    convergence_time: Optional[float] = None
    coverage_fraction: float = float("nan")
    mean_ccbm: float = float("nan")
    error_ccbm_corr: float = float("nan")
    max_limit_ratio: float = float("nan")
    failed: bool = False
    failure_code: str = ""
    failure_message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunSummary":
        return cls(**data)
