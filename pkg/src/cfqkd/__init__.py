"""Monte Carlo simulator for counterfactual quantum key distribution.

The package models a single-photon interferometric link in which the
key bit is carried by events where the photon never traversed the
public channel: per-slot optical routing, detector imperfections,
sifting and monitoring statistics, an analytic error budget, and the
interferometer phase stabilisation loop.
"""

from .adversary import AdversaryKind, AdversarySpec, monitoring_anomaly
from .analysis import (
    ErrorBudget,
    RunReport,
    SweepResult,
    build_report,
    error_budget,
    report_from_result,
    sweep,
)
from .config import (
    ScenarioConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    dump_config,
    load_config,
    resolve_config_path,
)
from .devices import (
    CHANNEL_ORDER,
    DetectorChannel,
    DetectorSpec,
    DetectorState,
    SwitchSpec,
    gate_detector,
)
from .errors import ConfigError, ParameterError, SimulationError
from .feedback import (
    LockResult,
    PhaseState,
    PiControllerSpec,
    PiControllerState,
    drift_step,
    pi_step,
    reference_intensity,
    run_lock,
)
from .optics import (
    ArmLosses,
    InterferenceSpec,
    PerPhotonProbs,
    Polarization,
    SplitterSpec,
    attacked_diff_probs,
    db_to_transmittance,
    diff_choice_probs,
    outcome_distribution,
    same_choice_probs,
    sample_outcome_counts,
)
from .protocol import (
    SCENARIO_DETECTOR_EFFICIENCY,
    BlockTally,
    Classification,
    ExperimentResult,
    FeedbackMode,
    FeedbackSettings,
    Scenario,
    SiftResult,
    SystemParams,
    TrialRecord,
    classify_event,
    run_experiment,
    sift,
    simulate_slot,
)

__version__ = "0.1.0"

__all__ = [
    "AdversaryKind",
    "AdversarySpec",
    "ArmLosses",
    "BlockTally",
    "CHANNEL_ORDER",
    "Classification",
    "ConfigError",
    "DetectorChannel",
    "DetectorSpec",
    "DetectorState",
    "ErrorBudget",
    "ExperimentResult",
    "FeedbackMode",
    "FeedbackSettings",
    "InterferenceSpec",
    "LockResult",
    "ParameterError",
    "PerPhotonProbs",
    "PhaseState",
    "PiControllerSpec",
    "PiControllerState",
    "Polarization",
    "RunReport",
    "SCENARIO_DETECTOR_EFFICIENCY",
    "Scenario",
    "ScenarioConfig",
    "SiftResult",
    "SimulationError",
    "SplitterSpec",
    "SweepResult",
    "SystemParams",
    "TrialRecord",
    "apply_overrides",
    "attacked_diff_probs",
    "build_report",
    "classify_event",
    "config_from_dict",
    "config_to_dict",
    "db_to_transmittance",
    "diff_choice_probs",
    "drift_step",
    "dump_config",
    "error_budget",
    "gate_detector",
    "load_config",
    "monitoring_anomaly",
    "outcome_distribution",
    "pi_step",
    "reference_intensity",
    "report_from_result",
    "resolve_config_path",
    "run_experiment",
    "run_lock",
    "same_choice_probs",
    "sample_outcome_counts",
    "sift",
    "simulate_slot",
    "sweep",
    "__version__",
]
