"""Segmented and unsegmented data-driven predictive control.

The package builds multi-step output predictors directly from recorded
input/output data (block-Hankel matrices of a single persistently exciting
experiment), wraps them in a lexicographic receding-horizon controller, and
ships a benchmark harness for a two-mass oscillator and a multi-zone thermal
scenario.
"""

from .bench import (
    EconomicResult,
    EconomicSpec,
    SweepResult,
    SweepSpec,
    TimingResult,
    default_setpoint_profile,
    export_results,
    improvement_stats,
    run_economic,
    run_heatmaps,
    run_sweep,
    run_timing,
    run_trace,
)
from .controller import (
    ComfortBand,
    Controller,
    ControllerConfig,
    ControllerState,
    EconomicConfig,
    NotWarmError,
    RunLog,
    assemble_economic,
    assemble_tracking,
    run_closed_loop,
)
from .hankel import (
    ExcitationReport,
    HankelBlocks,
    TrajectoryLog,
    build_hankel,
    check_excitation,
    partition_training,
    required_training_length,
)
from .plant import PlantModel, generate_training, simulate_step, two_mass_factory
from .predictor import (
    PredictorModel,
    StackedPredictor,
    causality_heatmap,
    fit_predictor,
    predict,
    predict_stacked,
    stack_segmented,
)

__version__ = "0.1.0"

__all__ = [
    "TrajectoryLog",
    "HankelBlocks",
    "ExcitationReport",
    "build_hankel",
    "check_excitation",
    "partition_training",
    "required_training_length",
    "PredictorModel",
    "StackedPredictor",
    "fit_predictor",
    "predict",
    "stack_segmented",
    "predict_stacked",
    "causality_heatmap",
    "PlantModel",
    "two_mass_factory",
    "simulate_step",
    "generate_training",
    "ControllerConfig",
    "EconomicConfig",
    "ControllerState",
    "Controller",
    "ComfortBand",
    "NotWarmError",
    "RunLog",
    "assemble_tracking",
    "assemble_economic",
    "run_closed_loop",
    "SweepSpec",
    "SweepResult",
    "TimingResult",
    "EconomicSpec",
    "EconomicResult",
    "run_sweep",
    "run_trace",
    "run_timing",
    "run_economic",
    "run_heatmaps",
    "improvement_stats",
    "default_setpoint_profile",
    "export_results",
    "__version__",
]
