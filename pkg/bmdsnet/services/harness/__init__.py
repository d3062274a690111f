"""
Experiment Harness

Two-stage training, scenario evaluation and the multi-run studies.
"""

from .seeding import derive_seed, member_seeds
from .scenarios import apply_scenario, parse_scenarios
from .datasets import DataSplits, phantom_spec, ensure_dataset, load_splits
from .evaluation import (
    CasePrediction, EvaluationResult, ReliabilityRow, UncertaintyRow,
    predict_volume, model_predictor, ensemble_predictor, predict_cases,
    score_predictions, reliability_rows, uncertainty_rows,
    run_evaluation, evaluate, mean_dice,
)
from .training import TrainResult, make_batch, load_model, train_stage1, finetune_stage2
from .ledger import record_run, record_checkpoint, list_runs, dump_ledger
from .experiments import (
    SweepRow, CalibrationRow, AblationRow, RobustnessSummary, RobustnessResult,
    checkpoint_file, run_keyed, sensitivity_sweep, compare_methods, ensemble_eval,
    run_ablation, robustness,
)
from .tables import (
    write_reliability, write_uncertainty, write_sweep, write_calibration,
    write_ablation, write_robustness_summary,
)

__all__ = [
    "derive_seed",
    "member_seeds",
    "apply_scenario",
    "parse_scenarios",
    "DataSplits",
    "phantom_spec",
    "ensure_dataset",
    "load_splits",
    "CasePrediction",
    "EvaluationResult",
    "ReliabilityRow",
    "UncertaintyRow",
    "predict_volume",
    "model_predictor",
    "ensemble_predictor",
    "predict_cases",
    "score_predictions",
    "reliability_rows",
    "uncertainty_rows",
    "run_evaluation",
    "evaluate",
    "mean_dice",
    "TrainResult",
    "make_batch",
    "load_model",
    "train_stage1",
    "finetune_stage2",
    "record_run",
    "record_checkpoint",
    "list_runs",
    "dump_ledger",
    "SweepRow",
    "CalibrationRow",
    "AblationRow",
    "RobustnessSummary",
    "RobustnessResult",
    "checkpoint_file",
    "run_keyed",
    "sensitivity_sweep",
    "compare_methods",
    "ensemble_eval",
    "run_ablation",
    "robustness",
    "write_reliability",
    "write_uncertainty",
    "write_sweep",
    "write_calibration",
    "write_ablation",
    "write_robustness_summary",
]
