"""CSV writers for the harness outputs."""

from pathlib import Path
from typing import Dict, List, Sequence, Union

from bmdsnet.formats.report import write_table
from .evaluation import ReliabilityRow, UncertaintyRow
from .experiments import AblationRow, CalibrationRow, RobustnessSummary, SweepRow

PathLike = Union[str, Path]

RELIABILITY_HEADER = ["scenario", "bin_lower", "bin_upper", "count", "accuracy", "confidence"]
UNCERTAINTY_HEADER = ["scenario", "region", "var_correct", "var_error", "ratio"]
CALIBRATION_HEADER = ["method", "dice", "ece", "nll", "unc_auc"]
ABLATION_HEADER = [
    "variant", "use_mmcf", "use_dds", "params", "dice_mean", "dice_std",
    "hd95_mean", "final_alpha", "final_gamma",
]
ROBUSTNESS_SUMMARY_HEADER = ["scenario", "dice_mean", "dice_std", "n_seeds"]


def sweep_header(num_seeds: int) -> List[str]:
    return (["alpha_init", "zero_init", "dice_mean", "dice_std"]
            + [f"dice_seed{k}" for k in range(num_seeds)]
            + ["final_alpha_mean"])


def write_reliability(rows: Sequence[ReliabilityRow], path: PathLike) -> None:
    write_table(path, RELIABILITY_HEADER,
                [[r.scenario, r.lower, r.upper, r.count, r.accuracy, r.confidence] for r in rows])


def write_uncertainty(rows: Sequence[UncertaintyRow], path: PathLike) -> None:
    write_table(path, UNCERTAINTY_HEADER,
                [[r.scenario, r.region, r.var_correct, r.var_error, r.ratio] for r in rows])


def write_sweep(rows: Sequence[SweepRow], path: PathLike) -> None:
    num_seeds = len(rows[0].dice) if rows else 0
    write_table(path, sweep_header(num_seeds), [
        [r.alpha_init, r.zero_init, r.dice_mean, r.dice_std, *r.dice, r.final_alpha_mean]
        for r in rows
    ])


def write_calibration(table: Dict[str, Sequence[CalibrationRow]], out_dir: PathLike) -> List[Path]:
    """calibration.csv for the clean test set, calibration_<set>.csv for the others."""
    written = []
    for test_set, rows in table.items():
        name = "calibration.csv" if test_set == "clean" else f"calibration_{test_set.split('_')[0]}.csv"
        path = Path(out_dir) / name
        write_table(path, CALIBRATION_HEADER, [[r.method, r.dice, r.ece, r.nll, r.unc_auc] for r in rows])
        written.append(path)
    return written


def write_ablation(rows: Sequence[AblationRow], path: PathLike) -> None:
    write_table(path, ABLATION_HEADER, [
        [r.variant, r.use_mmcf, r.use_dds, r.params, r.dice_mean, r.dice_std,
         r.hd95_mean, r.final_alpha, r.final_gamma]
        for r in rows
    ])


def write_robustness_summary(rows: Sequence[RobustnessSummary], path: PathLike) -> None:
    write_table(path, ROBUSTNESS_SUMMARY_HEADER,
                [[r.scenario, r.dice_mean, r.dice_std, r.n_seeds] for r in rows])
