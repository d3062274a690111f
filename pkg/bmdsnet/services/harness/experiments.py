"""
Experiments

Multi-run studies built on the two training stages and the evaluator:

- alpha sensitivity sweep (zero-init plus fixed alpha inits, several seeds)
- calibration comparison: deterministic vs deep ensemble vs Bayesian head
- wiring ablation over the four MMCF/DDS variants
- robustness under missing modalities and input noise, several seeds

Runs are independent and keyed by run id. They may execute on a thread pool;
results and ledger rows are collected in run-id order, so outputs do not depend
on scheduling.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar, Union
import logging

import numpy as np

from bmdsnet.errors import ConfigError
from bmdsnet.schemas.experiment import ExperimentConfig
from bmdsnet.schemas.metrics import ALL_REGIONS, MetricReport
from bmdsnet.schemas.scenario import FULL, Scenario, ScenarioKind
from bmdsnet.services.network import ABLATION_VARIANTS, count_parameters
from .datasets import DataSplits
from .evaluation import (
    Predictor, ensemble_predictor, evaluate, model_predictor, predict_cases, score_predictions,
)
from .ledger import record_checkpoint
from .seeding import member_seeds
from .training import TrainResult, finetune_stage2, train_stage1

logger = logging.getLogger(__name__)

R = TypeVar("R")

OutDir = Union[str, Path, None]


def checkpoint_file(out_dir: Union[str, Path], run_id: str) -> Path:
    """`sweep/alpha=0.5/seed=1` -> `<out>/checkpoints/sweep_alpha-0.5_seed-1.ckpt`"""
    name = run_id.replace("/", "_").replace("=", "-").replace(" ", "-")
    return Path(out_dir) / "checkpoints" / f"{name}.ckpt"


def run_keyed(jobs: Dict[str, Callable[[], R]], workers: int = 1) -> Dict[str, R]:
    """Run independent jobs, returning results in run-id order."""
    keys = sorted(jobs)
    if workers <= 1:
        return {key: jobs[key]() for key in keys}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {key: pool.submit(jobs[key]) for key in keys}
        return {key: futures[key].result() for key in keys}


def _train_job(cfg: ExperimentConfig, splits: DataSplits, out_dir: OutDir,
               run_id: str) -> Callable[[], TrainResult]:
    def job() -> TrainResult:
        path = checkpoint_file(out_dir, run_id) if out_dir is not None else None
        return train_stage1(cfg, splits.train, splits.val, path)
    return job


def _train_many(configs: Dict[str, ExperimentConfig], splits: DataSplits, out_dir: OutDir,
                kind: str, workers: int) -> Dict[str, TrainResult]:
    results = run_keyed({rid: _train_job(c, splits, out_dir, rid) for rid, c in configs.items()}, workers)
    if out_dir is not None:
        for rid, result in results.items():
            record_checkpoint(out_dir, rid, result.checkpoint, checkpoint_file(out_dir, rid),
                              kind=kind, alpha_init=configs[rid].model.alpha_init)
    return results


def _mean_std(values: Sequence[Optional[float]]) -> Tuple[Optional[float], Optional[float]]:
    defined = [v for v in values if v is not None]
    if not defined:
        return None, None
    arr = np.asarray(defined, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


# === ALPHA SENSITIVITY ===

@dataclass
class SweepRow:
    """Validation Dice of one alpha init across seeds."""
    alpha_init: float
    zero_init: bool
    dice: List[Optional[float]]
    final_alpha: List[Optional[float]]

    @property
    def dice_mean(self) -> Optional[float]:
        return _mean_std(self.dice)[0]

    @property
    def dice_std(self) -> Optional[float]:
        return _mean_std(self.dice)[1]

    @property
    def final_alpha_mean(self) -> Optional[float]:
        return _mean_std(self.final_alpha)[0]


def sensitivity_sweep(cfg: ExperimentConfig, alpha_values: Sequence[float], splits: DataSplits,
                      out_dir: OutDir = None, workers: int = 1) -> List[SweepRow]:
    """
    One Stage-1 run per (alpha init, seed), alpha still learnable; the first
    row is the zero-init run.

    Raises:
        ConfigError: if alpha_values is empty or MMCF is not wired
    """
    if not alpha_values:
        raise ConfigError("the alpha sweep needs at least one value", key="eval.alpha_values")
    if not cfg.model.use_mmcf:
        raise ConfigError("the alpha sweep needs MMCF wired", key="model.use_mmcf")

    seeds = member_seeds(cfg.seed, cfg.eval.num_seeds)
    inits = [0.0] + [float(a) for a in alpha_values]
    configs = {
        f"sweep/alpha={a:g}/seed={s}": cfg.with_model(alpha_init=a).with_seed(s)
        for a in inits for s in seeds
    }
    results = _train_many(configs, splits, out_dir, "sweep", workers)

    rows = []
    for i, a in enumerate(inits):
        runs = [results[f"sweep/alpha={a:g}/seed={s}"] for s in seeds]
        rows.append(SweepRow(
            alpha_init=a,
            zero_init=i == 0,
            dice=[r.best_val_dice for r in runs],
            final_alpha=[r.net.alpha for r in runs],
        ))
        logger.info(f"alpha_init={a:g}: dice={rows[-1].dice_mean} final_alpha={rows[-1].final_alpha_mean}")
    return rows


# === CALIBRATION COMPARISON ===

@dataclass
class CalibrationRow:
    test_set: str
    method: str
    dice: float
    ece: float
    nll: float
    unc_auc: Optional[float]


def noisy_scenario(std: float) -> Scenario:
    return Scenario(kind=ScenarioKind.GAUSSIAN_NOISE, std=std)


def compare_methods(methods: Sequence[Tuple[str, Predictor]], splits: DataSplits, cfg: ExperimentConfig,
                    threads: int = 1) -> Dict[str, List[CalibrationRow]]:
    """Dice/ECE/NLL/AUC of each method on the clean and the noisy test set."""
    options = cfg.eval
    test_sets = [("clean", FULL), (f"noisy_{options.noisy_test_std:g}", noisy_scenario(options.noisy_test_std))]
    table: Dict[str, List[CalibrationRow]] = {}
    for test_set, scenario in test_sets:
        rows = []
        for name, predictor in methods:
            predictions = predict_cases(predictor, splits.test, scenario, cfg.seed, threads)
            overall = score_predictions(predictions, scenario.label, options.threshold, options.ece_bins)[-1]
            rows.append(CalibrationRow(test_set, name, overall.dice_mean, overall.ece, overall.nll, overall.unc_auc))
            logger.info(f"{test_set} {name}: dice={overall.dice_mean:.4f} ece={overall.ece:.5f} nll={overall.nll:.5f}")
        table[test_set] = rows
    return table


def ensemble_eval(cfg: ExperimentConfig, splits: DataSplits, n_models: Optional[int] = None,
                  out_dir: OutDir = None, workers: int = 1, threads: int = 1) -> Dict[str, List[CalibrationRow]]:
    """
    Train n_models Stage-1 members (seeds cfg.seed, cfg.seed+1, ...), fine-tune
    a Bayesian head on member 0, and compare the three predictors.

    Raises:
        ConfigError: if n_models < 2
    """
    n = cfg.eval.ensemble_size if n_models is None else n_models
    if n < 2:
        raise ConfigError(f"a deep ensemble needs at least 2 members, got {n}", key="eval.ensemble_size")

    configs = {f"ensemble/member={k}": cfg.with_seed(s) for k, s in enumerate(member_seeds(cfg.seed, n))}
    members = _train_many(configs, splits, out_dir, "ensemble", workers)
    ordered = [members[f"ensemble/member={k}"] for k in range(n)]

    bayes_path = checkpoint_file(out_dir, "ensemble/bayes") if out_dir is not None else None
    bayes = finetune_stage2(cfg, ordered[0].checkpoint, splits.train, splits.val, bayes_path)
    if out_dir is not None:
        record_checkpoint(out_dir, "ensemble/bayes", bayes.checkpoint, bayes_path)

    methods = [
        ("Deterministic", model_predictor(ordered[0].net)),
        (f"Deep Ensemble (N={n})", ensemble_predictor([m.net for m in ordered])),
        (f"Bayesian (T={cfg.stage2.T_infer})", model_predictor(bayes.net, cfg.stage2.T_infer)),
    ]
    return compare_methods(methods, splits, cfg, threads)


# === ABLATION ===

@dataclass
class AblationRow:
    variant: str
    use_mmcf: bool
    use_dds: bool
    params: int
    dice_mean: float
    dice_std: float
    hd95_mean: Optional[float]
    final_alpha: Optional[float]
    final_gamma: Optional[float]


def run_ablation(cfg: ExperimentConfig, splits: DataSplits, out_dir: OutDir = None,
                 workers: int = 1, threads: int = 1) -> List[AblationRow]:
    """Train and test all four wiring variants with the same seed."""
    configs = {
        f"ablation/{v.name}": cfg.with_model(use_mmcf=v.use_mmcf, use_dds=v.use_dds)
        for v in ABLATION_VARIANTS
    }
    results = _train_many(configs, splits, out_dir, "ablation", workers)

    rows = []
    for variant in ABLATION_VARIANTS:
        result = results[f"ablation/{variant.name}"]
        overall = evaluate(result.net, splits.test, [FULL], cfg.eval, seed=cfg.seed, threads=threads).reports[-1]
        rows.append(AblationRow(
            variant=variant.name,
            use_mmcf=variant.use_mmcf,
            use_dds=variant.use_dds,
            params=count_parameters(result.net),
            dice_mean=overall.dice_mean,
            dice_std=overall.dice_std,
            hd95_mean=overall.hd95_mean,
            final_alpha=result.net.alpha,
            final_gamma=result.net.gamma,
        ))
    return rows


# === ROBUSTNESS ===

@dataclass
class RobustnessSummary:
    scenario: str
    dice_mean: Optional[float]
    dice_std: Optional[float]
    n_seeds: int


@dataclass
class RobustnessResult:
    reports: List[MetricReport] = field(default_factory=list)
    summary: List[RobustnessSummary] = field(default_factory=list)


def robustness(cfg: ExperimentConfig, splits: DataSplits, scenarios: Sequence[Scenario],
               out_dir: OutDir = None, workers: int = 1, threads: int = 1) -> RobustnessResult:
    """
    Evaluate every scenario for `eval.num_seeds` independently trained models.

    Report scenario labels carry an `@seed<k>` suffix; the summary holds the
    across-seed mean and std of the overall Dice per scenario.
    """
    seeds = member_seeds(cfg.seed, cfg.eval.num_seeds)
    configs = {f"robustness/seed={s}": cfg.with_seed(s) for s in seeds}
    results = _train_many(configs, splits, out_dir, "robustness", workers)

    out = RobustnessResult()
    per_scenario: Dict[str, List[float]] = {sc.label: [] for sc in scenarios}
    for s in seeds:
        net = results[f"robustness/seed={s}"].net
        evaluation = evaluate(net, splits.test, scenarios, cfg.eval, seed=cfg.seed, threads=threads)
        for report in evaluation.reports:
            out.reports.append(report.model_copy(update={"scenario": f"{report.scenario}@seed{s}"}))
            if report.region == ALL_REGIONS:
                per_scenario[report.scenario].append(report.dice_mean)

    for sc in scenarios:
        mean, std = _mean_std(per_scenario[sc.label])
        out.summary.append(RobustnessSummary(sc.label, mean, std, len(per_scenario[sc.label])))
        logger.info(f"{sc.label}: dice={mean} +- {std} over {len(per_scenario[sc.label])} seeds")
    return out
