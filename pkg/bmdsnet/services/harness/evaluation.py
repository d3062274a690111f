"""
Evaluation

Predicts every case under each scenario and aggregates per-region metrics into
MetricReport rows (WT, TC, ET, plus ALL pooled over regions).

Deterministic models give zero variance maps, so their uncertainty AUC is left
empty. Bayesian heads use T_infer Monte-Carlo samples per case.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.special import expit

from bmdsnet.errors import DimensionError, DomainError
from bmdsnet.schemas.experiment import EvalSection
from bmdsnet.schemas.metrics import ALL_REGIONS, REGIONS, MetricReport
from bmdsnet.schemas.scenario import FULL, Scenario
from bmdsnet.services.datagen import Sample
from bmdsnet.services.metrics import (
    binary_confidence, dice_score, ece, hd95, nll, reliability_table, uncertainty_error_auc,
)
from bmdsnet.services.network import BMDSNet, mc_predict, predictive_moments
from bmdsnet.services.tensor import as_tensor
from .scenarios import apply_scenario
from .seeding import MC_SAMPLING, derive_seed

logger = logging.getLogger(__name__)

# (volume [C,S,S,S], case seed) -> (probability, variance), each [3,S,S,S]
Predictor = Callable[[np.ndarray, int], Tuple[np.ndarray, np.ndarray]]


@dataclass
class CasePrediction:
    """Per-voxel outputs for one case."""
    case_id: str
    prob: np.ndarray
    variance: np.ndarray
    label: np.ndarray


@dataclass
class ReliabilityRow:
    scenario: str
    lower: float
    upper: float
    count: int
    accuracy: float
    confidence: float


@dataclass
class UncertaintyRow:
    """Mean predictive variance on correctly and wrongly classified voxels."""
    scenario: str
    region: str
    var_correct: Optional[float]
    var_error: Optional[float]
    ratio: Optional[float]


@dataclass
class EvaluationResult:
    reports: List[MetricReport] = field(default_factory=list)
    reliability: List[ReliabilityRow] = field(default_factory=list)
    uncertainty: List[UncertaintyRow] = field(default_factory=list)


# === PREDICTORS ===

def predict_volume(net: BMDSNet, volume: np.ndarray, T_infer: int = 20, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Probabilities and variance for one [C,S,S,S] volume."""
    x = as_tensor(np.asarray(volume, dtype=np.float64)[None])
    if net.is_bayesian:
        pred = mc_predict(net, x, T_infer, seed)
        return pred.mean_prob[0], pred.variance[0]
    prob = expit(net(x).logits_main.data[0])
    return prob, np.zeros_like(prob)


def model_predictor(net: BMDSNet, T_infer: int = 20) -> Predictor:
    def predict(volume: np.ndarray, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        return predict_volume(net, volume, T_infer, seed)
    return predict


def ensemble_predictor(nets: Sequence[BMDSNet]) -> Predictor:
    """Mean of member probabilities; variance across members."""
    def predict(volume: np.ndarray, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        probs = [predict_volume(net, volume, seed=seed)[0] for net in nets]
        return predictive_moments(probs)
    return predict


def predict_cases(predictor: Predictor, samples: Sequence[Sample], scenario: Scenario = FULL,
                  seed: int = 0, threads: int = 1) -> List[CasePrediction]:
    """
    Run the predictor on every sample under one scenario.

    Case i uses noise stream (seed, i) and sampling seed (seed, MC, i), so the
    output is independent of the thread count.
    """
    def run(i: int) -> CasePrediction:
        sample = samples[i]
        volume = apply_scenario(sample.volume, scenario, seed=derive_seed(seed, i))
        prob, variance = predictor(volume, derive_seed(seed, MC_SAMPLING, i))
        return CasePrediction(sample.id, prob, variance, sample.label)

    if threads <= 1:
        return [run(i) for i in range(len(samples))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(len(samples))))


# === SCORING ===

def _mean_std(values: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _safe_auc(variance: np.ndarray, error_mask: np.ndarray) -> Optional[float]:
    if not np.any(variance != variance.flat[0]):
        return None
    try:
        return uncertainty_error_auc(variance, error_mask)
    except DomainError as e:
        logger.warning(f"Skipping uncertainty AUC: {e}")
        return None


def _report(scenario: str, region: str, dices: Sequence[float], distances: Sequence[Optional[float]],
            prob: np.ndarray, label: np.ndarray, variance: np.ndarray,
            threshold: float, bins: int) -> MetricReport:
    defined = [d for d in distances if d is not None]
    dice_mean, dice_std = _mean_std(dices)
    hd_mean, hd_std = _mean_std(defined)
    errors = (prob >= threshold) != label.astype(bool)
    return MetricReport(
        scenario=scenario,
        region=region,
        dice_mean=dice_mean,
        dice_std=dice_std,
        hd95_mean=hd_mean,
        hd95_std=hd_std,
        ece=ece(prob, label, bins, threshold),
        nll=nll(prob, label),
        unc_auc=_safe_auc(variance, errors),
        n_cases=len(dices),
        hd95_missing=len(distances) - len(defined),
    )


def score_predictions(predictions: Sequence[CasePrediction], scenario: str,
                      threshold: float = 0.5, bins: int = 10) -> List[MetricReport]:
    """
    One MetricReport per region plus the ALL row.

    Dice and HD95 are per case (mean and population std across cases); ECE,
    NLL and AUC pool voxels over cases. The ALL row averages the three region
    Dice values per case and pools every region's voxels.

    Raises:
        DimensionError: if there are no cases
    """
    if not predictions:
        raise DimensionError("evaluation needs at least one case")
    prob = np.stack([p.prob for p in predictions])
    label = np.stack([p.label for p in predictions]).astype(np.float64)
    variance = np.stack([p.variance for p in predictions])
    masks = prob >= threshold

    n = len(predictions)
    dice = np.zeros((n, len(REGIONS)))
    distances: List[List[Optional[float]]] = []
    rows: List[MetricReport] = []
    for r, region in enumerate(REGIONS):
        dice[:, r] = [dice_score(masks[i, r], label[i, r]) for i in range(n)]
        region_distances = [hd95(masks[i, r], label[i, r]) for i in range(n)]
        distances.append(region_distances)
        rows.append(_report(
            scenario, region, list(dice[:, r]), region_distances,
            prob[:, r], label[:, r], variance[:, r], threshold, bins,
        ))

    rows.append(_report(
        scenario, ALL_REGIONS, list(dice.mean(axis=1)), [d for ds in distances for d in ds],
        prob, label, variance, threshold, bins,
    ))
    return rows


def reliability_rows(predictions: Sequence[CasePrediction], scenario: str,
                     threshold: float = 0.5, bins: int = 10) -> List[ReliabilityRow]:
    prob = np.stack([p.prob for p in predictions])
    label = np.stack([p.label for p in predictions])
    confidence, correct = binary_confidence(prob, label, threshold)
    return [
        ReliabilityRow(scenario, b.lower, b.upper, b.count, b.accuracy, b.confidence)
        for b in reliability_table(confidence, correct, bins)
    ]


def uncertainty_rows(predictions: Sequence[CasePrediction], scenario: str,
                     threshold: float = 0.5) -> List[UncertaintyRow]:
    prob = np.stack([p.prob for p in predictions])
    label = np.stack([p.label for p in predictions]).astype(bool)
    variance = np.stack([p.variance for p in predictions])
    errors = (prob >= threshold) != label

    rows = []
    selections = [(region, (slice(None), r)) for r, region in enumerate(REGIONS)]
    selections.append((ALL_REGIONS, (slice(None),)))
    for region, sel in selections:
        var, err = variance[sel], errors[sel]
        var_correct = float(var[~err].mean()) if np.any(~err) else None
        var_error = float(var[err].mean()) if np.any(err) else None
        ratio = (var_error / var_correct
                 if var_error is not None and var_correct not in (None, 0.0) else None)
        rows.append(UncertaintyRow(scenario, region, var_correct, var_error, ratio))
    return rows


# === ENTRY POINTS ===

def run_evaluation(predictor: Predictor, samples: Sequence[Sample], scenarios: Sequence[Scenario],
                   options: Optional[EvalSection] = None, seed: int = 0, threads: int = 1) -> EvaluationResult:
    """Metric, reliability and uncertainty rows for every scenario."""
    options = options or EvalSection()
    if not samples:
        raise DimensionError("evaluation needs a nonempty test split")
    result = EvaluationResult()
    for scenario in scenarios:
        predictions = predict_cases(predictor, samples, scenario, seed, threads)
        reports = score_predictions(predictions, scenario.label, options.threshold, options.ece_bins)
        result.reports.extend(reports)
        result.reliability.extend(reliability_rows(predictions, scenario.label, options.threshold, options.ece_bins))
        result.uncertainty.extend(uncertainty_rows(predictions, scenario.label, options.threshold))
        overall = reports[-1]
        logger.info(
            f"Scenario {scenario.label}: dice={overall.dice_mean:.4f} ece={overall.ece:.4f} "
            f"nll={overall.nll:.4f} ({overall.n_cases} cases)"
        )
    return result


def evaluate(net: BMDSNet, samples: Sequence[Sample], scenarios: Sequence[Scenario],
             options: Optional[EvalSection] = None, T_infer: int = 20, seed: int = 0,
             threads: int = 1) -> EvaluationResult:
    """Evaluate a deterministic or Bayesian-head model."""
    return run_evaluation(model_predictor(net, T_infer), samples, scenarios, options, seed, threads)


def mean_dice(predictor: Predictor, samples: Sequence[Sample], threshold: float = 0.5, seed: int = 0) -> float:
    """Mean over cases of the mean foreground Dice over regions (full scenario)."""
    if not samples:
        raise DimensionError("mean_dice needs at least one case")
    scores = []
    for p in predict_cases(predictor, samples, FULL, seed):
        masks = p.prob >= threshold
        scores.append(np.mean([dice_score(masks[r], p.label[r]) for r in range(len(REGIONS))]))
    return float(np.mean(scores))
