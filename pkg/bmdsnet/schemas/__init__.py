"""Pydantic contracts for configuration, scenarios and metric reports."""

from bmdsnet.schemas.experiment import (
    DataSection,
    ModelSection,
    Stage1Section,
    LossWeights,
    Stage2Section,
    EvalSection,
    ExperimentConfig,
)
from bmdsnet.schemas.scenario import Scenario, ScenarioKind, MODALITY_LABELS
from bmdsnet.schemas.metrics import MetricReport, REGIONS, ALL_REGIONS, REGION_ORDER

__all__ = [
    "DataSection",
    "ModelSection",
    "Stage1Section",
    "LossWeights",
    "Stage2Section",
    "EvalSection",
    "ExperimentConfig",
    "Scenario",
    "ScenarioKind",
    "MODALITY_LABELS",
    "MetricReport",
    "REGIONS",
    "ALL_REGIONS",
    "REGION_ORDER",
]
