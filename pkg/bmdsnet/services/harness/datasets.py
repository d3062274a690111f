"""Dataset access for harness runs."""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Union
import logging

from bmdsnet.schemas.experiment import DataSection, ExperimentConfig
from bmdsnet.services.datagen import MANIFEST_NAME, PhantomSpec, Sample, load_split, write_dataset

logger = logging.getLogger(__name__)


@dataclass
class DataSplits:
    train: List[Sample]
    val: List[Sample]
    test: List[Sample]


def phantom_spec(data: DataSection) -> PhantomSpec:
    return PhantomSpec(
        size=data.size,
        num_modalities=data.num_modalities,
        noise_std=data.noise_std,
        informative_channel=data.informative_channel,
        seed=data.seed,
    )


def ensure_dataset(cfg: ExperimentConfig, data_dir: Union[str, Path]) -> Path:
    """Generate the dataset into data_dir unless a manifest is already there."""
    data_dir = Path(data_dir)
    if not (data_dir / MANIFEST_NAME).exists():
        logger.info(f"No dataset at {data_dir}; generating {cfg.data.num_samples} phantoms")
        write_dataset(data_dir, phantom_spec(cfg.data), cfg.data.num_samples)
    return data_dir


def load_splits(cfg: ExperimentConfig, data_dir: Union[str, Path]) -> DataSplits:
    data_dir = ensure_dataset(cfg, data_dir)
    channels = cfg.data.num_modalities
    splits = DataSplits(
        train=load_split(data_dir, "train", channels),
        val=load_split(data_dir, "val", channels),
        test=load_split(data_dir, "test", channels),
    )
    logger.info(
        f"Loaded {data_dir}: {len(splits.train)} train, {len(splits.val)} val, {len(splits.test)} test"
    )
    return splits
