"""
Synthetic Data

Phantom generation, preprocessing and the on-disk dataset layout.
"""

from .phantom import PhantomSpec, Sample, generate, generate_one, ellipsoid_mask
from .preprocessing import (
    MODALITY_NAMES, modality_name, znorm, normalize_sample,
    AugmentDraw, draw_augmentation, apply_augmentation, augment, crop,
)
from .dataset import (
    MANIFEST_NAME, SPLITS, split_counts, assign_splits,
    write_dataset, read_manifest, load_sample, load_split,
)

__all__ = [
    "PhantomSpec",
    "Sample",
    "generate",
    "generate_one",
    "ellipsoid_mask",
    "MODALITY_NAMES",
    "modality_name",
    "znorm",
    "normalize_sample",
    "AugmentDraw",
    "draw_augmentation",
    "apply_augmentation",
    "augment",
    "crop",
    "MANIFEST_NAME",
    "SPLITS",
    "split_counts",
    "assign_splits",
    "write_dataset",
    "read_manifest",
    "load_sample",
    "load_split",
]
