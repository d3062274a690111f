"""
Preprocessing

Per-modality z-score normalization, flip/rot90 augmentation and random
cropping. Volume and label always receive the same spatial transform.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from bmdsnet.errors import DimensionError, DomainError
from .phantom import Sample

MODALITY_NAMES = ("FLAIR", "T1", "T1ce", "T2")


def modality_name(channel: int) -> str:
    if 0 <= channel < len(MODALITY_NAMES):
        return MODALITY_NAMES[channel]
    return f"channel{channel}"


def znorm(volume: np.ndarray) -> np.ndarray:
    """
    Standardize every channel to mean 0 and population std 1.

    Raises:
        DomainError: naming the first channel with zero variance
    """
    volume = np.asarray(volume, dtype=np.float64)
    out = np.empty_like(volume)
    for c in range(volume.shape[0]):
        ch = volume[c]
        std = ch.std()
        if not std > 0:
            raise DomainError(f"Channel {c} ({modality_name(c)}) has zero variance")
        out[c] = (ch - ch.mean()) / std
    return out


def normalize_sample(sample: Sample) -> Sample:
    return Sample(volume=znorm(sample.volume), label=sample.label, id=sample.id)


@dataclass
class AugmentDraw:
    """One augmentation draw: flips per spatial axis, then k quarter-turns in `plane`."""
    flips: Tuple[bool, bool, bool]
    k: int
    plane: Tuple[int, int]

    @property
    def is_identity(self) -> bool:
        return not any(self.flips) and self.k % 4 == 0


def draw_augmentation(seed) -> AugmentDraw:
    rng = np.random.default_rng(seed)
    flips = tuple(bool(f) for f in rng.random(3) < 0.5)
    k = int(rng.integers(0, 4))
    axis = int(rng.integers(0, 3))
    # rotation about `axis` acts in the plane of the other two
    plane = tuple(a for a in range(3) if a != axis)
    return AugmentDraw(flips=flips, k=k, plane=plane)


def apply_augmentation(array: np.ndarray, draw: AugmentDraw) -> np.ndarray:
    """Apply a draw to a [C,S,S,S] array (spatial axes 1..3)."""
    out = array
    for axis, flip in enumerate(draw.flips):
        if flip:
            out = np.flip(out, axis=axis + 1)
    if draw.k % 4:
        out = np.rot90(out, k=draw.k, axes=(draw.plane[0] + 1, draw.plane[1] + 1))
    return np.ascontiguousarray(out)


def augment(sample: Sample, seed) -> Sample:
    """Random flips (p=0.5 per axis) and a random 90-degree rotation."""
    spatial = sample.volume.shape[1:]
    if len(set(spatial)) != 1:
        raise DimensionError(f"augment needs a cubic volume, got spatial shape {spatial}")
    draw = draw_augmentation(seed)
    return Sample(
        volume=apply_augmentation(sample.volume, draw),
        label=apply_augmentation(sample.label, draw),
        id=sample.id,
    )


def crop(sample: Sample, size: int, seed) -> Sample:
    """
    Crop a size^3 block at a uniformly random corner.

    Raises:
        DimensionError: if size exceeds any spatial extent
    """
    spatial = sample.volume.shape[1:]
    if size < 1 or any(size > s for s in spatial):
        raise DimensionError(f"Crop size {size} does not fit spatial shape {spatial}")
    rng = np.random.default_rng(seed)
    corner = [int(rng.integers(0, s - size + 1)) for s in spatial]
    sl = (slice(None),) + tuple(slice(c, c + size) for c in corner)
    return Sample(
        volume=np.ascontiguousarray(sample.volume[sl]),
        label=np.ascontiguousarray(sample.label[sl]),
        id=sample.id,
    )
