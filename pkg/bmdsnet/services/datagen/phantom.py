"""
Phantom Generator

Synthetic multi-modal volumes with three nested ellipsoidal regions, standing
in for whole tumor (WT) ⊇ tumor core (TC) ⊇ enhancing tumor (ET).

The outermost region is visible only in the informative channel, so removing
that channel hides the outer boundary.
"""

from dataclasses import dataclass
from typing import List, Tuple
import logging

import numpy as np
from pydantic import BaseModel, Field, model_validator

from bmdsnet.errors import GenerationError

logger = logging.getLogger(__name__)

MAX_FIT_RETRIES = 100

# Semi-axis bounds per region as fractions of the edge length S.
SEMI_AXIS_BOUNDS: Tuple[Tuple[float, float], ...] = (
    (0.23, 1.0 / 3.0),
    (0.17, 0.21),
    (1.0 / 8.0, 0.15),
)
# Max center offset of an inner ellipsoid from its parent, fraction of S.
CENTER_JITTER = 0.03

# (core, enhancing) intensity per non-informative channel, cycled.
CORE_LEVELS: Tuple[Tuple[float, float], ...] = ((0.8, 0.8), (-0.6, -0.6), (0.3, 1.2))
OUTER_LEVEL = 1.0


class PhantomSpec(BaseModel):
    """Phantom generation parameters."""
    size: int = Field(default=32, ge=4, description="Edge length S of the cubic volume (voxels)")
    num_modalities: int = Field(default=4, ge=1, description="Number of input channels")
    num_regions: int = Field(default=3, ge=1, le=3, description="Number of nested label regions")
    noise_std: float = Field(default=0.2, ge=0.0, description="Std of additive Gaussian noise")
    informative_channel: int = Field(
        default=3, ge=0, description="Channel carrying the outermost-region contrast"
    )
    seed: int = Field(default=0, ge=0, lt=2 ** 64, description="Generation seed")

    @model_validator(mode="after")
    def _check_channel(self) -> "PhantomSpec":
        if self.informative_channel >= self.num_modalities:
            raise ValueError(
                f"informative_channel {self.informative_channel} must be < num_modalities {self.num_modalities}"
            )
        return self


@dataclass
class Sample:
    """One phantom: volume [C_in,S,S,S], binary label [C_out,S,S,S]."""
    volume: np.ndarray
    label: np.ndarray
    id: str


def ellipsoid_mask(size: int, center: np.ndarray, semi_axes: np.ndarray) -> np.ndarray:
    """Boolean mask of voxels whose centers lie inside the axis-aligned ellipsoid."""
    coords = np.arange(size) + 0.5
    gx, gy, gz = np.meshgrid(coords, coords, coords, indexing="ij")
    r = (((gx - center[0]) / semi_axes[0]) ** 2
         + ((gy - center[1]) / semi_axes[1]) ** 2
         + ((gz - center[2]) / semi_axes[2]) ** 2)
    return r <= 1.0


def _draw_regions(spec: PhantomSpec, rng: np.random.Generator) -> List[np.ndarray]:
    """Draw nested masks, retrying until every inner region fits in its parent."""
    s = spec.size
    for attempt in range(MAX_FIT_RETRIES):
        masks: List[np.ndarray] = []
        parent_center = None
        ok = True
        for r in range(spec.num_regions):
            lo, hi = SEMI_AXIS_BOUNDS[r]
            axes = rng.uniform(lo * s, hi * s, size=3)
            if parent_center is None:
                center = np.array([rng.uniform(a, s - a) for a in axes])
            else:
                center = parent_center + rng.uniform(-CENTER_JITTER * s, CENTER_JITTER * s, size=3)
            mask = ellipsoid_mask(s, center, axes)
            if not mask.any() or (masks and np.any(mask & ~masks[-1])):
                ok = False
                break
            masks.append(mask)
            parent_center = center
        if ok:
            if attempt:
                logger.debug(f"Ellipsoids fitted after {attempt + 1} attempts")
            return masks

    raise GenerationError(
        f"Could not fit {spec.num_regions} nested ellipsoids in a {s}^3 volume "
        f"after {MAX_FIT_RETRIES} attempts"
    )


def _intensities(spec: PhantomSpec, masks: List[np.ndarray]) -> np.ndarray:
    """Noise-free region-dependent base intensities, [C_in,S,S,S]."""
    s = spec.size
    volume = np.zeros((spec.num_modalities, s, s, s))
    other = 0
    for c in range(spec.num_modalities):
        if c == spec.informative_channel:
            volume[c][masks[0]] = OUTER_LEVEL
            continue
        core, enhancing = CORE_LEVELS[other % len(CORE_LEVELS)]
        other += 1
        if len(masks) > 1:
            volume[c][masks[1]] = core
        if len(masks) > 2:
            volume[c][masks[2]] = enhancing
    return volume


def generate_one(spec: PhantomSpec, index: int) -> Sample:
    """Sample `index` of the stream; its RNG derives from (seed, index) only."""
    rng = np.random.default_rng([spec.seed, index])
    masks = _draw_regions(spec, rng)
    volume = _intensities(spec, masks)
    if spec.noise_std > 0:
        volume = volume + rng.normal(0.0, spec.noise_std, size=volume.shape)
    label = np.stack(masks).astype(np.float64)
    return Sample(volume=volume, label=label, id=f"case_{index:04d}")


def generate(spec: PhantomSpec, n: int) -> List[Sample]:
    """
    Generate n phantoms.

    Args:
        spec: Phantom parameters
        n: Number of samples (>= 1)

    Returns:
        Samples with ids case_0000 ... in index order

    Raises:
        GenerationError: if n < 1 or an ellipsoid cannot be fitted
    """
    if n < 1:
        raise GenerationError(f"Sample count must be >= 1, got {n}")
    samples = [generate_one(spec, i) for i in range(n)]
    logger.info(f"Generated {n} phantoms (S={spec.size}, noise_std={spec.noise_std}, seed={spec.seed})")
    return samples
