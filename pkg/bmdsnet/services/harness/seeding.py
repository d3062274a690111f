"""Derived RNG streams for the harness.

Every random choice in a run is keyed by (run seed, purpose, indices...), so
results do not depend on execution order or on how work is split over threads.
"""

from typing import Sequence

import numpy as np

# Purposes
BATCH_ORDER = 0x0B
CROP = 0x0C
AUGMENT = 0x0A
STAGE2 = 0x02
SCENARIO_NOISE = 0x05
MC_SAMPLING = 0x3C


def derive_seed(*parts: int) -> int:
    """Collapse a key tuple into one 32-bit seed."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def stream(*parts: int) -> np.random.Generator:
    return np.random.default_rng([int(p) for p in parts])


def member_seeds(base: int, count: int) -> Sequence[int]:
    """Seeds of independent runs: base, base+1, ..."""
    return [int(base) + k for k in range(count)]
