"""
Test-Time Scenarios

Perturbations applied to a normalized volume before inference: a missing
modality is zero-filled (the channel's z-scored mean), Gaussian noise is
added i.i.d. to every channel from a seeded stream.
"""

from typing import List, Sequence

import numpy as np

from bmdsnet.errors import DimensionError
from bmdsnet.schemas.scenario import Scenario, ScenarioKind
from .seeding import SCENARIO_NOISE, stream


def apply_scenario(volume: np.ndarray, scenario: Scenario, seed: int = 0) -> np.ndarray:
    """
    Perturbed copy of a [C,S,S,S] volume.

    Raises:
        DimensionError: if the dropped modality is not a channel of the volume
    """
    out = np.array(volume, dtype=np.float64, copy=True)
    if scenario.kind == ScenarioKind.MISSING_MODALITY:
        if scenario.index >= out.shape[0]:
            raise DimensionError(f"cannot drop channel {scenario.index} of a {out.shape[0]}-channel volume")
        out[scenario.index] = 0.0
    elif scenario.kind == ScenarioKind.GAUSSIAN_NOISE and scenario.std > 0.0:
        out += stream(seed, SCENARIO_NOISE).normal(0.0, scenario.std, size=out.shape)
    return out


def parse_scenarios(texts: Sequence[str]) -> List[Scenario]:
    return [Scenario.parse(t) for t in texts]
