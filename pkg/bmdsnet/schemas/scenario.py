"""Evaluation scenario contract - test-time perturbations of the input volume."""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, model_validator

MODALITY_LABELS = ("flair", "t1", "t1ce", "t2")


class ScenarioKind(str, Enum):
    """Perturbation applied before inference."""
    FULL = "full"
    MISSING_MODALITY = "missing_modality"
    GAUSSIAN_NOISE = "gaussian_noise"


class Scenario(BaseModel):
    """A named test-time perturbation."""
    kind: ScenarioKind = Field(default=ScenarioKind.FULL, description="Perturbation type")
    index: Optional[int] = Field(None, ge=0, lt=4, description="Dropped modality (missing_modality only)")
    std: Optional[float] = Field(None, ge=0.0, description="Noise std (gaussian_noise only)")

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_arguments(self) -> "Scenario":
        if self.kind == ScenarioKind.MISSING_MODALITY and self.index is None:
            raise ValueError("missing_modality needs a modality index")
        if self.kind == ScenarioKind.GAUSSIAN_NOISE and self.std is None:
            raise ValueError("gaussian_noise needs a std")
        return self

    @property
    def label(self) -> str:
        if self.kind == ScenarioKind.MISSING_MODALITY:
            return f"missing_{MODALITY_LABELS[self.index]}"
        if self.kind == ScenarioKind.GAUSSIAN_NOISE:
            return f"noise_{self.std:g}"
        return "full"

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        """
        Parse "full", "missing:<index>" or "noise:<std>".

        Raises:
            ValueError: on an unknown form or out-of-range argument
        """
        text = text.strip()
        if text == "full":
            return cls(kind=ScenarioKind.FULL)
        name, sep, arg = text.partition(":")
        if not sep:
            raise ValueError(f"unknown scenario {text!r} (expected full, missing:<i> or noise:<std>)")
        if name == "missing":
            return cls(kind=ScenarioKind.MISSING_MODALITY, index=int(arg))
        if name == "noise":
            return cls(kind=ScenarioKind.GAUSSIAN_NOISE, std=float(arg))
        raise ValueError(f"unknown scenario {text!r} (expected full, missing:<i> or noise:<std>)")


FULL = Scenario(kind=ScenarioKind.FULL)
