"""Experiment configuration contract - Pydantic models for every config section.

Each field's description doubles as the comment line written by
`--print-default-config`.
"""

from typing import Annotated, List, Literal

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator


def _split_list(value):
    """Accept "a,b,c" strings for list fields."""
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


IntList = Annotated[List[int], BeforeValidator(_split_list)]
FloatList = Annotated[List[float], BeforeValidator(_split_list)]
StrList = Annotated[List[str], BeforeValidator(_split_list)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


# === DATA ===

class DataSection(_Section):
    """Synthetic dataset and preprocessing."""
    num_samples: int = Field(default=50, ge=3, description="Phantoms generated by gen-data (split 80/15/5)")
    size: int = Field(default=32, ge=8, description="Phantom edge length S in voxels (multiple of 8)")
    crop_size: int = Field(default=24, ge=8, description="Training crop edge length (multiple of 8, <= size)")
    num_modalities: int = Field(default=4, ge=1, description="Input modalities per volume")
    noise_std: float = Field(default=0.2, ge=0.0, description="Gaussian noise std added by the phantom generator")
    informative_channel: int = Field(default=3, ge=0, description="Modality carrying the outer-region contrast")
    seed: int = Field(default=0, ge=0, description="Phantom generation and split seed")
    augment: bool = Field(default=True, description="Random flips and 90-degree rotations during training")

    @model_validator(mode="after")
    def _check_sizes(self) -> "DataSection":
        if self.size % 8 or self.crop_size % 8:
            raise ValueError(f"data.size ({self.size}) and data.crop_size ({self.crop_size}) must be multiples of 8")
        if self.crop_size > self.size:
            raise ValueError(f"data.crop_size {self.crop_size} exceeds data.size {self.size}")
        if self.informative_channel >= self.num_modalities:
            raise ValueError("data.informative_channel must be < data.num_modalities")
        return self


# === MODEL ===

class ModelSection(_Section):
    """Network widths and module wiring."""
    widths: IntList = Field(default=[16, 32, 64], description="Encoder/decoder channel widths w1,w2,w3")
    alpha_init: float = Field(default=0.0, description="Initial MMCF residual scale alpha (learnable)")
    gamma_init: float = Field(default=0.1, description="Initial DDS gate scale gamma (learnable)")
    use_mmcf: bool = Field(default=True, description="Wire the MMCF fusion block")
    use_dds: bool = Field(default=True, description="Wire the DDS decoder gates")

    @field_validator("widths")
    @classmethod
    def _three_widths(cls, value: List[int]) -> List[int]:
        if len(value) != 3 or any(w < 1 for w in value):
            raise ValueError(f"expected three positive widths, got {value}")
        return value


# === STAGE 1 ===

class Stage1Section(_Section):
    """Deterministic training."""
    epochs: int = Field(default=200, ge=0, description="Training epochs")
    lr: float = Field(default=1e-3, gt=0.0, description="AdamW base learning rate (cosine decay)")
    weight_decay: float = Field(default=1e-4, ge=0.0, description="AdamW decoupled weight decay")
    batch_size: int = Field(default=2, ge=1, description="Crops per optimizer step")
    eval_every: int = Field(default=5, ge=1, description="Validation Dice interval in epochs (best checkpoint)")
    final_lr_ratio: float = Field(default=0.01, gt=0.0, le=1.0, description="Final lr as a fraction of lr")


class LossWeights(_Section):
    """Stage-1 objective weights."""
    lambda1: float = Field(default=0.4, ge=0.0, description="Weight of the deeper auxiliary DiceCE term")
    lambda2: float = Field(default=0.2, ge=0.0, description="Weight of the shallower auxiliary DiceCE term")
    distill_weight: float = Field(default=0.2, ge=0.0, description="Weight of the distillation term")
    dice_smooth: float = Field(default=1e-5, gt=0.0, description="Soft Dice smoothing epsilon")
    distill_reduction: Literal["mean", "sum"] = Field(
        default="mean", description="Per-stage voxel reduction of the distillation term: mean or sum"
    )


# === STAGE 2 ===

class Stage2Section(_Section):
    """Bayesian head fine-tuning and inference."""
    epochs: int = Field(default=30, ge=0, description="Fine-tuning epochs")
    lr: float = Field(default=1e-4, ge=0.0, description="AdamW learning rate (must be below stage1.lr)")
    weight_decay: float = Field(default=0.0, ge=0.0, description="AdamW decay on (mu, rho)")
    kl_beta: float = Field(default=1e-5, ge=0.0, description="KL weight in the ELBO")
    rho_init: float = Field(default=-5.0, description="Initial rho; sigma = softplus(rho)")
    T_train: int = Field(default=1, description="Weight samples per training step")
    T_infer: int = Field(default=20, description="Weight samples at inference")

    @field_validator("T_train", "T_infer")
    @classmethod
    def _positive_samples(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"must be >= 1, got {value}")
        return value


# === EVALUATION ===

class EvalSection(_Section):
    """Evaluation and experiment harness options."""
    scenarios: StrList = Field(
        default=["full", "missing:0", "missing:1", "missing:2", "missing:3", "noise:0.1"],
        description="Scenarios: full, missing:<channel>, noise:<std>",
    )
    ece_bins: int = Field(default=10, ge=1, description="Equal-width confidence bins over [0.5, 1]")
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0, description="Probability threshold for masks (p >= t)")
    num_seeds: int = Field(default=3, ge=1, description="Independent seeds per sweep and robustness cell")
    noisy_test_std: float = Field(default=0.3, ge=0.0, description="Noise std of the calibration stress set")
    alpha_values: FloatList = Field(default=[0.5, 1.0, 1.5, 2.0], description="Non-zero alpha inits for sweep-alpha")
    ensemble_size: int = Field(default=3, ge=2, description="Members of the deep ensemble")

    @field_validator("scenarios")
    @classmethod
    def _known_scenarios(cls, value: List[str]) -> List[str]:
        from bmdsnet.schemas.scenario import Scenario
        for text in value:
            Scenario.parse(text)
        return value


# === EXPERIMENT ===

class ExperimentConfig(_Section):
    """Complete experiment configuration."""
    seed: int = Field(default=0, ge=0, lt=2 ** 64, description="Global seed for initialization and batching")
    data: DataSection = Field(default_factory=DataSection)
    model: ModelSection = Field(default_factory=ModelSection)
    stage1: Stage1Section = Field(default_factory=Stage1Section)
    losses: LossWeights = Field(default_factory=LossWeights)
    stage2: Stage2Section = Field(default_factory=Stage2Section)
    eval: EvalSection = Field(default_factory=EvalSection)

    @model_validator(mode="after")
    def _stage2_lr_below_stage1(self) -> "ExperimentConfig":
        if not self.stage2.lr < self.stage1.lr:
            raise ValueError(f"stage2.lr ({self.stage2.lr}) must be below stage1.lr ({self.stage1.lr})")
        return self

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.model_copy(update={"seed": int(seed)}, deep=True)

    def with_model(self, **changes) -> "ExperimentConfig":
        model = self.model.model_copy(update=changes)
        return self.model_copy(update={"model": model}, deep=True)
