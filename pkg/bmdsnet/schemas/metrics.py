"""Metric report contract - one CSV row per (scenario, region)."""

from typing import Optional

from pydantic import BaseModel, Field

REGIONS = ("WT", "TC", "ET")
ALL_REGIONS = "ALL"
REGION_ORDER = REGIONS + (ALL_REGIONS,)


class MetricReport(BaseModel):
    """Aggregated metrics over the test cases of one scenario and region."""
    scenario: str = Field(..., description="Scenario label")
    region: str = Field(..., description="WT, TC, ET, or ALL for the mean over regions")
    dice_mean: float = Field(..., ge=0.0, le=1.0)
    dice_std: float = Field(..., ge=0.0)
    hd95_mean: Optional[float] = Field(None, ge=0.0, description="Mean over cases with a defined HD95")
    hd95_std: Optional[float] = Field(None, ge=0.0)
    ece: float = Field(..., ge=0.0, le=1.0)
    nll: float = Field(..., ge=0.0)
    unc_auc: Optional[float] = Field(None, ge=0.0, le=1.0, description="Missing when degenerate or deterministic")
    n_cases: int = Field(..., ge=0)
    hd95_missing: int = Field(default=0, ge=0, description="Cases whose HD95 is undefined (one mask empty)")
