import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dualdyn.models.Game import StrategyProfile

MetricKind = Literal["bregman_to_target", "euclid_sq_to_target", "potential_gap"]
ValidityMode = Literal["all_t", "asymptotic"]


class RateBound(BaseModel):
    """
    Envelope metric(t) ≤ C0·exp(−βt).

    β = 0 is the degenerate conserved bound of a null-monotone game.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    exponent: float = Field(ge=0)
    constant: float = Field(ge=0)
    metric: MetricKind
    validity: ValidityMode = "all_t"
    target: Optional[StrategyProfile] = None
    # AC bounds measure D_h(x, x⋆); MD/DMD measure D_h(x⋆, x)
    target_first: bool = True

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = self.constant * np.exp(-self.exponent * t)
        return float(out) if out.ndim == 0 else out

    def with_validity(self, validity: ValidityMode) -> "RateBound":
        return self.model_copy(update={"validity": validity})


class Violation(BaseModel):
    t: float
    measured: float
    bound: float


class BoundReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    checked_times: int
    violations: List[Violation] = Field(default_factory=list)
    max_ratio: float
    mode: str
    passed: bool = Field(alias="pass")

    def to_json_dict(self) -> dict:
        data = self.model_dump(by_alias=True)
        if not math.isfinite(data["max_ratio"]):
            data["max_ratio"] = None
        return data
