from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dualdyn.models.Geometry import BlockPartition

DynamicsKind = Literal["MD", "DMD", "AC"]


class DynamicsSpec(BaseModel):
    """MD: ż = γU(C(z)); DMD: ż = γ(−z + U(C(z))); AC: ż = γU(x), ẋ = r(C(z) − x)."""
    model_config = ConfigDict(frozen=True)

    kind: DynamicsKind
    gamma: float = Field(gt=0)
    r: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _ac_needs_r(self):
        if self.kind == "AC" and self.r is None:
            raise ValueError("AC dynamics need a positive r")
        return self


class IntegratorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    dt: float = Field(default=1e-3, gt=0)
    t_end: float = Field(gt=0)
    sample_every: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_span(self):
        if self.dt > self.t_end:
            raise ValueError(f"dt={self.dt} exceeds t_end={self.t_end}")
        return self


class Trajectory(BaseModel):
    """
    Sampled run. ``z`` is the dual state, ``mirror_x`` = C_ε(z) and ``x`` is the
    played profile (equal to ``mirror_x`` for MD/DMD, the filtered primal state for AC).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: DynamicsKind
    partition: BlockPartition
    times: np.ndarray
    z: np.ndarray
    x: np.ndarray
    mirror_x: np.ndarray

    @field_validator("times", "z", "x", "mirror_x", mode="before")
    @classmethod
    def _freeze(cls, v):
        arr = np.array(v, dtype=float)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_shapes(self):
        k, n = len(self.times), self.partition.total
        for name in ("z", "x", "mirror_x"):
            if getattr(self, name).shape != (k, n):
                raise ValueError(f"{name} must have shape ({k}, {n})")
        if k == 0 or self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must start at 0 and increase")
        return self

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_x(self) -> np.ndarray:
        return self.x[-1]
