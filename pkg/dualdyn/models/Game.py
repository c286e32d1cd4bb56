from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dualdyn.models.Geometry import BlockPartition, Domain
from dualdyn.utils.exceptions import DomainError

# Feasibility tolerance for simplex sums and box bounds.
FEASIBILITY_TOL = 1e-12


def _frozen_array(v) -> np.ndarray:
    arr = np.array(v, dtype=float)
    arr.setflags(write=False)
    return arr


def block_feasible(domain, block: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
    if domain.kind == "simplex":
        return bool(np.all(block >= -tol) and abs(block.sum() - 1.0) <= tol * max(1, block.size))
    lo = np.asarray(domain.lo)
    hi = np.asarray(domain.hi)
    return bool(np.all(block >= lo - tol) and np.all(block <= hi + tol))


class StrategyProfile(BaseModel):
    """Stacked strategy vector x = (xᵖ) with its block partition."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    partition: BlockPartition

    @field_validator("values", mode="before")
    @classmethod
    def _to_array(cls, v):
        return _frozen_array(v)

    @model_validator(mode="after")
    def _check_length(self):
        if self.values.ndim != 1 or self.values.shape[0] != self.partition.total:
            raise ValueError(
                f"profile has shape {self.values.shape}, expected ({self.partition.total},)"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile has non-finite entries")
        return self

    def blocks(self) -> List[np.ndarray]:
        return self.partition.split(self.values)

    def tolist(self) -> List[float]:
        return [float(v) for v in self.values]


class Game(BaseModel):
    """
    A concave N-player game given by its pseudo-gradient U(x).

    ``pseudo_gradient`` and ``potential`` accept a single stacked profile or a
    batch with one profile per row.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    partition: BlockPartition
    domains: Tuple[Domain, ...]
    pseudo_gradient: Callable[[np.ndarray], np.ndarray]
    potential: Optional[Callable[[np.ndarray], Any]] = None
    lipschitz_hint: Optional[float] = Field(default=None, gt=0)
    known_ne: Optional[np.ndarray] = None
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("known_ne", mode="before")
    @classmethod
    def _freeze_ne(cls, v):
        return None if v is None else _frozen_array(v)

    @model_validator(mode="after")
    def _check_domains(self):
        if len(self.domains) != len(self.partition.sizes):
            raise ValueError("one domain per player is required")
        for p, (dom, size) in enumerate(zip(self.domains, self.partition.sizes)):
            if dom.dim != size:
                raise ValueError(f"player {p}: domain dimension {dom.dim} != block size {size}")
        return self

    @property
    def n(self) -> int:
        return self.partition.total

    def U(self, x) -> np.ndarray:
        out = np.asarray(self.pseudo_gradient(np.asarray(x, dtype=float)), dtype=float)
        if out.shape[-1] != self.n:
            raise ValueError(f"pseudo-gradient returned length {out.shape[-1]}, expected {self.n}")
        return out

    def P(self, x):
        if self.potential is None:
            raise ValueError(f"game '{self.name}' has no potential")
        return self.potential(np.asarray(x, dtype=float))

    def is_feasible(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return all(
            block_feasible(dom, x[sl], tol)
            for dom, sl in zip(self.domains, self.partition.slices)
        )

    def profile(self, values) -> StrategyProfile:
        """Wrap ``values`` as a profile, rejecting infeasible points."""
        profile = StrategyProfile(values=values, partition=self.partition)
        if not self.is_feasible(profile.values):
            raise DomainError(f"profile is not feasible for game '{self.name}'")
        return profile


class MonotonicityReport(BaseModel):
    """One-sided sampled moduli; not certificates."""
    model_config = ConfigDict(frozen=True)

    eta_est: float = Field(ge=0)
    mu_est: float = Field(ge=0)
    relative_eta_est: float = Field(ge=0)
    relative_mu_est: float = Field(ge=0)
    samples_used: int = Field(ge=0)

    @model_validator(mode="after")
    def _exclusive(self):
        if self.eta_est > 0 and self.mu_est > 0:
            raise ValueError("eta_est and mu_est cannot both be positive")
        if self.relative_eta_est > 0 and self.relative_mu_est > 0:
            raise ValueError("relative_eta_est and relative_mu_est cannot both be positive")
        return self
