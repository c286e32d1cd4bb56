from functools import cached_property
from itertools import accumulate
from typing import Annotated, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class SimplexDomain(BaseModel):
    """Unit simplex of dimension ``dim``."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["simplex"] = "simplex"
    dim: int = Field(ge=1)


class BoxDomain(BaseModel):
    """Axis-aligned box [lo, hi]."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["box"] = "box"
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_bounds(self):
        if len(self.lo) == 0 or len(self.lo) != len(self.hi):
            raise ValueError("box bounds must be nonempty and of equal length")
        if any(not np.isfinite(v) for v in self.lo + self.hi):
            raise ValueError("box bounds must be finite")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError("box requires lo <= hi in every coordinate")
        return self

    @property
    def dim(self) -> int:
        return len(self.lo)


Domain = Annotated[Union[SimplexDomain, BoxDomain], Field(discriminator="kind")]


class RegularizerKind(BaseModel):
    """
    Per-player regularizer: ``euclidean`` (½‖x‖², box or simplex) or
    ``entropy`` (Σ x log x, simplex only). Both are 1-strongly convex.
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["euclidean", "entropy"]
    domain: Domain

    @model_validator(mode="after")
    def _entropy_needs_simplex(self):
        if self.kind == "entropy" and self.domain.kind != "simplex":
            raise ValueError("entropy regularizer is only defined on a simplex domain")
        return self

    @property
    def rho(self) -> float:
        return 1.0

    @property
    def steep(self) -> bool:
        return self.kind == "entropy"

    @property
    def dim(self) -> int:
        return self.domain.dim


class BlockPartition(BaseModel):
    """Stacking convention x = (x¹, ..., x^N); block p has ``sizes[p]`` coordinates."""
    model_config = ConfigDict(frozen=True)

    sizes: Tuple[int, ...]

    @model_validator(mode="after")
    def _check_sizes(self):
        if len(self.sizes) == 0:
            raise ValueError("partition needs at least one block")
        if any(s < 1 for s in self.sizes):
            raise ValueError("every block needs at least one coordinate")
        return self

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @cached_property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(accumulate(self.sizes[:-1], initial=0))

    @cached_property
    def slices(self) -> Tuple[slice, ...]:
        return tuple(slice(o, o + s) for o, s in zip(self.offsets, self.sizes))

    def split(self, v: np.ndarray) -> List[np.ndarray]:
        """Split along the last axis into per-player views."""
        return [v[..., s] for s in self.slices]


class MirrorSpec(BaseModel):
    """Regularizer per player plus the temperature ε; induces C_ε, D_ψ and ψ⋆."""
    model_config = ConfigDict(frozen=True)

    regularizers: Tuple[RegularizerKind, ...]
    epsilon: float = Field(gt=0)

    @model_validator(mode="after")
    def _check(self):
        if len(self.regularizers) == 0:
            raise ValueError("mirror spec needs one regularizer per player")
        if not np.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")
        return self

    @cached_property
    def partition(self) -> BlockPartition:
        return BlockPartition(sizes=tuple(reg.dim for reg in self.regularizers))

    @property
    def domains(self) -> tuple:
        return tuple(reg.domain for reg in self.regularizers)

    @property
    def rho(self) -> float:
        return min(reg.rho for reg in self.regularizers)

    @property
    def steep(self) -> bool:
        return all(reg.steep for reg in self.regularizers)

    def with_epsilon(self, epsilon: float) -> "MirrorSpec":
        return MirrorSpec(regularizers=self.regularizers, epsilon=epsilon)
