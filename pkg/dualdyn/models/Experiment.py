from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dualdyn.utils.functions import parse_blocks, parse_matrix, parse_vector

GameName = Literal["rps", "network-mp", "adversarial", "quadratic"]
RegularizerName = Literal["euclidean", "entropy"]


class ExperimentConfig(BaseModel):
    """
    Flat key/value experiment description, one file per experiment.
    Vectors are comma separated; per-player blocks and matrix rows use ';'.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    # game
    game: GameName
    rps_w: float = Field(default=1.0, gt=0)
    rps_l: float = Field(default=5.0, gt=0)
    rps_form: Literal["bimatrix", "printed"] = "bimatrix"
    quad_q: Optional[List[List[float]]] = None
    quad_b: Optional[List[float]] = None
    quad_lo: Optional[List[float]] = None
    quad_hi: Optional[List[float]] = None
    attack_dataset: Optional[str] = None
    attack_weights: Tuple[float, float] = (0.8484, 0.8947)
    attack_r: float = Field(default=10.0, gt=0)
    attack_iota_lo: float = -1.0
    attack_iota_hi: float = 1.0

    # mirror map
    regularizer: Tuple[RegularizerName, ...] = ("entropy",)
    epsilon: Optional[float] = Field(default=None, gt=0)

    # dynamics and integration
    dynamics: Optional[Literal["MD", "DMD", "AC"]] = None
    gamma: float = Field(default=1.0, gt=0)
    r: Optional[float] = Field(default=None, gt=0)
    z0: Optional[List[float]] = None
    x0: Optional[List[float]] = None
    dt: float = Field(default=1e-3, gt=0)
    t_end: Optional[float] = Field(default=None, gt=0)
    sample_every: int = Field(default=1, ge=1)

    # equilibrium target
    target: Optional[Literal["ne", "perturbed_ne"]] = None
    solver_tol: float = Field(default=1e-10, gt=0)
    solver_max_iter: int = Field(default=200_000, ge=1)
    damping: float = Field(default=1.0, gt=0, le=1)

    # rate bound
    bound: Literal["none", "md", "dmd", "ac"] = "none"
    metric: Literal["bregman", "euclid_sq", "potential_gap"] = "bregman"
    eta: Optional[float] = None
    mu: Optional[float] = None
    rho: float = Field(default=1.0, gt=0)
    validity: Literal["all_t", "asymptotic"] = "all_t"
    t_min: Optional[float] = None
    slack: float = Field(default=1e-6, ge=0)

    # sampling
    n_pairs: int = Field(default=10_000, ge=1)
    seed: int = 0

    output: str = "experiment"

    @field_validator("quad_b", "quad_lo", "quad_hi", mode="before")
    @classmethod
    def _vector(cls, v):
        return parse_vector(v) if isinstance(v, str) else v

    @field_validator("z0", "x0", mode="before")
    @classmethod
    def _blocks(cls, v):
        return parse_blocks(v) if isinstance(v, str) else v

    @field_validator("quad_q", mode="before")
    @classmethod
    def _matrix(cls, v):
        return parse_matrix(v) if isinstance(v, str) else v

    @field_validator("attack_weights", mode="before")
    @classmethod
    def _weights(cls, v):
        return tuple(parse_vector(v)) if isinstance(v, str) else v

    @field_validator("regularizer", mode="before")
    @classmethod
    def _regularizers(cls, v):
        if isinstance(v, str):
            return tuple(item.strip().lower() for item in v.split(","))
        return v

    @model_validator(mode="after")
    def _cross_checks(self):
        if self.game == "quadratic" and (self.quad_q is None or self.quad_b is None):
            raise ValueError("quadratic game needs quad_q and quad_b")
        if self.bound == "md" and self.eta is None:
            raise ValueError("md bound needs eta")
        if self.bound == "dmd" and self.mu is None:
            raise ValueError("dmd bound needs mu")
        if self.bound == "ac":
            if self.dynamics != "AC":
                raise ValueError("ac bound needs AC dynamics")
            if self.eta is None:
                raise ValueError("ac bound needs eta")
        if self.bound in ("md", "dmd") and self.dynamics is not None and self.bound.upper() != self.dynamics:
            raise ValueError(f"{self.bound} bound does not apply to {self.dynamics} dynamics")
        if self.metric == "potential_gap" and self.bound != "ac":
            raise ValueError("potential_gap metric is only available for the ac bound")
        if self.dynamics == "AC" and self.r is None:
            raise ValueError("AC dynamics need r")
        return self

    @property
    def target_kind(self) -> str:
        if self.target is not None:
            return self.target
        return "perturbed_ne" if self.dynamics == "DMD" else "ne"


class RunResult(BaseModel):
    """Outcome of a single configured run."""

    name: str
    status: str = "completed"
    exit_code: int = 0
    dynamics: Optional[str] = None
    regularizer: Optional[List[str]] = None
    passed: Optional[bool] = None
    theoretical_exponent: Optional[float] = None
    fitted_exponent: Optional[float] = None
    final_x: List[float] = Field(default_factory=list)
    state_velocity: Optional[float] = None
    reports: Dict[str, Any] = Field(default_factory=dict)
    trajectory_path: Optional[str] = None
    report_path: Optional[str] = None
    error: Optional[str] = None
