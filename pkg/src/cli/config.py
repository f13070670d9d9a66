"""
Experiment Configuration

One JSON document per run describes the lattice system, the weights, the
source and the run knobs. Nothing here is read from the environment.

Example:
    {
      "lattice": "Z", "dimension": 1, "n": 2,
      "subs": [{"kind": "scalar", "a": 4}, {"kind": "scalar", "a": 5}],
      "product_rule": "full",
      "gamma": {"0": 1.0, "1": 1.0},
      "samples": 100000, "seed": 1
    }
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator, ConfigDict

from src.analysis.closed_forms import gaussian_entropy
from src.codec.models import SourceConfig
from src.lattice.core import make_lattice
from src.lattice.models import LatticeName, LatticeSpec
from src.nested.models import IndexSpec, NestedSystem, ProductRule, SublatticeSpec
from src.nested.system import build_nested
from src.utils.logger import get_logger
from src.utils.settings import get_settings
from src.weights.models import WeightProfile, profile_from_dict

logger = get_logger(__name__)
settings = get_settings()


class ConfigError(ValueError):
    """Raised when a run configuration is unreadable or invalid."""
    pass


class AnalysisOptions(BaseModel):
    """Knobs for the analyze tables."""

    L_max: int = Field(default=21, ge=1)
    rate: float = Field(default=1.0, description="Description rate R, bits per dimension")
    central_rates: List[float] = Field(default_factory=lambda: [1.0, 1.5, 2.0, 2.5, 3.0])
    rhos: List[float] = Field(default_factory=lambda: [-0.45, -0.3, -0.15, 0.0, 0.25, 0.5])
    nesting_ratios: List[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0, 16.0])
    g_central: Optional[float] = Field(default=None, gt=0, description="G of the central lattice (default G(Z))")


class ExperimentConfig(BaseModel):
    """A validated run configuration."""

    lattice: LatticeName = Field(default=LatticeName.Z)
    dimension: int = Field(default=1, ge=1)
    scale: float = Field(default=1.0, gt=0, description="Central lattice scale")
    side_rate: Optional[float] = Field(
        default=None,
        description="Description 0 rate in bits/dim; when set it fixes the central scale",
    )
    n: int = Field(..., ge=2, le=10)
    subs: List[IndexSpec] = Field(..., description="One similarity choice per description")
    mu: Optional[List[float]] = None
    gamma: Optional[Dict[str, float]] = None
    c: Optional[Dict[str, float]] = None
    product_rule: ProductRule = Field(default=ProductRule.DEDUPLICATED)
    source: SourceConfig = Field(default_factory=SourceConfig)
    samples: int = Field(default=100_000, ge=1)
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    erasure_probability: Optional[float] = Field(default=None, ge=0, le=1)
    labeling_path: Optional[Path] = None
    analysis: AnalysisOptions = Field(default_factory=AnalysisOptions)

    model_config = ConfigDict(extra="forbid")

    @field_validator("mu")
    @classmethod
    def validate_mu(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(m <= 0 for m in v):
            raise ValueError(f"mu must be positive, got {v}")
        return v

    @model_validator(mode="after")
    def validate_counts(self) -> "ExperimentConfig":
        if len(self.subs) != self.n:
            raise ValueError(f"{len(self.subs)} sublattice choices for n={self.n}")
        if self.mu is not None and len(self.mu) != self.n:
            raise ValueError(f"mu has {len(self.mu)} entries for n={self.n}")
        if self.lattice == LatticeName.A2:
            self.dimension = 2
        elif self.lattice == LatticeName.D4:
            self.dimension = 4
        return self

    @property
    def mu_values(self) -> List[float]:
        return list(self.mu) if self.mu is not None else [1.0] * self.n

    def profile(self) -> WeightProfile:
        """WeightProfile from gamma/c/mu (symmetric weights when gamma is absent)."""
        gamma = self.gamma if self.gamma is not None else WeightProfile.symmetric(self.n).gamma
        return profile_from_dict({"n": self.n, "gamma": gamma, "mu": self.mu_values, "c": self.c})

    def central_lattice(self) -> LatticeSpec:
        """Central lattice, scaled to meet side_rate when it is set."""
        unit = make_lattice(self.lattice, self.dimension)
        if self.side_rate is None:
            return make_lattice(self.lattice, self.dimension, self.scale)
        L = unit.dimension
        N0 = SublatticeSpec(scale_matrix=self.subs[0].scale_matrix(unit)).index
        h = gaussian_entropy(L, self.source.sigma2)
        # R_0 = h/L − (1/L)log₂(ν_c N_0 μ_0) solved for ν_c.
        nu_c = 2.0 ** (h - L * self.side_rate) / (N0 * self.mu_values[0])
        scale = (nu_c / unit.cell_volume) ** (1.0 / L)
        return make_lattice(self.lattice, self.dimension, scale)

    def system(self) -> NestedSystem:
        return build_nested(self.central_lattice(), self.subs, self.mu_values, self.product_rule)


def parse_config(data: dict) -> ExperimentConfig:
    """
    Validate a configuration document.

    Raises:
        ConfigError: With every validation problem in one message
    """
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        logger.error(f"Invalid configuration: {problems}")
        raise ConfigError(f"invalid configuration: {problems}") from e


def resolve_config_path(path: Union[str, Path]) -> Path:
    """The path as given if it exists, else the same name under the configs directory."""
    path = Path(path)
    if not path.exists() and not path.is_absolute() and (settings.configs_path / path).exists():
        return settings.configs_path / path
    return path


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate a JSON configuration file."""
    path = resolve_config_path(path)
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read configuration {path}: {e}", exc_info=True)
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"configuration {path} must be a JSON object")
    return parse_config(data)
