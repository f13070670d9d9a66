"""
Codec Models

This module defines Pydantic v2 models for the multiple-description codec:
- EncodedFrame: one source vector's descriptions
- EncodedBatch: the vectorized form used by simulation
- SourceConfig: i.i.d. Gaussian source parameters
- PatternResult / ExperimentResult: per-pattern distortions and empirical rates
- BinTable / BinDecodeResult / AmbiguityReport: random binning of side indices
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import polars as pl
from pydantic import BaseModel, Field, ConfigDict, computed_field, field_validator, model_validator

RESULT_COLUMNS = ["pattern", "samples", "empirical_mse", "theory_mse", "db_gap"]
EMPTY_PATTERN = "empty"


class EncodedFrame(BaseModel):
    """
    Descriptions of one central point.

    λ_i = rep_i(side_indices[i]) + M_π·side_translates[i] and
    λ_c = canonical point + M_π·product_translate.
    """

    product_translate: List[int] = Field(..., description="λ_c's product lattice translate (product basis)")
    side_indices: List[int] = Field(..., description="Canonical representative index per description")
    side_translates: List[List[int]] = Field(..., description="Product lattice translate per description")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_lengths(self) -> "EncodedFrame":
        if len(self.side_indices) != len(self.side_translates):
            raise ValueError("side_indices and side_translates differ in length")
        if any(len(t) != len(self.product_translate) for t in self.side_translates):
            raise ValueError("translates must all have the lattice dimension")
        return self

    @property
    def n(self) -> int:
        return len(self.side_indices)


class EncodedBatch(BaseModel):
    """Encoder output for m vectors."""

    central: np.ndarray = Field(..., description="(m, L) λ_c central basis coordinates")
    product_translates: np.ndarray = Field(..., description="(m, L)")
    side_indices: np.ndarray = Field(..., description="(m, n)")
    side_translates: np.ndarray = Field(..., description="(m, n, L)")

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def size(self) -> int:
        return int(self.central.shape[0])

    def frame(self, row: int) -> EncodedFrame:
        return EncodedFrame(
            product_translate=self.product_translates[row].tolist(),
            side_indices=self.side_indices[row].tolist(),
            side_translates=self.side_translates[row].tolist(),
        )


class SourceKind(str, Enum):
    GAUSSIAN = "gaussian"


class SourceConfig(BaseModel):
    """Memoryless source, i.i.d. across dimensions."""

    kind: SourceKind = Field(default=SourceKind.GAUSSIAN)
    sigma2: float = Field(default=1.0, gt=0, description="Variance σ² per dimension")
    mean: float = Field(default=0.0, description="Mean, also the empty-pattern reconstruction")

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


class PatternResult(BaseModel):
    """Distortion for one received set."""

    pattern: str = Field(..., description="Subset key such as '01', or 'empty'")
    samples: int = Field(..., ge=0)
    empirical_mse: float = Field(..., ge=0, description="Mean squared error per dimension")
    theory_mse: Optional[float] = Field(default=None, ge=0)

    @computed_field
    @property
    def db_gap(self) -> Optional[float]:
        """10 log₁₀(empirical / theory)."""
        if self.theory_mse is None or self.theory_mse <= 0 or self.empirical_mse <= 0:
            return None
        return float(10.0 * np.log10(self.empirical_mse / self.theory_mse))


class ExperimentResult(BaseModel):
    """
    Outcome of one simulation run.

    wall_clock_seconds is kept on the object but excluded from serialized
    output so that repeated runs produce identical files.
    """

    seed: int = Field(..., ge=0)
    samples: int = Field(..., ge=1)
    dimension: int = Field(..., ge=1)
    patterns: List[PatternResult] = Field(default_factory=list)
    central_mse: float = Field(..., ge=0)
    central_entropy: float = Field(..., ge=0, description="Empirical R_c, bits per dimension")
    side_entropies: List[float] = Field(default_factory=list, description="Empirical R_i, bits per dimension")
    erasure_probability: Optional[float] = Field(default=None, ge=0, le=1)
    channel_mse: Optional[float] = Field(default=None, ge=0)
    wall_clock_seconds: float = Field(default=0.0, ge=0, exclude=True)

    def pattern(self, key: str) -> PatternResult:
        for p in self.patterns:
            if p.pattern == key:
                return p
        raise KeyError(f"no pattern {key!r} in result")

    def to_frame(self) -> pl.DataFrame:
        """One row per erasure pattern, fixed column order."""
        rows = [(p.pattern, p.samples, p.empirical_mse, p.theory_mse, p.db_gap) for p in self.patterns]
        return pl.DataFrame(
            rows,
            schema={
                "pattern": pl.Utf8,
                "samples": pl.Int64,
                "empirical_mse": pl.Float64,
                "theory_mse": pl.Float64,
                "db_gap": pl.Float64,
            },
            orient="row",
        )


class BinTable(BaseModel):
    """Random bins for the canonical representatives of every description."""

    binning_rate: float = Field(..., gt=0, description="R_b, bits per dimension")
    bins_per_description: int = Field(..., ge=1)
    bins: List[np.ndarray] = Field(..., description="Bin of each representative, per description")
    pairs: Dict[str, pl.DataFrame] = Field(
        ...,
        description="Per description pair 'ij': columns idx_i, idx_j, central (one row per central point)",
    )

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("bins")
    @classmethod
    def validate_bins(cls, v: List[np.ndarray]) -> List[np.ndarray]:
        if len(v) != 3:
            raise ValueError(f"binning needs three descriptions, got {len(v)}")
        return v


class BinDecodeResult(BaseModel):
    """Outcome of decoding two bin indices."""

    unique: bool
    candidates: List[Tuple[int, int]] = Field(default_factory=list, description="Consistent (idx_i, idx_j) pairs")
    central_indices: List[List[int]] = Field(default_factory=list, description="Central points per candidate")


class AmbiguityReport(BaseModel):
    """Monte-Carlo ambiguity of two-description bin decoding."""

    binning_rate: float
    bins_per_description: int
    trials: int = Field(..., ge=1)
    ambiguous: int = Field(..., ge=0)
    expected_false_candidates: float = Field(..., ge=0)

    @property
    def frequency(self) -> float:
        return self.ambiguous / self.trials
