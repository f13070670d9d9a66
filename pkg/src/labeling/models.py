"""
Labeling Models

This module defines Pydantic v2 models for the index assignment:
- TupleSet: candidate n-tuples (one per coset) with the radius that produced them
- LabelingCost: pairwise part f, centroid part g and their sum J
- LabelingFunction: the map α from canonical central points to n-tuples

All lattice points are stored as integer coordinates in the central basis,
so coset arithmetic stays exact.
"""

from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, ConfigDict, model_validator

from src.nested.models import NestedSystem
from src.weights.models import WeightProfile

TABLE_VERSION = 1


class TupleSet(BaseModel):
    """
    N_π candidate tuples; element i of every tuple lies in Λ_i.

    Attributes:
        tuples: (N_π, n, L) central basis coordinates
        radius: Final pair-constraint radius r (Cartesian units)
        radius_start: Radius implied by the volume equality
        psi: Expansion factor over radius_start; the counting radius for n = 3, else radius
    """

    system: NestedSystem
    tuples: np.ndarray
    radius: float = Field(..., ge=0)
    radius_start: float = Field(..., gt=0)
    psi: float = Field(..., ge=0)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def validate_shape(self) -> "TupleSet":
        expected = (self.system.n, self.system.dimension)
        if self.tuples.ndim != 3 or self.tuples.shape[1:] != expected:
            raise ValueError(f"tuples must have shape (m, {expected[0]}, {expected[1]}), got {self.tuples.shape}")
        return self

    @property
    def count(self) -> int:
        return int(self.tuples.shape[0])

    def cartesian(self) -> np.ndarray:
        """(m, n, L) Cartesian coordinates."""
        return self.tuples.astype(float) @ self.system.central.basis_matrix.T


class LabelingCost(BaseModel):
    """Per-dimension cost split, averaged over the central points of one cell."""

    f: float = Field(..., ge=0, description="Pairwise part")
    g: float = Field(..., ge=0, description="Centroid part")

    @property
    def J(self) -> float:
        return self.f + self.g


class LabelingFunction(BaseModel):
    """
    α restricted to the canonical product cell.

    Row k of `forward` is the tuple assigned to row k of `central`; every
    other central point is labeled by shifting with the product lattice.
    """

    system: NestedSystem
    profile: WeightProfile
    central: np.ndarray = Field(..., description="(N_π, L) canonical central points")
    forward: np.ndarray = Field(..., description="(N_π, n, L) assigned tuples")
    psi: float = Field(default=0.0, ge=0)
    radius: float = Field(default=0.0, ge=0)
    cost: Optional[LabelingCost] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    _inverse: Dict[bytes, Tuple[int, np.ndarray]] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def validate_tables(self) -> "LabelingFunction":
        N, n, L = self.system.product_index, self.system.n, self.system.dimension
        if self.central.shape != (N, L):
            raise ValueError(f"central must have shape ({N}, {L}), got {self.central.shape}")
        if self.forward.shape != (N, n, L):
            raise ValueError(f"forward must have shape ({N}, {n}, {L}), got {self.forward.shape}")
        self.central = np.ascontiguousarray(self.central, dtype=np.int64)
        self.forward = np.ascontiguousarray(self.forward, dtype=np.int64)
        return self

    @property
    def size(self) -> int:
        return int(self.central.shape[0])

    def forward_cartesian(self) -> np.ndarray:
        return self.forward.astype(float) @ self.system.central.basis_matrix.T

    def central_cartesian(self) -> np.ndarray:
        return self.central.astype(float) @ self.system.central.basis_matrix.T
