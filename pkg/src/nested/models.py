"""
Nested Lattice Models

This module defines Pydantic v2 models for the lattice hierarchy Λ_π ⊂ Λ_i ⊂ Λ_c:
- IndexKind / IndexSpec: similarity choices that generate a sublattice
- ProductRule: how the product lattice index is formed
- SublatticeSpec: integer scale matrix over the central basis
- NestedSystem: central lattice, n sublattices, product lattice, description weights
"""

from enum import Enum
from typing import List

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, field_validator, model_validator, ConfigDict

from src.lattice.models import LatticeName, LatticeSpec

DESCRIPTOR_VERSION = 1


class IndexKind(str, Enum):
    """Similarity families that keep Λ_i similar to Λ_c."""
    SCALAR = "scalar"          # K·I on any lattice, index K^L
    GAUSSIAN = "gaussian"      # a+bi on Z², index a²+b²
    EISENSTEIN = "eisenstein"  # a+bω on A2, index a²+ab+b²


class ProductRule(str, Enum):
    """Product lattice convention."""
    DEDUPLICATED = "deduplicated"  # repeated scale matrices used once; all equal gives M²
    FULL = "full"                  # product of every scale matrix


class IndexSpec(BaseModel):
    """
    One sublattice choice.

    Example:
        >>> IndexSpec(kind=IndexKind.GAUSSIAN, a=2, b=1).scale_matrix(LatticeSpec.make("Z", 2))
        [[2, -1], [1, 2]]
    """

    kind: IndexKind = Field(default=IndexKind.SCALAR, description="Similarity family")
    a: int = Field(..., description="Scalar factor, or real part of the multiplier")
    b: int = Field(default=0, description="Imaginary part of the multiplier (0 for scalar)")

    model_config = ConfigDict(str_strip_whitespace=True, frozen=True)

    @model_validator(mode="after")
    def validate_multiplier(self) -> "IndexSpec":
        if self.kind == IndexKind.SCALAR and (self.a < 1 or self.b != 0):
            raise ValueError(f"scalar index needs a >= 1 and b = 0, got a={self.a}, b={self.b}")
        if self.kind != IndexKind.SCALAR and self.a == 0 and self.b == 0:
            raise ValueError("multiplier must be non-zero")
        return self

    def scale_matrix(self, central: LatticeSpec) -> List[List[int]]:
        """Integer matrix M with sublattice basis = central basis · M."""
        L = central.dimension
        if self.kind == IndexKind.SCALAR:
            return (self.a * np.eye(L, dtype=np.int64)).tolist()
        if self.kind == IndexKind.GAUSSIAN:
            if central.name != LatticeName.Z or L != 2:
                raise ValueError("Gaussian multipliers need the Z^2 central lattice")
            return [[self.a, -self.b], [self.b, self.a]]
        if central.name != LatticeName.A2:
            raise ValueError("Eisenstein multipliers need the A2 central lattice")
        return [[self.a, -self.b], [self.b, self.a + self.b]]


class SublatticeSpec(BaseModel):
    """A sublattice given by an integer scale matrix over the central basis."""

    scale_matrix: List[List[int]] = Field(..., description="L x L integer matrix")

    model_config = ConfigDict(frozen=True)

    @field_validator("scale_matrix")
    @classmethod
    def validate_square(cls, v: List[List[int]]) -> List[List[int]]:
        if len(v) == 0 or any(len(row) != len(v) for row in v):
            raise ValueError("scale_matrix must be square")
        if round(abs(np.linalg.det(np.asarray(v, dtype=float)))) < 1:
            raise ValueError("scale_matrix is singular")
        return v

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.scale_matrix, dtype=np.int64)

    @property
    def index(self) -> int:
        """N = |det(scale_matrix)| (exact integer)."""
        return int(round(abs(np.linalg.det(self.matrix.astype(float)))))

    @property
    def nesting_ratio(self) -> float:
        """N′ = N^{1/L}."""
        return self.index ** (1.0 / len(self.scale_matrix))


class NestedSystem(BaseModel):
    """
    Central lattice with n similar sublattices and their product lattice.

    Built by src.nested.system.build_nested; holds lazily built cell
    lookup tables in private attributes.
    """

    central: LatticeSpec = Field(..., description="Central lattice Λ_c")
    index_specs: List[IndexSpec] = Field(..., description="Similarity choice per description")
    subs: List[SublatticeSpec] = Field(..., description="Sublattice Λ_i per description")
    product: SublatticeSpec = Field(..., description="Product lattice Λ_π")
    mu: List[float] = Field(..., description="Description weights μ_i")
    product_rule: ProductRule = Field(default=ProductRule.DEDUPLICATED)

    model_config = ConfigDict(frozen=True)

    _cache: dict = PrivateAttr(default_factory=dict)

    @field_validator("mu")
    @classmethod
    def validate_mu(cls, v: List[float]) -> List[float]:
        if any(m <= 0 for m in v):
            raise ValueError(f"description weights must be positive, got {v}")
        return v

    @model_validator(mode="after")
    def validate_counts(self) -> "NestedSystem":
        n = len(self.subs)
        if n < 2:
            raise ValueError(f"need at least two descriptions, got {n}")
        if len(self.index_specs) != n or len(self.mu) != n:
            raise ValueError("index_specs, subs and mu must have one entry per description")
        return self

    @property
    def n(self) -> int:
        return len(self.subs)

    @property
    def dimension(self) -> int:
        return self.central.dimension

    @property
    def indices(self) -> List[int]:
        """Sublattice indices N_i."""
        return [s.index for s in self.subs]

    @property
    def product_index(self) -> int:
        """N_π."""
        return self.product.index

    @property
    def central_volume(self) -> float:
        """ν_c."""
        return self.central.cell_volume

    @property
    def product_volume(self) -> float:
        """ν_π = N_π ν_c."""
        return self.product_index * self.central_volume

    def descriptor(self) -> dict:
        """Versioned JSON-ready descriptor."""
        return {
            "version": DESCRIPTOR_VERSION,
            "lattice": {
                "name": self.central.name.value,
                "dimension": self.central.dimension,
                "scale": self.central.scale,
            },
            "subs": [spec.model_dump(mode="json") for spec in self.index_specs],
            "scale_matrices": [s.scale_matrix for s in self.subs],
            "product_matrix": self.product.scale_matrix,
            "mu": list(self.mu),
            "product_rule": self.product_rule.value,
        }
