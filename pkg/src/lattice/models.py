"""
Lattice Domain Models

This module defines Pydantic v2 models for the concrete lattices:
- LatticeName: supported lattice family (Z^L, A2, D4)
- LatticeSpec: basis, cell volume and normalized second moment
- LatticePoint: a lattice point with Cartesian and integer basis coordinates
"""

import math
from enum import Enum
from typing import List

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator, ConfigDict


class LatticeName(str, Enum):
    """Supported lattice family."""
    Z = "Z"    # integer lattice, any dimension
    A2 = "A2"  # hexagonal lattice, L = 2
    D4 = "D4"  # checkerboard lattice, L = 4


# Normalized second moments G(Λ).
SECOND_MOMENTS = {
    LatticeName.Z: 1.0 / 12.0,
    LatticeName.A2: 5.0 / (36.0 * math.sqrt(3.0)),
    LatticeName.D4: 0.0766032,
}

# Unscaled generator matrices (columns are generators).
UNIT_BASES = {
    LatticeName.A2: [[1.0, 0.5], [0.0, math.sqrt(3.0) / 2.0]],
    LatticeName.D4: [
        [-1.0, 1.0, 0.0, 0.0],
        [-1.0, -1.0, 1.0, 0.0],
        [0.0, 0.0, -1.0, 1.0],
        [0.0, 0.0, 0.0, -1.0],
    ],
}

# Voronoi-relevant vectors in basis coordinates (up to sign), used for tie checks.
_A2_RELEVANT = [[1, 0], [0, 1], [1, -1]]


class LatticeSpec(BaseModel):
    """
    A concrete lattice with an exact nearest-point rule.

    Example:
        >>> lat = LatticeSpec.make(LatticeName.A2)
        >>> round(lat.cell_volume, 6)
        0.866025
    """

    name: LatticeName = Field(..., description="Lattice family tag")
    dimension: int = Field(..., ge=1, description="Lattice dimension L")
    basis: List[List[float]] = Field(
        ...,
        description="L x L generator matrix, columns are generators"
    )
    scale: float = Field(default=1.0, gt=0, description="Uniform scale applied to the unit lattice")
    second_moment: float = Field(..., gt=0, description="Normalized second moment G")

    model_config = ConfigDict(str_strip_whitespace=True, frozen=True)

    @field_validator("basis")
    @classmethod
    def validate_basis(cls, v: List[List[float]]) -> List[List[float]]:
        """Basis must be square and non-singular."""
        size = len(v)
        if size == 0 or any(len(row) != size for row in v):
            raise ValueError("basis must be a non-empty square matrix")
        if abs(float(np.linalg.det(np.asarray(v, dtype=float)))) <= 1e-12:
            raise ValueError("basis is singular")
        return v

    @model_validator(mode="after")
    def validate_dimension(self) -> "LatticeSpec":
        """Dimension agrees with the basis and the family."""
        if len(self.basis) != self.dimension:
            raise ValueError(f"basis is {len(self.basis)}x{len(self.basis)}, dimension is {self.dimension}")
        if self.name == LatticeName.A2 and self.dimension != 2:
            raise ValueError("A2 is two-dimensional")
        if self.name == LatticeName.D4 and self.dimension != 4:
            raise ValueError("D4 is four-dimensional")
        return self

    @classmethod
    def make(cls, name: LatticeName, dimension: int = 0, scale: float = 1.0) -> "LatticeSpec":
        """
        Build a supported lattice.

        Args:
            name: Lattice family
            dimension: Required for Z (ignored for A2/D4)
            scale: Uniform scale; the cell volume becomes scale^L times the unit volume

        Returns:
            LatticeSpec
        """
        name = LatticeName(name)
        if name == LatticeName.Z:
            if dimension < 1:
                raise ValueError("Z lattice needs a positive dimension")
            unit = np.eye(dimension)
        else:
            unit = np.asarray(UNIT_BASES[name], dtype=float)
            dimension = unit.shape[0]
        return cls(
            name=name,
            dimension=dimension,
            basis=(unit * scale).tolist(),
            scale=scale,
            second_moment=SECOND_MOMENTS[name],
        )

    @property
    def basis_matrix(self) -> np.ndarray:
        """Generator matrix as a numpy array."""
        return np.asarray(self.basis, dtype=float)

    @property
    def cell_volume(self) -> float:
        """Cell volume ν = |det(basis)|."""
        return abs(float(np.linalg.det(self.basis_matrix)))

    @property
    def covering_radius(self) -> float:
        """Exact covering radius of the supported lattice."""
        if self.name == LatticeName.Z:
            return self.scale * math.sqrt(self.dimension) / 2.0
        if self.name == LatticeName.A2:
            return self.scale / math.sqrt(3.0)
        return self.scale

    @property
    def relevant_vectors(self) -> np.ndarray:
        """Voronoi-relevant vectors in basis coordinates, both signs."""
        if self.name == LatticeName.Z:
            half = np.eye(self.dimension, dtype=np.int64)
        elif self.name == LatticeName.A2:
            half = np.asarray(_A2_RELEVANT, dtype=np.int64)
        else:
            # The 24 minimal vectors of D4: permutations of (±1, ±1, 0, 0).
            roots = []
            for a in range(4):
                for b in range(a + 1, 4):
                    for sb in (1, -1):
                        v = np.zeros(4)
                        v[a], v[b] = 1.0, float(sb)
                        roots.append(v)
            unit = np.asarray(UNIT_BASES[LatticeName.D4], dtype=float)
            half = np.rint(np.linalg.solve(unit, np.asarray(roots).T).T).astype(np.int64)
        return np.vstack([half, -half])


class LatticePoint(BaseModel):
    """A lattice point: Cartesian coordinates plus exact integer basis coordinates."""

    coords: List[float] = Field(..., description="Cartesian coordinates")
    basis_coords: List[int] = Field(..., description="Integer coordinates in the lattice basis")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def validate_lengths(self) -> "LatticePoint":
        if len(self.coords) != len(self.basis_coords):
            raise ValueError("coords and basis_coords differ in length")
        return self

    @property
    def dimension(self) -> int:
        return len(self.coords)


if __name__ == "__main__":
    """Example usage of lattice models."""

    for lat_name in LatticeName:
        lat = LatticeSpec.make(lat_name, dimension=2)
        print(f"{lat.name.value}: L={lat.dimension}, nu={lat.cell_volume:.6f}, G={lat.second_moment:.7f}")
