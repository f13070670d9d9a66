"""
Distortion Weight Models

This module defines the index-set family L^(n,κ) and the WeightProfile model:
- subsets are tuples of sorted description indices, identified by bitmask
- WeightProfile holds γ_ℓ per subset, μ_i per description and optional radius factors c_{i,j}
"""

from itertools import combinations
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator, ConfigDict

Subset = Tuple[int, ...]


class WeightProfileError(ValueError):
    """Raised when a weight profile document is invalid."""
    pass


def subset_key(subset: Subset) -> str:
    """JSON key of a subset: its sorted digits, e.g. (0, 2) -> "02"."""
    return "".join(str(i) for i in sorted(subset))


def parse_subset_key(key: str) -> Subset:
    """Inverse of subset_key."""
    if not key or not key.isdigit():
        raise ValueError(f"invalid subset key {key!r}")
    subset = tuple(int(ch) for ch in key)
    if len(set(subset)) != len(subset):
        raise ValueError(f"repeated description in subset key {key!r}")
    return tuple(sorted(subset))


def subset_mask(subset: Subset) -> int:
    """Bitmask identity of a subset."""
    mask = 0
    for i in subset:
        mask |= 1 << i
    return mask


class IndexSetFamily:
    """
    The families L^(n,κ) of κ-subsets of {0, ..., n-1} in lexicographic order.

    Example:
        >>> fam = IndexSetFamily(3)
        >>> fam.subsets(2)
        [(0, 1), (0, 2), (1, 2)]
    """

    def __init__(self, n: int):
        if n < 1 or n > 10:
            raise ValueError(f"number of descriptions must be in [1, 10], got {n}")
        self.n = n
        self._by_kappa: Dict[int, List[Subset]] = {
            k: list(combinations(range(n), k)) for k in range(1, n + 1)
        }

    def subsets(self, kappa: int) -> List[Subset]:
        """All of L^(n,κ)."""
        if kappa not in self._by_kappa:
            raise ValueError(f"kappa must be in [1, {self.n}], got {kappa}")
        return self._by_kappa[kappa]

    def containing(self, kappa: int, *members: int) -> List[Subset]:
        """L_i^(n,κ) or L_{i,j}^(n,κ): the κ-subsets that contain every given member."""
        return [s for s in self.subsets(kappa) if all(m in s for m in members)]

    def all_subsets(self) -> List[Subset]:
        """Every non-empty subset, ordered by size then lexicographically."""
        return [s for k in range(1, self.n + 1) for s in self._by_kappa[k]]


class WeightProfile(BaseModel):
    """
    Distortion weights γ_ℓ, description weights μ_i and radius factors c_{i,j}.

    JSON form: {"n": 3, "gamma": {"0": ..., "01": ...}, "mu": [...], "c": {"01": ...}}.
    Missing γ entries are zero.

    Example:
        >>> profile = WeightProfile.symmetric(3)
        >>> profile.gamma_of((0, 1))
        1.0
    """

    n: int = Field(..., ge=2, le=10, description="Number of descriptions")
    gamma: Dict[str, float] = Field(default_factory=dict, description="γ_ℓ keyed by subset digits")
    mu: List[float] = Field(default_factory=list, description="Description weights μ_i (default 1)")
    c: Optional[Dict[str, float]] = Field(default=None, description="Radius factors c_{i,j} keyed by pair digits")

    model_config = ConfigDict(str_strip_whitespace=True)

    @field_validator("gamma")
    @classmethod
    def validate_gamma(cls, v: Dict[str, float]) -> Dict[str, float]:
        out = {}
        for key, value in v.items():
            if value < 0:
                raise ValueError(f"gamma[{key}] must be non-negative, got {value}")
            out[subset_key(parse_subset_key(key))] = float(value)
        return out

    @field_validator("c")
    @classmethod
    def validate_c(cls, v: Optional[Dict[str, float]]) -> Optional[Dict[str, float]]:
        if v is None:
            return v
        out = {}
        for key, value in v.items():
            pair = parse_subset_key(key)
            if len(pair) != 2:
                raise ValueError(f"radius factor key {key!r} is not a pair")
            if value <= 0:
                raise ValueError(f"c[{key}] must be positive, got {value}")
            out[subset_key(pair)] = float(value)
        return out

    @model_validator(mode="after")
    def validate_profile(self) -> "WeightProfile":
        if not self.mu:
            self.mu = [1.0] * self.n
        if len(self.mu) != self.n:
            raise ValueError(f"mu has {len(self.mu)} entries, expected {self.n}")
        if any(m <= 0 for m in self.mu):
            raise ValueError(f"mu must be positive, got {self.mu}")
        for key in list(self.gamma) + list(self.c or {}):
            if max(parse_subset_key(key)) >= self.n:
                raise ValueError(f"subset {key!r} names a description >= n={self.n}")
        family = IndexSetFamily(self.n)
        for kappa in range(1, self.n):
            if sum(self.gamma_of(s) for s in family.subsets(kappa)) <= 0:
                raise ValueError(f"weights for kappa={kappa} sum to zero")
        return self

    @classmethod
    def symmetric(cls, n: int, per_kappa: Optional[Dict[int, float]] = None, mu: Optional[List[float]] = None) -> "WeightProfile":
        """Equal γ within each κ (default 1)."""
        family = IndexSetFamily(n)
        per_kappa = per_kappa or {}
        gamma = {
            subset_key(s): float(per_kappa.get(k, 1.0))
            for k in range(1, n)
            for s in family.subsets(k)
        }
        return cls(n=n, gamma=gamma, mu=mu or [1.0] * n)

    @classmethod
    def two_channel(cls, gamma0: float, gamma1: float, mu: Optional[List[float]] = None) -> "WeightProfile":
        """Two-description profile with side weights γ_0, γ_1."""
        return cls(n=2, gamma={"0": gamma0, "1": gamma1}, mu=mu or [1.0, 1.0])

    @property
    def family(self) -> IndexSetFamily:
        return IndexSetFamily(self.n)

    def gamma_of(self, subset: Subset) -> float:
        return self.gamma.get(subset_key(subset), 0.0)

    def radius_factor(self, i: int, j: int) -> float:
        """c_{i,j} (default 1)."""
        if i == j:
            raise ValueError("radius factor needs two distinct descriptions")
        if not self.c:
            return 1.0
        return self.c.get(subset_key((i, j)), 1.0)

    @property
    def has_radius_factors(self) -> bool:
        return bool(self.c) and any(v != 1.0 for v in self.c.values())


def profile_from_dict(data: dict) -> WeightProfile:
    """
    Validate a weight profile document.

    Raises:
        WeightProfileError: With every validation problem in one message
    """
    try:
        return WeightProfile.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(err["msg"] for err in e.errors())
        raise WeightProfileError(f"invalid weight profile: {problems}") from e
