"""
Distortion Weight Algebra

This module implements the weight aggregates used by the cost function:
- gamma_bar: sums of γ_ℓ over L^(n,κ), L_i^(n,κ) or L_{i,j}^(n,κ)
- hat_gamma_pair: pairwise coefficients of the cost decomposition
- hat_gamma_ell: side-distortion coefficient of a subset (with radius factors c_{i,j})
- check_centroid_decomposition: residual of the weighted-centroid cost decomposition
- check_weight_identities: numerical checks of the supporting sum identities
- check_norm_of_sum / check_weighted_mean_offset: the two squared-sum expansions
- check_radius_feasibility: triangle feasibility of the radius factors
"""

from itertools import combinations
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.utils.logger import get_logger
from src.weights.models import IndexSetFamily, Subset, WeightProfile

logger = get_logger(__name__)


class DegenerateWeightsError(ValueError):
    """Raised when γ̄(L^(n,κ)) is zero."""
    pass


class IdentityReport(BaseModel):
    """Maximum relative residual per identity."""

    n: int = Field(..., description="Number of descriptions checked")
    residuals: Dict[str, float] = Field(default_factory=dict)
    tolerance: float = Field(default=1e-9)

    @property
    def passed(self) -> bool:
        return all(r <= self.tolerance for r in self.residuals.values())

    @property
    def failures(self) -> List[str]:
        return [name for name, r in self.residuals.items() if r > self.tolerance]


# -------------------------------------------------------------------
# Aggregates
# -------------------------------------------------------------------

def _check_kappa(profile: WeightProfile, kappa: int) -> None:
    if not 1 <= kappa <= profile.n - 1:
        raise ValueError(f"kappa must be in [1, {profile.n - 1}], got {kappa}")


def gamma_bar(profile: WeightProfile, kappa: int, *members: int) -> float:
    """
    γ̄ over the κ-subsets containing all given members.

    gamma_bar(p, κ) is γ̄(L^(n,κ)), gamma_bar(p, κ, i) is γ̄(L_i^(n,κ)) and
    gamma_bar(p, κ, i, j) is γ̄(L_{i,j}^(n,κ)).
    """
    _check_kappa(profile, kappa)
    if any(not 0 <= m < profile.n for m in members):
        raise ValueError(f"member out of range for n={profile.n}: {members}")
    return float(sum(profile.gamma_of(s) for s in profile.family.containing(kappa, *members)))


def _total(profile: WeightProfile, kappa: int) -> float:
    total = gamma_bar(profile, kappa)
    if total <= 0:
        raise DegenerateWeightsError(f"gamma_bar is zero for kappa={kappa}")
    return total


def hat_gamma_pair(profile: WeightProfile, kappa: int, i: int, j: int) -> float:
    """(1/κ²)(γ̄(L_i)γ̄(L_j)/γ̄(L) − γ̄(L_{i,j})) for i ≠ j."""
    if i == j:
        raise ValueError("hat_gamma_pair needs two distinct descriptions")
    total = _total(profile, kappa)
    gi = gamma_bar(profile, kappa, i)
    gj = gamma_bar(profile, kappa, j)
    gij = gamma_bar(profile, kappa, i, j)
    return (gi * gj / total - gij) / (kappa * kappa)


def hat_gamma_ell(profile: WeightProfile, kappa: int, ell: Subset) -> float:
    """
    Side-distortion coefficient of subset ℓ with the profile's radius factors.

    Reduces to (γ_j² + γ_k² + γ_jγ_k)/γ̄² for n = 3, κ = 1 and to
    (1/4)(γ_{i,k}² + γ_{j,k}² + γ_{i,k}γ_{j,k})/γ̄² for n = 3, κ = 2 when c ≡ 1.
    """
    ell = tuple(sorted(ell))
    if len(ell) != kappa or len(set(ell)) != kappa or any(not 0 <= i < profile.n for i in ell):
        raise ValueError(f"subset {ell} is not in L^({profile.n},{kappa})")
    total = _total(profile, kappa)
    singles = [gamma_bar(profile, kappa, i) for i in range(profile.n)]
    c = profile.radius_factor

    spread = sum(singles[i] * c(i, j) for j in ell for i in range(profile.n) if i != j)
    inner = sum(c(a, b) for a, b in combinations(ell, 2))
    cross = sum(singles[i] * singles[j] * c(i, j) for i, j in combinations(range(profile.n), 2))
    return (total * spread - total * total * inner - cross) / (total * total * kappa * kappa)


def pairwise_weight_matrix(profile: WeightProfile) -> np.ndarray:
    """W[i, j] = Σ_κ hat_gamma_pair(κ, i, j), zero diagonal."""
    n = profile.n
    W = np.zeros((n, n))
    for kappa in range(1, n):
        for i, j in combinations(range(n), 2):
            w = hat_gamma_pair(profile, kappa, i, j)
            W[i, j] += w
            W[j, i] += w
    return W


def centroid_weights(profile: WeightProfile) -> List[Tuple[float, np.ndarray]]:
    """
    Per κ: (γ̄(L^(n,κ)), coefficients a_i) with the κ-level weighted centroid
    Σ_i a_i μ_i λ_i, a_i = γ̄(L_i)/(κγ̄(L)).
    """
    out = []
    for kappa in range(1, profile.n):
        total = _total(profile, kappa)
        coeffs = np.array([gamma_bar(profile, kappa, i) for i in range(profile.n)]) / (kappa * total)
        out.append((total, coeffs))
    return out


# -------------------------------------------------------------------
# Identity checks
# -------------------------------------------------------------------

def subset_distortion(lam_c: np.ndarray, scaled: np.ndarray, ell: Subset) -> float:
    """‖λ_c − (1/κ)Σ_{i∈ℓ} μ_iλ_i‖² for scaled rows μ_iλ_i."""
    mean = scaled[list(ell)].mean(axis=0)
    diff = lam_c - mean
    return float(diff @ diff)


def check_centroid_decomposition(profile: WeightProfile, kappa: int, lam_c: Sequence[float], lams: Sequence[Sequence[float]]) -> float:
    """
    Absolute residual of
    Σ_ℓ γ_ℓ‖λ_c − (1/κ)Σ_{i∈ℓ}μ_iλ_i‖² =
        γ̄‖λ_c − (1/(κγ̄))Σ_i γ̄(L_i)μ_iλ_i‖² + Σ_{i<j} hat_gamma_pair ‖μ_iλ_i − μ_jλ_j‖².
    """
    lam_c = np.asarray(lam_c, dtype=float)
    scaled = np.asarray(lams, dtype=float) * np.asarray(profile.mu)[:, None]
    if scaled.shape != (profile.n, lam_c.size):
        raise ValueError(f"expected {profile.n} vectors of length {lam_c.size}, got {scaled.shape}")

    lhs = sum(profile.gamma_of(s) * subset_distortion(lam_c, scaled, s) for s in profile.family.subsets(kappa))

    total = _total(profile, kappa)
    weights = np.array([gamma_bar(profile, kappa, i) for i in range(profile.n)])
    centroid = weights @ scaled / (kappa * total)
    rhs = total * float((lam_c - centroid) @ (lam_c - centroid))
    for i, j in combinations(range(profile.n), 2):
        d = scaled[i] - scaled[j]
        rhs += hat_gamma_pair(profile, kappa, i, j) * float(d @ d)
    return abs(lhs - rhs)


def _rel(lhs: float, rhs: float) -> float:
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def _pair_norms(profile: WeightProfile, kappa: int, V: np.ndarray) -> Tuple[float, float]:
    """(Σ_i γ̄(L_i)‖λ_i‖², Σ_{i<j} γ̄(L_{i,j})‖λ_i − λ_j‖²)."""
    singles = sum(gamma_bar(profile, kappa, i) * float(V[i] @ V[i]) for i in range(profile.n))
    pairs = 0.0
    for i, j in combinations(range(profile.n), 2):
        d = V[i] - V[j]
        pairs += gamma_bar(profile, kappa, i, j) * float(d @ d)
    return singles, pairs


def check_norm_of_sum(profile: WeightProfile, kappa: int, lams: Sequence[Sequence[float]]) -> float:
    """
    Relative residual of
    Σ_ℓ γ_ℓ‖Σ_{i∈ℓ}λ_i‖² = κΣ_i γ̄(L_i)‖λ_i‖² − Σ_{i<j} γ̄(L_{i,j})‖λ_i − λ_j‖².
    """
    _check_kappa(profile, kappa)
    V = np.asarray(lams, dtype=float)
    lhs = 0.0
    for s in profile.family.subsets(kappa):
        total = V[list(s)].sum(axis=0)
        lhs += profile.gamma_of(s) * float(total @ total)
    singles, pairs = _pair_norms(profile, kappa, V)
    return _rel(lhs, kappa * singles - pairs)


def check_weighted_mean_offset(
    profile: WeightProfile,
    kappa: int,
    lam_c: Sequence[float],
    lams: Sequence[Sequence[float]],
) -> float:
    """
    Relative residual of the expansion of Σ_ℓ γ_ℓ‖λ_c − (1/κ)Σ_{i∈ℓ}λ_i‖² into
    γ̄‖λ_c‖² − (2/κ)⟨λ_c, Σ_i γ̄(L_i)λ_i⟩ + (1/κ²)(κΣ_i γ̄(L_i)‖λ_i‖² − Σ_{i<j} γ̄(L_{i,j})‖λ_i − λ_j‖²).
    """
    _check_kappa(profile, kappa)
    c = np.asarray(lam_c, dtype=float)
    V = np.asarray(lams, dtype=float)
    lhs = sum(profile.gamma_of(s) * subset_distortion(c, V, s) for s in profile.family.subsets(kappa))
    weights = np.array([gamma_bar(profile, kappa, i) for i in range(profile.n)])
    singles, pairs = _pair_norms(profile, kappa, V)
    rhs = (
        gamma_bar(profile, kappa) * float(c @ c)
        - 2.0 / kappa * float(c @ (weights @ V))
        + (kappa * singles - pairs) / (kappa * kappa)
    )
    return _rel(lhs, rhs)


def check_weight_identities(
    profile: WeightProfile,
    lam_c: Sequence[float],
    lams: Sequence[Sequence[float]],
    tolerance: float = 1e-9,
) -> IdentityReport:
    """
    Check the sum identities behind the cost decomposition for every κ.
    Vectors are used unscaled (μ ≡ 1).

    Args:
        profile: Weight profile (n from 2 to 6)
        lam_c: Central vector
        lams: n sublattice vectors
        tolerance: Pass threshold on relative residuals

    Returns:
        IdentityReport with the worst residual per identity
    """
    n = profile.n
    if not 2 <= n <= 6:
        raise ValueError(f"identity checks support 2 <= n <= 6, got {n}")
    c = np.asarray(lam_c, dtype=float)
    V = np.asarray(lams, dtype=float)
    ip = V @ V.T
    sq = np.diag(ip)

    worst: Dict[str, float] = {
        "complement_sum": 0.0,
        "pair_sum": 0.0,
        "weighted_inner_product": 0.0,
        "single_weight_pair_norms": 0.0,
        "pair_weight_pair_norms": 0.0,
        "norm_of_sum": 0.0,
        "weighted_mean_offset": 0.0,
        "centroid_decomposition": 0.0,
    }

    def record(name: str, value: float) -> None:
        worst[name] = max(worst[name], value)

    family = IndexSetFamily(n)
    pairs = list(combinations(range(n), 2))
    for kappa in range(1, n):
        total = gamma_bar(profile, kappa)
        g = [gamma_bar(profile, kappa, i) for i in range(n)]
        gg = {(i, j): (g[i] if i == j else gamma_bar(profile, kappa, i, j)) for i in range(n) for j in range(n)}

        for i in range(n):
            record("complement_sum", _rel(sum(g[j] for j in range(n) if j != i), kappa * total - g[i]))
            record("pair_sum", _rel(sum(gg[(i, j)] for j in range(n)), kappa * g[i]))

        subsets = family.subsets(kappa)
        lhs = sum(profile.gamma_of(s) * float(c @ V[list(s)].sum(axis=0)) for s in subsets)
        record("weighted_inner_product", _rel(lhs, float(c @ (np.asarray(g) @ V))))

        lhs = sum(g[i] * g[j] * (sq[i] + sq[j] - 2 * ip[i, j]) for i, j in pairs)
        rhs = sum(g[i] * (kappa * total - g[i]) * sq[i] for i in range(n)) - 2 * sum(g[i] * g[j] * ip[i, j] for i, j in pairs)
        record("single_weight_pair_norms", _rel(lhs, rhs))

        lhs = sum(gg[(i, j)] * (sq[i] + sq[j] - 2 * ip[i, j]) for i, j in pairs)
        rhs = (kappa - 1) * sum(g[i] * sq[i] for i in range(n)) - 2 * sum(gg[(i, j)] * ip[i, j] for i, j in pairs)
        record("pair_weight_pair_norms", _rel(lhs, rhs))

        record("norm_of_sum", check_norm_of_sum(profile, kappa, V))
        if total > 0:
            record("weighted_mean_offset", check_weighted_mean_offset(profile, kappa, c, V))

        if total > 0:
            unit = profile.model_copy(update={"mu": [1.0] * n})
            lhs = sum(profile.gamma_of(s) * subset_distortion(c, V, s) for s in subsets)
            record("centroid_decomposition", check_centroid_decomposition(unit, kappa, c, V) / max(1.0, abs(lhs)))

    report = IdentityReport(n=n, residuals=worst, tolerance=tolerance)
    if not report.passed:
        logger.warning(f"Weight identities failed for n={n}: {report.failures}")
    return report


def random_profile(n: int, rng: np.random.Generator, with_mu: bool = True) -> WeightProfile:
    """Random positive profile for property checks."""
    family = IndexSetFamily(n)
    gamma = {"".join(map(str, s)): float(rng.uniform(0.1, 2.0)) for k in range(1, n) for s in family.subsets(k)}
    mu = rng.uniform(0.5, 1.5, size=n).tolist() if with_mu else [1.0] * n
    return WeightProfile(n=n, gamma=gamma, mu=mu)


# -------------------------------------------------------------------
# Radius factors
# -------------------------------------------------------------------

def check_radius_feasibility(profile: WeightProfile, tolerance: float = 1e-12) -> List[Tuple[int, int, int]]:
    """
    Triples (i, j, k) violating r_{i,k} ≤ r_{i,j} + r_{j,k} with r_{a,b} = c_{a,b}·r.

    Returns:
        Infeasible triples (empty when the factors are consistent)
    """
    c = profile.radius_factor
    bad = []
    for i, j, k in combinations(range(profile.n), 3):
        for a, b, mid in ((i, k, j), (i, j, k), (j, k, i)):
            if c(a, b) > c(a, mid) + c(mid, b) + tolerance:
                bad.append((a, mid, b))
    if bad:
        logger.warning(f"Radius factors violate the triangle inequality for {bad}")
    return bad
