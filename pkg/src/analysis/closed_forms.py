"""
Closed-Form Rate-Distortion Predictions

This module evaluates the high-resolution predictions for the labeling:
- two- and three-description side distortions (index and rate forms)
- central distortion, description rates and index-from-rate inversion
- the distortion product and its Gaussian limit
- the Gaussian MMSE inner bound for three descriptions
- rate loss, random-binning threshold and binned distortion forms
- the upper bound on admissible sublattice indices
- closed_form_report: every prediction for one system, keyed by descriptive id
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field, model_validator
from scipy.optimize import brentq

from src.analysis.special import UnsupportedDimensionError, phi, phi_infinity, psi3, psi3_infinity, psi_closed_form
from src.lattice.core import sphere_second_moment, unit_sphere_volume
from src.lattice.models import LatticeSpec
from src.utils.logger import get_logger
from src.weights.algebra import hat_gamma_ell
from src.weights.models import IndexSetFamily, Subset, WeightProfile, subset_key

logger = get_logger(__name__)

# Normalized second moment of the body-centred cubic lattice.
G_BCC = 0.0785433
TWO_PI_E = 2.0 * math.pi * math.e


class InfeasibleRateError(ValueError):
    """Raised when a requested rate needs an index below one."""
    pass


class ParameterRangeError(ValueError):
    """Raised when a parameter lies outside the range of a closed form."""
    pass


# -------------------------------------------------------------------
# Entropy, rates and indices
# -------------------------------------------------------------------

def gaussian_entropy(L: int, sigma2: float = 1.0) -> float:
    """Differential entropy (bits) of an L-vector of i.i.d. N(0, σ²): (L/2)log₂(2πeσ²)."""
    if sigma2 <= 0:
        raise ParameterRangeError(f"variance must be positive, got {sigma2}")
    return 0.5 * L * math.log2(TWO_PI_E * sigma2)


def rates(h: float, L: int, nu_c: float, indices: Sequence[float], mu: Sequence[float]) -> Tuple[float, List[float]]:
    """
    Central and side rates in bits per dimension.

    R_c = h/L − (1/L)log₂ν_c and R_i = R_c − (1/L)log₂(N_iμ_i).
    """
    if nu_c <= 0:
        raise ParameterRangeError(f"cell volume must be positive, got {nu_c}")
    if any(N < 1 for N in indices) or any(m <= 0 for m in mu):
        raise ParameterRangeError("indices must be >= 1 and description weights positive")
    r_c = h / L - math.log2(nu_c) / L
    return r_c, [r_c - math.log2(N * m) / L for N, m in zip(indices, mu)]


def index_from_rate(h: float, L: int, nu_c: float, rate: float, mu: float = 1.0) -> float:
    """
    Inverse of the side-rate formula: N_i = 2^{h − L R_i}/(ν_c μ_i).

    Raises:
        InfeasibleRateError: If the resulting index is below one
    """
    N = 2.0 ** (h - L * rate) / (nu_c * mu)
    if N < 1.0 - 1e-12:
        raise InfeasibleRateError(f"side rate {rate} exceeds the central rate (index {N:.4g} < 1)")
    return N


def central_distortion(lattice: LatticeSpec, nu_c: Optional[float] = None) -> float:
    """D̄_c = G(Λ_c) ν_c^{2/L} (per dimension)."""
    volume = lattice.cell_volume if nu_c is None else nu_c
    return lattice.second_moment * volume ** (2.0 / lattice.dimension)


# -------------------------------------------------------------------
# Side distortions
# -------------------------------------------------------------------

def _two_channel_weights(profile: WeightProfile) -> Tuple[float, float]:
    if profile.n != 2:
        raise ParameterRangeError(f"two-channel forms need n=2, got n={profile.n}")
    g0, g1 = profile.gamma_of((0,)), profile.gamma_of((1,))
    total = (g0 + g1) ** 2
    return g1 * g1 / total, g0 * g0 / total


def theoretical_distortion2(profile: WeightProfile, L: int, nu_c: float, N0: float, N1: float) -> Tuple[float, float]:
    """
    D̄_i = (γ_j²/(γ_0+γ_1)²) G(S_L) ν_c^{2/L} (N_0N_1μ_0μ_1)^{2/L}.
    """
    c0, c1 = _two_channel_weights(profile)
    scale = sphere_second_moment(L) * nu_c ** (2.0 / L) * (N0 * N1 * profile.mu[0] * profile.mu[1]) ** (2.0 / L)
    return c0 * scale, c1 * scale


def theoretical_distortion2_rates(profile: WeightProfile, L: int, h: float, r_c: float, r0: float, r1: float) -> Tuple[float, float]:
    """Rate form: D̄_i = (γ_j²/(γ_0+γ_1)²) G(S_L) 2^{(2/L)h + 2(R_c − R_0 − R_1)}."""
    c0, c1 = _two_channel_weights(profile)
    scale = sphere_second_moment(L) * 2.0 ** ((2.0 / L) * h + 2.0 * (r_c - r0 - r1))
    return c0 * scale, c1 * scale


def product_lattice_distortion2(profile: WeightProfile, L: int, nu_c: float, N0: float, N1: float, g_product: float) -> Tuple[float, float]:
    """Two-channel comparison formula: G(S_L) replaced by G(Λ_π)."""
    d0, d1 = theoretical_distortion2(profile, L, nu_c, N0, N1)
    ratio = g_product / sphere_second_moment(L)
    return d0 * ratio, d1 * ratio


def product_lattice_gap_db(L: int, g_product: float) -> float:
    """10 log₁₀(G(Λ_π)/G(S_L)); about 0.2 dB for Z²."""
    return 10.0 * math.log10(g_product / sphere_second_moment(L))


def hat_gamma_three(profile: WeightProfile, ell: Subset) -> float:
    """
    Three-description side coefficients in their direct form:
    (γ_j² + γ_k² + γ_jγ_k)/(Σγ_i)² for ℓ = {i} and
    (1/4)(γ_{i,k}² + γ_{j,k}² + γ_{i,k}γ_{j,k})/(Σγ_{a,b})² for ℓ = {i, j}.
    """
    if profile.n != 3:
        raise ParameterRangeError(f"three-channel forms need n=3, got n={profile.n}")
    ell = tuple(sorted(ell))
    others = [k for k in range(3) if k not in ell]
    if len(ell) == 1:
        gj, gk = (profile.gamma_of((k,)) for k in others)
        total = sum(profile.gamma_of((i,)) for i in range(3))
        return (gj * gj + gk * gk + gj * gk) / total ** 2
    if len(ell) == 2:
        k = others[0]
        a = profile.gamma_of(tuple(sorted((ell[0], k))))
        b = profile.gamma_of(tuple(sorted((ell[1], k))))
        total = sum(profile.gamma_of(s) for s in IndexSetFamily(3).subsets(2))
        return 0.25 * (a * a + b * b + a * b) / total ** 2
    raise ParameterRangeError(f"subset {ell} has no side-distortion coefficient")


def theoretical_distortion3(profile: WeightProfile, L: int, nu_c: float, indices: Sequence[float]) -> Dict[Subset, float]:
    """
    D̄_ℓ = γ̂_ℓ Φ_L G(S_L) ν_c^{2/L} (μ_0μ_1μ_2 N_0N_1N_2)^{1/L} for every proper ℓ.
    """
    if profile.n != 3 or len(indices) != 3:
        raise ParameterRangeError("three-channel forms need n=3 and three indices")
    scale = phi(L) * sphere_second_moment(L) * nu_c ** (2.0 / L) * (math.prod(profile.mu) * math.prod(indices)) ** (1.0 / L)
    family = IndexSetFamily(3)
    return {ell: hat_gamma_ell(profile, k, ell) * scale for k in (1, 2) for ell in family.subsets(k)}


def theoretical_distortion3_rates(profile: WeightProfile, L: int, h: float, r_c: float, side_rates: Sequence[float]) -> Dict[Subset, float]:
    """Rate form: D̄_ℓ = γ̂_ℓ Φ_L G(S_L) 2^{(2/L)h + R_c − ΣR_i}."""
    if profile.n != 3 or len(side_rates) != 3:
        raise ParameterRangeError("three-channel forms need n=3 and three side rates")
    scale = phi(L) * sphere_second_moment(L) * 2.0 ** ((2.0 / L) * h + r_c - sum(side_rates))
    family = IndexSetFamily(3)
    return {ell: hat_gamma_ell(profile, k, ell) * scale for k in (1, 2) for ell in family.subsets(k)}


# -------------------------------------------------------------------
# Distortion product
# -------------------------------------------------------------------

def distortion_product3(L: int, rate: float, h: float, g_central: float) -> float:
    """
    Symmetric three-description product D̄_c·D̄_i·D̄_{i,j}
    = (1/36) Φ_L² G(S_L)² G_c 2^{(6/L)h − 6R}; independent of R_c.
    """
    return phi(L) ** 2 * sphere_second_moment(L) ** 2 * g_central * 2.0 ** ((6.0 / L) * h - 6.0 * rate) / 36.0


def gaussian_limit_product(rate: float, sigma2: float = 1.0) -> float:
    """Large-L Gaussian limit σ⁶ 2^{−6R}/27."""
    return sigma2 ** 3 * 2.0 ** (-6.0 * rate) / 27.0


class InnerBoundPoint(BaseModel):
    """Gaussian three-description inner-bound point for correlation ρ."""

    rho: float
    sigma_q2: float = Field(..., gt=0)
    mmse: List[float] = Field(..., description="MMSE_1, MMSE_2, MMSE_3")
    exact_mmse: List[float] = Field(..., description="MMSE_m without the high-resolution approximation")
    product: float = Field(..., ge=0, description="MMSE_1·MMSE_2·MMSE_3")


def _check_rho(rho: float) -> None:
    if not -0.5 < rho <= 0.5:
        raise ParameterRangeError(f"correlation must lie in (-1/2, 1/2], got {rho}")


def gaussian_inner_bound(rho: float, rate: Optional[float] = None, sigma_q2: Optional[float] = None) -> InnerBoundPoint:
    """
    MMSE of a unit-variance Gaussian estimated from m of three descriptions
    with quantization noise variance σ_q² and pairwise noise correlation ρ.

    Args:
        rho: Noise correlation in (-1/2, 1/2]
        rate: Per-description rate R (bits), used to derive σ_q² exactly
        sigma_q2: Noise variance given directly (takes precedence over rate)
    """
    _check_rho(rho)
    if sigma_q2 is None:
        if rate is None:
            raise ParameterRangeError("either rate or sigma_q2 is required")
        denom = (1.0 - rho) * 2.0 ** (2.0 * rate) * ((1.0 + 2.0 * rho) / (1.0 - rho)) ** (1.0 / 3.0) - 1.0
        if denom <= 0:
            raise ParameterRangeError(f"rate {rate} is too low for rho={rho}")
        sigma_q2 = 1.0 / denom
    if sigma_q2 <= 0:
        raise ParameterRangeError(f"sigma_q2 must be positive, got {sigma_q2}")

    spread = [1.0 + (m - 1) * rho for m in (1, 2, 3)]
    mmse = [sigma_q2 * s / m for m, s in zip((1, 2, 3), spread)]
    exact = [sigma_q2 * s / (m + sigma_q2 * s) for m, s in zip((1, 2, 3), spread)]
    return InnerBoundPoint(rho=rho, sigma_q2=sigma_q2, mmse=mmse, exact_mmse=exact, product=math.prod(mmse))


def inner_bound_high_rate_product(rho: float, rate: float) -> float:
    """(1/6)(1+ρ)(1−ρ)^{−2} 2^{−6R}; tends to 2^{−6R}/27 as ρ → −1/2."""
    _check_rho(rho)
    return (1.0 + rho) * (1.0 - rho) ** -2 * 2.0 ** (-6.0 * rate) / 6.0


# -------------------------------------------------------------------
# Rate loss and binning
# -------------------------------------------------------------------

def rate_loss(L: int, g_central: float) -> float:
    """
    Symmetric-case rate loss in bits per dimension,
    (1/6)log₂Φ_L² + (1/6)log₂(3/4) + (1/6)log₂(G(S_L)² G_c (2πe)³).
    """
    g_s = sphere_second_moment(L)
    return (math.log2(phi(L) ** 2) + math.log2(0.75) + math.log2(g_s * g_s * g_central * TWO_PI_E ** 3)) / 6.0


def rate_loss_limit() -> float:
    """Rate loss with Φ_∞ and G = 1/(2πe); zero."""
    g = 1.0 / TWO_PI_E
    return (math.log2(phi_infinity() ** 2) + math.log2(0.75) + math.log2(g ** 3 * TWO_PI_E ** 3)) / 6.0


def binning_threshold(rate: float, nesting_ratio: float, L: int, psi: Optional[float] = None) -> float:
    """Smallest binning rate: R_b > R/2 + (1/2)log₂(ψ_{3,L}√N′)."""
    if nesting_ratio < 1:
        raise ParameterRangeError(f"nesting ratio must be >= 1, got {nesting_ratio}")
    psi = psi3(L) if psi is None else psi
    return rate / 2.0 + 0.5 * math.log2(psi * math.sqrt(nesting_ratio))


def binned_distortions(binning_rate: float, nesting_ratio: float, psi: Optional[float] = None) -> Tuple[float, float]:
    """
    Two-description and central distortions in binned form:
    D̄_{i,j} = N′² ψ⁴ 2^{−4R_b}/12 and D_c = ψ² 2^{−4R_b}/N′.
    """
    psi = psi3_infinity() if psi is None else psi
    factor = 2.0 ** (-4.0 * binning_rate)
    return nesting_ratio ** 2 * psi ** 4 * factor / 12.0, psi ** 2 * factor / nesting_ratio


def inner_bound_binned(rho: float, binning_rate: float) -> Tuple[float, float]:
    """
    Binned Gaussian forms: σ_q² = 2(1−ρ)^{−1/3}(1+2ρ)^{−2/3}2^{−4R_b},
    D′_{i,j} = σ_q²(1+ρ)/2, D′_{i,j,k} = σ_q²(1+2ρ)/3.
    """
    _check_rho(rho)
    sigma_q2 = 2.0 * (1.0 - rho) ** (-1.0 / 3.0) * (1.0 + 2.0 * rho) ** (-2.0 / 3.0) * 2.0 ** (-4.0 * binning_rate)
    return 0.5 * sigma_q2 * (1.0 + rho), sigma_q2 * (1.0 + 2.0 * rho) / 3.0


def binning_equivalence_ratio(nesting_ratio: float, binning_rate: float = 0.0) -> Tuple[float, float]:
    """
    Choose ρ so the Gaussian two-description distortion equals the binned
    D̄_{i,j}, then compare central distortions.

    Returns:
        (ρ, D_c / D′_{i,j,k}); the ratio tends to one as N′ grows

    Raises:
        ParameterRangeError: If no ρ in (−1/2, 1/2] matches (N′ below about 3.27)
    """
    psi = psi3_infinity()
    x = nesting_ratio ** 2 * psi ** 4 / 12.0

    def mismatch(t: float) -> float:
        r = (t ** 3 - 1.0) / 2.0
        return t - x ** -0.5 * math.sqrt(1.0 + r) * (1.0 - r) ** (-1.0 / 6.0)

    lo, hi = 1e-12, 2.0 ** (1.0 / 3.0)
    if mismatch(lo) * mismatch(hi) > 0:
        raise ParameterRangeError(f"no matching correlation for nesting ratio {nesting_ratio}")
    t = brentq(mismatch, lo, hi, xtol=1e-15, rtol=1e-14)
    rho = (t ** 3 - 1.0) / 2.0
    _, d_c = binned_distortions(binning_rate, nesting_ratio, psi)
    _, d_ijk = inner_bound_binned(rho, binning_rate)
    return rho, d_c / d_ijk


# -------------------------------------------------------------------
# Index bound
# -------------------------------------------------------------------

def index_upper_bound(n: int, L: int, product_index: int, psi: float = 1.0) -> float:
    """Largest admissible sublattice index: (√2 ψ)^L ω_L N_π^{1/(n−1)}."""
    if n < 2:
        raise ParameterRangeError(f"need at least two descriptions, got {n}")
    return (math.sqrt(2.0) * psi) ** L * unit_sphere_volume(L) * product_index ** (1.0 / (n - 1))


# -------------------------------------------------------------------
# Report
# -------------------------------------------------------------------

class ClosedFormReport(BaseModel):
    """
    Closed-form predictions for one system.

    Output ids are dotted names such as "rate.central", "two_channel.side.0",
    "three_channel.side.01", "distortion.central" or "rate_loss". Entries in
    `signed` may be negative; every other output is a nonnegative distortion,
    rate or index.
    """

    L: int = Field(..., ge=1)
    n: int = Field(..., ge=2)
    inputs: Dict[str, float] = Field(default_factory=dict)
    outputs: Dict[str, float] = Field(default_factory=dict)
    signed: List[str] = Field(default_factory=list, description="Output ids allowed to be negative")
    notes: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_outputs(self) -> "ClosedFormReport":
        for key, value in self.outputs.items():
            if not math.isfinite(value):
                raise ValueError(f"output {key} is not finite: {value}")
            if value < 0 and key not in self.signed:
                raise ValueError(f"output {key} is negative: {value}")
        return self


def closed_form_report(
    profile: WeightProfile,
    L: int,
    nu_c: float,
    indices: Sequence[float],
    sigma2: float = 1.0,
    g_central: Optional[float] = None,
) -> ClosedFormReport:
    """
    Collect the predictions that apply to an n-description system with
    central cell volume ν_c and sublattice indices N_i.

    Two descriptions get the two-channel side distortions; three
    descriptions get the three-channel forms for odd L and a note otherwise.
    """
    n = profile.n
    if len(indices) != n:
        raise ParameterRangeError(f"{len(indices)} indices for n={n}")
    h = gaussian_entropy(L, sigma2)
    g_c = (1.0 / 12.0) if g_central is None else g_central
    r_c, side = rates(h, L, nu_c, indices, profile.mu)

    inputs = {"h": h, "nu_c": nu_c, "sigma2": sigma2, "G_c": g_c}
    inputs.update({f"N.{i}": float(N) for i, N in enumerate(indices)})
    outputs = {"rate.central": r_c, "distortion.central": g_c * nu_c ** (2.0 / L)}
    outputs.update({f"rate.side.{i}": r for i, r in enumerate(side)})
    signed = ["rate.central"] + [f"rate.side.{i}" for i in range(n)]
    notes: List[str] = []

    psi = psi_closed_form(n, L)
    if psi is not None:
        outputs["psi"] = psi
    if n == 2:
        d0, d1 = theoretical_distortion2(profile, L, nu_c, indices[0], indices[1])
        outputs["two_channel.side.0"], outputs["two_channel.side.1"] = d0, d1
    elif n == 3:
        try:
            for ell, d in theoretical_distortion3(profile, L, nu_c, indices).items():
                outputs[f"three_channel.side.{subset_key(ell)}"] = d
            outputs["phi"] = phi(L)
            outputs["rate_loss"] = rate_loss(L, g_c)
            signed.append("rate_loss")
        except UnsupportedDimensionError as e:
            notes.append(f"no three-channel closed form: {e}")
    else:
        notes.append(f"side distortions for n={n} have no closed form")

    product_index = math.prod(int(round(N)) for N in indices)
    outputs["index_bound"] = index_upper_bound(n, L, product_index, psi if psi else 1.0)
    return ClosedFormReport(L=L, n=n, inputs=inputs, outputs=outputs, signed=signed, notes=notes)
