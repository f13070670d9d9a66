"""
Special Functions for Three-Description Constants

This module evaluates the dimension-dependent constants of the n = 3 labeling:
- beta / beta_tilde: alternating Pochhammer sums (float, compensated) and exact rationals
- lens_volume: volume of two intersecting unit balls
- psi3 / psi3_infinity / psi2: sphere expansion factors
- phi / phi_infinity: side-distortion constant Φ_L

Only odd L is supported; even L raises UnsupportedDimensionError.
"""

import math
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Tuple

from scipy import integrate
from scipy.special import gammaln

from src.lattice.core import unit_sphere_volume
from src.utils.logger import get_logger

logger = get_logger(__name__)

MAX_ODD_DIMENSION = 41


class UnsupportedDimensionError(ValueError):
    """Raised for dimensions outside the supported odd range."""
    pass


def _check_odd(L: int) -> None:
    if L < 1 or L % 2 == 0:
        raise UnsupportedDimensionError(f"closed forms are available for odd L only, got L={L}")
    if L > MAX_ODD_DIMENSION:
        raise UnsupportedDimensionError(f"L={L} exceeds the numerically stable range (L <= {MAX_ODD_DIMENSION})")


# -------------------------------------------------------------------
# Pochhammer sums
# -------------------------------------------------------------------

def _log_pochhammer(a: float, k: int) -> Tuple[float, float]:
    """(sign, log|(a)_k|) using log-gamma; handles non-positive integer a."""
    if k == 0:
        return 1.0, 0.0
    if a > 0:
        return 1.0, float(gammaln(a + k) - gammaln(a))
    if float(a).is_integer():
        m = int(-a)
        if k > m:
            return 0.0, -math.inf
        # (-m)_k = (-1)^k m! / (m - k)!
        return (-1.0) ** k, float(gammaln(m + 1) - gammaln(m - k + 1))
    raise ValueError(f"unsupported Pochhammer argument {a}")


def _beta_sum(L: int, shift: int) -> float:
    """Float evaluation of the alternating sum with denominator L + m + j + shift."""
    _check_odd(L)
    half_up = (L + 1) // 2
    half_down = (L - 1) // 2
    terms = []
    for m in range(half_up + 1):
        outer = math.comb(half_up, m) * 2.0 ** (half_up - m) * (-1.0) ** m
        for k in range(half_down + 1):
            s1, l1 = _log_pochhammer((L + 1) / 2.0, k)
            s2, l2 = _log_pochhammer((1 - L) / 2.0, k)
            s3, l3 = _log_pochhammer((L + 3) / 2.0, k)
            if s1 * s2 == 0.0:
                continue
            middle = s1 * s2 * s3 * math.exp(l1 + l2 - l3 - gammaln(k + 1))
            for j in range(k + 1):
                inner = math.comb(k, j) * 0.5 ** (k - j) * (-1.0) ** j * 0.25 ** j / (L + m + j + shift)
                terms.append(outer * middle * inner)
    return math.fsum(terms)


def _pochhammer_exact(a: Fraction, k: int) -> Fraction:
    out = Fraction(1)
    for i in range(k):
        out *= a + i
    return out


def _beta_sum_exact(L: int, shift: int) -> Fraction:
    if L < 1 or L % 2 == 0:
        raise UnsupportedDimensionError(f"closed forms are available for odd L only, got L={L}")
    half_up = (L + 1) // 2
    half_down = (L - 1) // 2
    total = Fraction(0)
    for m in range(half_up + 1):
        outer = math.comb(half_up, m) * Fraction(2) ** (half_up - m) * (-1) ** m
        for k in range(half_down + 1):
            middle = (
                _pochhammer_exact(Fraction(L + 1, 2), k)
                * _pochhammer_exact(Fraction(1 - L, 2), k)
                / (_pochhammer_exact(Fraction(L + 3, 2), k) * math.factorial(k))
            )
            for j in range(k + 1):
                inner = math.comb(k, j) * Fraction(1, 2) ** (k - j) * (-1) ** j * Fraction(1, 4) ** j / (L + m + j + shift)
                total += outer * middle * inner
    return total


def beta_compensated(L: int) -> float:
    """β_L by log-gamma Pochhammer terms and compensated summation."""
    return _beta_sum(L, 0)


def beta_tilde_compensated(L: int) -> float:
    """β̃_L by log-gamma Pochhammer terms and compensated summation."""
    return _beta_sum(L, 2)


@lru_cache(maxsize=None)
def beta(L: int) -> float:
    """
    β_L for odd L (β_1 = 3/2, β_3 = 5/12).

    Rounded from the exact rational; the float sum loses digits to
    cancellation as L grows.
    """
    _check_odd(L)
    return float(beta_exact(L))


@lru_cache(maxsize=None)
def beta_tilde(L: int) -> float:
    """β̃_L for odd L (β̃_1 = 5/12)."""
    _check_odd(L)
    return float(beta_tilde_exact(L))


def beta_exact(L: int) -> Fraction:
    """β_L as an exact rational."""
    return _beta_sum_exact(L, 0)


def beta_tilde_exact(L: int) -> Fraction:
    """β̃_L as an exact rational."""
    return _beta_sum_exact(L, 2)


# -------------------------------------------------------------------
# Geometry of intersecting balls
# -------------------------------------------------------------------

def lens_volume(L: int, distance: float) -> float:
    """
    Volume of the intersection of two unit balls in R^L whose centres are
    the given distance apart.
    """
    if L < 1:
        raise ValueError(f"dimension must be positive, got {L}")
    if distance < 0:
        raise ValueError(f"distance must be non-negative, got {distance}")
    if distance >= 2.0:
        return 0.0
    if distance == 0.0:
        return unit_sphere_volume(L)
    cap, _ = integrate.quad(lambda t: (1.0 - t * t) ** ((L - 1) / 2.0), distance / 2.0, 1.0)
    return 2.0 * unit_sphere_volume(L - 1) * cap


def _cap_volume(L: int, radius: float, plane: float) -> float:
    """Volume of the part of a radius-`radius` ball beyond a plane at signed offset `plane`."""
    lo = max(-radius, min(radius, plane))
    if lo >= radius:
        return 0.0
    cap, _ = integrate.quad(lambda t: max(radius * radius - t * t, 0.0) ** ((L - 1) / 2.0), lo, radius)
    return unit_sphere_volume(L - 1) * cap


def ball_intersection_volume(L: int, r1: float, r2: float, distance: float) -> float:
    """
    Volume of B(x, r1) ∩ B(y, r2) in R^L with ‖x − y‖ = distance.

    The radical plane sits at (d² + r1² − r2²)/(2d) from x; the intersection
    is the cap of each ball beyond it.
    """
    if L < 1:
        raise ValueError(f"dimension must be positive, got {L}")
    if r1 < 0 or r2 < 0 or distance < 0:
        raise ValueError(f"radii and distance must be non-negative, got {r1}, {r2}, {distance}")
    if distance >= r1 + r2:
        return 0.0
    if distance <= abs(r1 - r2):
        return unit_sphere_volume(L) * min(r1, r2) ** L
    plane = (distance * distance + r1 * r1 - r2 * r2) / (2.0 * distance)
    return _cap_volume(L, r1, plane) + _cap_volume(L, r2, distance - plane)


def quadrature_intersection_moments(L: int) -> Tuple[float, float]:
    """
    β_L and β̃_L from one-dimensional quadrature of lens volumes, independent
    of the Pochhammer sums.

    β_L = (L + 1)/(2 ω_{L-1}) ∫_0^1 V(s) s^{L-1} ds and β̃_L uses s^{L+1}.
    """
    scale = (L + 1) / (2.0 * unit_sphere_volume(L - 1))
    b, _ = integrate.quad(lambda s: lens_volume(L, s) * s ** (L - 1), 0.0, 1.0, limit=200)
    bt, _ = integrate.quad(lambda s: lens_volume(L, s) * s ** (L + 1), 0.0, 1.0, limit=200)
    return scale * b, scale * bt


# -------------------------------------------------------------------
# Expansion factors and Φ
# -------------------------------------------------------------------

def psi2() -> float:
    """ψ_{2,L} = 1 for every L."""
    return 1.0


def psi3_infinity() -> float:
    """ψ_{3,∞} = (4/3)^{1/4}."""
    return (4.0 / 3.0) ** 0.25


def psi3(L: int, beta_value: Optional[float] = None) -> float:
    """
    ψ_{3,L} = (ω_L/ω_{L-1})^{1/2L} ((L+1)/2L)^{1/2L} β_L^{-1/2L} for odd L.

    Args:
        L: Odd dimension
        beta_value: Override for β_L (used by fault-injection checks)
    """
    _check_odd(L)
    b = beta(L) if beta_value is None else beta_value
    ratio = unit_sphere_volume(L) / unit_sphere_volume(L - 1)
    return (ratio * (L + 1) / (2.0 * L) / b) ** (1.0 / (2 * L))


def psi_closed_form(n: int, L: int) -> Optional[float]:
    """Closed-form ψ_{n,L} where one is known, else None."""
    if n == 2:
        return psi2()
    if n == 3 and L % 2 == 1 and L <= MAX_ODD_DIMENSION:
        return psi3(L)
    return None


def phi(L: int) -> float:
    """Φ_L = ((L+2)/L)(β̃_L/β_L) ψ_{3,L}² for odd L."""
    _check_odd(L)
    return (L + 2) / L * beta_tilde(L) / beta(L) * psi3(L) ** 2


def phi_infinity() -> float:
    """Φ_∞ = (4/3)^{1/2}."""
    return math.sqrt(4.0 / 3.0)
