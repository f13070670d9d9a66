"""
Analysis Tables

Tabulations of the closed forms as polars DataFrames with fixed column order:
- sphere_gap_table: sphere and Φ terms per odd L
- psi_table: ψ_{3,L} and Φ_L per odd L
- rate_loss_table: rate loss per (L, G_c)
- product_table / tradeoff_sweep: distortion products under central-rate sweeps
- inner_bound_table: Gaussian MMSE inner bound over ρ
- binning_threshold_table: binning thresholds and binned distortions
"""

import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import polars as pl

from src.analysis.closed_forms import (
    TWO_PI_E,
    ParameterRangeError,
    binned_distortions,
    binning_threshold,
    distortion_product3,
    gaussian_inner_bound,
    rate_loss,
    theoretical_distortion2_rates,
    theoretical_distortion3_rates,
)
from src.analysis.special import MAX_ODD_DIMENSION, phi, psi3
from src.lattice.core import sphere_second_moment
from src.utils.logger import get_logger
from src.weights.models import WeightProfile

logger = get_logger(__name__)

SPHERE_GAP_COLUMNS = ["L", "gsl_term", "phi_term"]
PSI_COLUMNS = ["L", "psi3", "phi"]
PRODUCT_COLUMNS = ["R_c", "product", "closed_form"]
INNER_BOUND_COLUMNS = ["rho", "mmse1", "mmse2", "mmse3", "product"]
BINNING_COLUMNS = ["N_prime", "R", "R_b_min", "D_ij", "D_c"]
RATE_LOSS_COLUMNS = ["L", "G_c", "rate_loss"]


def _odd_range(L_max: int) -> List[int]:
    if L_max < 1 or L_max > MAX_ODD_DIMENSION:
        raise ParameterRangeError(f"L_max must be in [1, {MAX_ODD_DIMENSION}], got {L_max}")
    return list(range(1, L_max + 1, 2))


def sphere_gap_table(L_max: int = 21) -> pl.DataFrame:
    """Rows (L, log₂(G(S_L)2πe), log₂(Φ_L²·3/4)) for odd L ≤ L_max."""
    rows = [
        (L, math.log2(sphere_second_moment(L) * TWO_PI_E), math.log2(phi(L) ** 2 * 0.75))
        for L in _odd_range(L_max)
    ]
    return pl.DataFrame(rows, schema=SPHERE_GAP_COLUMNS, orient="row")


def sphere_gap_checks(table: pl.DataFrame) -> Dict[str, bool]:
    """
    Ordering flags for a sphere_gap_table result.

    The Φ term stays below the sphere term on every row. The sphere term falls
    toward 0. The Φ term starts at log₂(25/27) for L = 1 (Φ_1 = 10/9 < Φ_∞) and
    rises, crossing 0 before L = 11; its approach to 0 from above is slower than
    the odd range reaches, so it is checked for rising only.
    """
    gsl = table["gsl_term"].to_numpy()
    ph = table["phi_term"].to_numpy()
    return {
        "strict_ordering": bool(np.all(ph < gsl)),
        "gsl_decreasing": bool(np.all(np.diff(gsl) < 0)),
        "phi_rising": bool(np.all(np.diff(ph) > 0)),
    }


def psi_table(L_max: int = 21) -> pl.DataFrame:
    """Rows (L, ψ_{3,L}, Φ_L) for odd L ≤ L_max."""
    rows = [(L, psi3(L), phi(L)) for L in _odd_range(L_max)]
    return pl.DataFrame(rows, schema=PSI_COLUMNS, orient="row")


def rate_loss_table(entries: Iterable[Tuple[int, float]]) -> pl.DataFrame:
    """Rate loss for each (L, G_c) pair."""
    rows = [(L, g, rate_loss(L, g)) for L, g in entries]
    return pl.DataFrame(rows, schema=RATE_LOSS_COLUMNS, orient="row")


def product_table(rate: float, central_rates: Sequence[float], L: int, h: float, g_central: float) -> pl.DataFrame:
    """
    Symmetric three-description product D̄_c·D̄_0·D̄_{0,1} from the rate
    forms at each central rate, beside the closed-form product.
    """
    profile = WeightProfile.symmetric(3)
    closed = distortion_product3(L, rate, h, g_central)
    rows = []
    for r_c in central_rates:
        sides = theoretical_distortion3_rates(profile, L, h, r_c, [rate] * 3)
        d_c = g_central * 2.0 ** (2.0 * (h / L - r_c))
        rows.append((float(r_c), d_c * sides[(0,)] * sides[(0, 1)], closed))
    return pl.DataFrame(rows, schema=PRODUCT_COLUMNS, orient="row")


def tradeoff_sweep(
    a_grid: Sequence[float],
    n: int,
    side_rates: Sequence[float],
    L: int,
    h: float,
    g_central: float,
    profile: Optional[WeightProfile] = None,
) -> pl.DataFrame:
    """
    Sweep the trade-off parameter a: R_c = (ΣR_i)(a(n−1)+1)/n, then form
    D̄_c times n−1 side distortions (D̄_0 for n = 2; D̄_0 and D̄_{0,1} for n = 3).

    Returns:
        Columns (a, R_c, product); the product does not depend on a
    """
    if n not in (2, 3) or len(side_rates) != n:
        raise ParameterRangeError(f"trade-off sweep needs n in (2, 3) with one rate each, got n={n}")
    profile = profile or WeightProfile.symmetric(n)
    total = float(sum(side_rates))
    rows = []
    for a in a_grid:
        if not 0.0 < a < 1.0:
            raise ParameterRangeError(f"trade-off parameter must lie in (0, 1), got {a}")
        r_c = total * (a * (n - 1) + 1.0) / n
        d_c = g_central * 2.0 ** (2.0 * (h / L - r_c))
        if n == 2:
            d0, _ = theoretical_distortion2_rates(profile, L, h, r_c, side_rates[0], side_rates[1])
            product = d_c * d0
        else:
            sides = theoretical_distortion3_rates(profile, L, h, r_c, side_rates)
            product = d_c * sides[(0,)] * sides[(0, 1)]
        rows.append((float(a), r_c, product))
    return pl.DataFrame(rows, schema=["a", "R_c", "product"], orient="row")


def inner_bound_table(rhos: Sequence[float], rate: float) -> pl.DataFrame:
    """High-resolution MMSE values and their product for each ρ."""
    rows = []
    for rho in rhos:
        point = gaussian_inner_bound(rho, rate=rate)
        rows.append((float(rho), *point.mmse, point.product))
    return pl.DataFrame(rows, schema=INNER_BOUND_COLUMNS, orient="row")


def binning_threshold_table(nesting_ratios: Sequence[float], rate: float, L: int) -> pl.DataFrame:
    """Threshold R_b,min per N′ and the binned distortions at that rate."""
    rows = []
    for nr in nesting_ratios:
        r_b = binning_threshold(rate, nr, L)
        d_ij, d_c = binned_distortions(r_b, nr, psi3(L))
        rows.append((float(nr), float(rate), r_b, d_ij, d_c))
    logger.debug(f"Binning thresholds for {len(rows)} nesting ratios at R={rate}")
    return pl.DataFrame(rows, schema=BINNING_COLUMNS, orient="row")
