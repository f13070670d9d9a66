"""
Tuple Generation

This module builds the candidate n-tuples of the index assignment:
- generate_tuples: per λ_0 in the canonical product cell, the N_0 tuples
  satisfying the pair constraint ‖λ_i − λ_j‖ ≤ c_{i,j}·r with smallest pairwise cost
- reduce_to_cosets: canonical coset representatives, one per tuple
- outside_fraction: share of tuples reaching outside the canonical cell

The radius starts from the volume equality ν̃ = ν_c ∏N_i^{1/(n−1)} and the
final r is the smallest one giving every λ_0 at least N_0 tuples. For three
descriptions ψ is taken from counting_radius, the r at which the expected
tuple count per λ_0 reaches N_0.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from typing import List, Tuple

import numpy as np
from scipy import optimize

from src.analysis.closed_forms import index_upper_bound
from src.analysis.special import ball_intersection_volume, psi_closed_form
from src.labeling.models import TupleSet
from src.lattice.core import CapacityError, ball_basis_coords, unit_sphere_volume
from src.nested.models import NestedSystem
from src.nested.system import cell_points, reduce_points
from src.utils.logger import get_logger
from src.utils.settings import get_settings
from src.weights.algebra import pairwise_weight_matrix
from src.weights.models import WeightProfile

logger = get_logger(__name__)
settings = get_settings()

GROWTH = 1.25
MAX_GROWTH_STEPS = 40


class IndexBoundError(ValueError):
    """Raised when a sublattice index exceeds the admissible bound."""
    pass


class CosetCollisionError(Exception):
    """Raised when two tuples fall in the same coset."""
    pass


def check_index_bound(system: NestedSystem) -> float:
    """
    Verify N_i ≤ (√2ψ)^L ω_L N_π^{1/(n−1)} for every description.

    Returns:
        The bound

    Raises:
        IndexBoundError: If some N_i exceeds it
    """
    psi = psi_closed_form(system.n, system.dimension) or 1.0
    bound = index_upper_bound(system.n, system.dimension, system.product_index, psi)
    for i, N in enumerate(system.indices):
        if N > bound * (1.0 + 1e-12):
            raise IndexBoundError(
                f"index N_{i}={N} exceeds the admissible bound {bound:.4g} "
                f"for n={system.n}, L={system.dimension}, N_pi={system.product_index}"
            )
    return bound


def start_radius(system: NestedSystem) -> float:
    """r with ω_L r^L = ν_c ∏N_i^{1/(n−1)}."""
    L = system.dimension
    volume = system.central_volume * math.prod(N ** (1.0 / (system.n - 1)) for N in system.indices)
    return (volume / unit_sphere_volume(L)) ** (1.0 / L)


def _radius_matrix(profile: WeightProfile) -> np.ndarray:
    n = profile.n
    c = np.ones((n, n))
    for i, j in combinations(range(n), 2):
        c[i, j] = c[j, i] = profile.radius_factor(i, j)
    return c


def _pair_criterion(cart: np.ndarray, c: np.ndarray) -> np.ndarray:
    """max_{i<j} ‖λ_i − λ_j‖ / c_{i,j} per tuple."""
    n = cart.shape[1]
    crit = np.zeros(len(cart))
    for i, j in combinations(range(n), 2):
        d = np.linalg.norm(cart[:, i] - cart[:, j], axis=1) / c[i, j]
        crit = np.maximum(crit, d)
    return crit


def _tuples_at(system: NestedSystem, u0: np.ndarray, radius: float, c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    All tuples starting at λ_0 = u0 whose pair criterion is at most radius.

    Returns:
        (tuples (P, n, L) central coords, criterion (P,))
    """
    B = system.central.basis_matrix
    x0 = B @ u0.astype(float)
    tol = settings.tolerance * max(1.0, radius)
    parts = u0[None, None, :].astype(np.int64)

    for i in range(1, system.n):
        M = system.subs[i].matrix
        k = ball_basis_coords(B @ M.astype(float), x0, c[0, i] * radius)
        cand = k @ M.T
        if len(parts) * len(cand) > settings.max_enumeration_points:
            raise CapacityError(f"{len(parts)} x {len(cand)} partial tuples exceed the enumeration budget")
        cand_x = cand.astype(float) @ B.T
        parts_x = parts.astype(float) @ B.T
        dist = np.linalg.norm(parts_x[:, :, None, :] - cand_x[None, None, :, :], axis=3)
        ok = np.all(dist / c[:i, i][None, :, None] <= radius + tol, axis=1)
        p_idx, c_idx = np.nonzero(ok)
        parts = np.concatenate([parts[p_idx], cand[c_idx][:, None, :]], axis=1)

    return parts, _pair_criterion(parts.astype(float) @ B.T, c)


def _pairwise_cost(system: NestedSystem, profile: WeightProfile, tuples: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Σ_{i<j} W_{i,j}‖μ_iλ_i − μ_jλ_j‖² per dimension."""
    cart = tuples.astype(float) @ system.central.basis_matrix.T
    scaled = cart * np.asarray(profile.mu)[None, :, None]
    cost = np.zeros(len(tuples))
    for i, j in combinations(range(system.n), 2):
        d = scaled[:, i] - scaled[:, j]
        cost += W[i, j] * np.sum(d * d, axis=1)
    return cost / system.dimension


def _cheapest(tuples: np.ndarray, cost: np.ndarray, keep: int, rotation: int = 0) -> np.ndarray:
    """
    The keep cheapest tuples.

    Tuples tied at the cutoff cost are taken in lexicographic order starting
    at position rotation (mod the tie count), so consecutive λ_0 rows draw
    different members of the tie.
    """
    scale = max(1.0, float(np.max(np.abs(cost)))) if len(cost) else 1.0
    key = np.rint(cost / (scale * 1e-12))
    flat = tuples.reshape(len(tuples), -1)
    order = np.lexsort(tuple(flat.T[::-1]) + (key,))
    if keep >= len(order):
        return tuples[order]
    cutoff = key[order[keep - 1]]
    below = order[key[order] < cutoff]
    tied = order[key[order] == cutoff]
    need = keep - len(below)
    picked = tied[(rotation + np.arange(need)) % len(tied)]
    return tuples[np.concatenate([below, np.sort(picked)])]


def generate_tuples(system: NestedSystem, profile: WeightProfile, workers: int = 1) -> TupleSet:
    """
    Build the N_π candidate tuples.

    Args:
        system: Nested system
        profile: Weight profile with the same n and μ
        workers: Threads used over the λ_0 rows (output does not depend on it)

    Returns:
        TupleSet in canonical coset form

    Raises:
        IndexBoundError: If some index is not admissible
        CapacityError: If an enumeration exceeds the budget
    """
    if profile.n != system.n:
        raise ValueError(f"profile has n={profile.n}, system has n={system.n}")
    if not np.allclose(profile.mu, system.mu):
        raise ValueError(f"profile mu {profile.mu} differs from system mu {system.mu}")
    check_index_bound(system)

    starts = cell_points(system, 0)
    N0 = system.indices[0]
    c = _radius_matrix(profile)
    r_start = start_radius(system)

    radius = r_start
    for _ in range(MAX_GROWTH_STEPS):
        rows = _enumerate_rows(system, starts, radius, c, workers)
        if all(len(tuples) >= N0 for tuples, _ in rows):
            break
        logger.debug(f"Radius {radius:.6g} leaves some lambda_0 with fewer than {N0} tuples; growing")
        radius *= GROWTH
    else:
        raise CapacityError(f"no radius up to {radius:.6g} gives {N0} tuples per lambda_0")

    r_final = max(float(np.sort(crit)[N0 - 1]) for _, crit in rows)
    tol = settings.tolerance * max(1.0, r_final)
    W = pairwise_weight_matrix(profile)

    kept: List[np.ndarray] = []
    for row, (tuples, crit) in enumerate(rows):
        feasible = tuples[crit <= r_final + tol]
        kept.append(_cheapest(feasible, _pairwise_cost(system, profile, feasible, W), N0, rotation=row))

    r_count = counting_radius(system, starts, c, r_start) if system.n == 3 else None
    tuple_set = TupleSet(
        system=system,
        tuples=np.concatenate(kept, axis=0),
        radius=r_final,
        radius_start=r_start,
        psi=(r_count or r_final) / r_start,
    )
    tuple_set = reduce_to_cosets(tuple_set)
    logger.info(
        f"Generated {tuple_set.count} tuples: radius={r_final:.6g}, "
        f"start={r_start:.6g}, psi={tuple_set.psi:.5f}"
    )
    return tuple_set


def _neighbour_distances(system: NestedSystem, starts: np.ndarray, reach: float) -> Tuple[np.ndarray, np.ndarray]:
    """Distinct distances ‖λ_1 − λ_0‖ ≤ reach over all rows, with multiplicities."""
    B = system.central.basis_matrix
    M = system.subs[1].matrix
    found = []
    for u0 in starts:
        x0 = B @ u0.astype(float)
        pts = ball_basis_coords(B @ M.astype(float), x0, reach) @ M.T
        found.append(np.linalg.norm(pts.astype(float) @ B.T - x0[None, :], axis=1))
    return np.unique(np.round(np.concatenate(found), 9), return_counts=True)


def _expected_count(system: NestedSystem, c: np.ndarray, dist: np.ndarray, weight: np.ndarray, rows: int, r: float) -> float:
    """Mean over rows of Σ_{λ_1} Vol(B(λ_0, c_{0,2}r) ∩ B(λ_1, c_{1,2}r)) / ν_2."""
    inside = dist <= c[0, 1] * r * (1.0 + settings.tolerance)
    vols = [ball_intersection_volume(system.dimension, c[0, 2] * r, c[1, 2] * r, d) for d in dist[inside]]
    nu_2 = system.central_volume * system.indices[2]
    return float(np.dot(weight[inside], vols)) / (rows * nu_2)


def counting_radius(system: NestedSystem, starts: np.ndarray, c: np.ndarray, r_start: float) -> float:
    """
    Three descriptions: the r at which the expected tuple count per λ_0 is N_0.

    λ_1 runs over the points of Λ_1 within c_{0,1}r of λ_0; each contributes
    Vol(B(λ_0, c_{0,2}r) ∩ B(λ_1, c_{1,2}r)) / ν_2 candidates λ_2. The count is
    averaged over the λ_0 rows and solved for r.

    Raises:
        CapacityError: If no radius within the growth limit reaches N_0
    """
    N0 = system.indices[0]
    hi = r_start
    for _ in range(MAX_GROWTH_STEPS):
        hi *= GROWTH
        dist, weight = _neighbour_distances(system, starts, c[0, 1] * hi)
        if _expected_count(system, c, dist, weight, len(starts), hi) > N0:
            break
    else:
        raise CapacityError(f"no radius up to {hi:.6g} reaches {N0} expected tuples per lambda_0")

    def excess(r: float) -> float:
        return _expected_count(system, c, dist, weight, len(starts), r) - N0

    radius = optimize.brentq(excess, r_start / GROWTH ** 4, hi, xtol=settings.tolerance * r_start)
    logger.debug(f"Counting radius {radius:.6g} against start radius {r_start:.6g}")
    return float(radius)


def _enumerate_rows(
    system: NestedSystem, starts: np.ndarray, radius: float, c: np.ndarray, workers: int
) -> List[Tuple[np.ndarray, np.ndarray]]:
    def one(u0: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return _tuples_at(system, u0, radius, c)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, starts))
    return [one(u0) for u0 in starts]


def canonicalize(system: NestedSystem, tuples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Translate every tuple by the product lattice so λ_0 lies in the canonical cell.

    Returns:
        (canonical tuples, product-basis translates removed)
    """
    tuples = np.asarray(tuples, dtype=np.int64)
    _, t = reduce_points(system, tuples[:, 0])
    shift = t @ system.product.matrix.T
    return tuples - shift[:, None, :], t


def reduce_to_cosets(tuple_set: TupleSet) -> TupleSet:
    """
    Canonical form of every tuple, with repeated cosets removed.

    Raises:
        CosetCollisionError: If fewer than N_π distinct cosets remain
    """
    system = tuple_set.system
    canon, _ = canonicalize(system, tuple_set.tuples)
    flat = canon.reshape(len(canon), -1)
    _, first = np.unique(flat, axis=0, return_index=True)
    unique = canon[np.sort(first)]
    if len(unique) < system.product_index:
        raise CosetCollisionError(
            f"only {len(unique)} distinct cosets among {len(canon)} tuples, expected {system.product_index}"
        )
    if len(unique) > system.product_index:
        raise CosetCollisionError(f"{len(unique)} cosets exceed N_pi={system.product_index}")
    return tuple_set.model_copy(update={"tuples": unique})


def outside_fraction(tuple_set: TupleSet) -> float:
    """Fraction of tuples with some element outside the canonical product cell."""
    system = tuple_set.system
    m, n, L = tuple_set.tuples.shape
    _, t = reduce_points(system, tuple_set.tuples.reshape(-1, L))
    outside = np.any(t.reshape(m, n, L) != 0, axis=(1, 2))
    return float(outside.mean()) if m else 0.0
