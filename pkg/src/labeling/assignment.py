"""
Tuple Assignment

This module assigns the candidate tuples to central points and evaluates the result:
- assignment_cost: Σ_κ γ̄(L^(n,κ))‖λ_c − κ-level weighted centroid‖²
- assign_tuples: optimal linear assignment with a dual-feasibility certificate
- brute_force_assignment: exhaustive oracle for small cells
- evaluate_labeling / labeling_distortions: cost split and table-only side distortions
- alpha_apply / alpha_invert: the labeling extended to all of Λ_c by shift invariance
"""

from itertools import combinations, permutations, product
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.labeling.models import LabelingCost, LabelingFunction, TupleSet
from src.lattice.core import CapacityError
from src.nested.system import CENTRAL, cell_index, cell_points, reduce_points
from src.utils.logger import get_logger
from src.utils.rng import Stream, stream_generator
from src.utils.settings import get_settings
from src.weights.algebra import centroid_weights, pairwise_weight_matrix
from src.weights.models import Subset, WeightProfile

logger = get_logger(__name__)
settings = get_settings()

BRUTE_FORCE_LIMIT = 8
_ROW_CHUNK = 512
TIE_JITTER = 1e-12


class NotALabelError(KeyError):
    """Raised when a tuple is not in the image of the labeling."""
    pass


class OptimalityCertificateError(Exception):
    """Raised when the assignment fails its dual-feasibility check."""
    pass


# -------------------------------------------------------------------
# Costs
# -------------------------------------------------------------------

def _centroids(profile: WeightProfile, cart: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    κ-level weighted centroids Σ_i a_i μ_i λ_i.

    Returns:
        (γ̄ per κ (K,), centroids (K, m, L))
    """
    weights = centroid_weights(profile)
    scaled = cart * np.asarray(profile.mu)[None, :, None]
    totals = np.array([total for total, _ in weights])
    cents = np.stack([np.einsum("i,mil->ml", coeffs, scaled) for _, coeffs in weights])
    return totals, cents


def assignment_cost(lam_c: Sequence[float], tuple_points: Sequence[Sequence[float]], profile: WeightProfile) -> float:
    """
    Centroid cost of assigning a tuple to a central point (Cartesian inputs).

    Example:
        n = 2, μ = 1, γ_0 = γ_1 = γ gives 2γ‖λ_c − (λ_0 + λ_1)/2‖².
    """
    lam_c = np.asarray(lam_c, dtype=float)
    cart = np.asarray(tuple_points, dtype=float)
    if cart.shape != (profile.n, lam_c.size):
        raise ValueError(f"expected {profile.n} points of length {lam_c.size}, got {cart.shape}")
    totals, cents = _centroids(profile, cart[None])
    diff = lam_c[None, :] - cents[:, 0]
    return float(np.sum(totals * np.sum(diff * diff, axis=1)))


def _pairwise_sum(profile: WeightProfile, cart: np.ndarray) -> np.ndarray:
    W = pairwise_weight_matrix(profile)
    scaled = cart * np.asarray(profile.mu)[None, :, None]
    out = np.zeros(len(cart))
    for i, j in combinations(range(profile.n), 2):
        d = scaled[:, i] - scaled[:, j]
        out += W[i, j] * np.sum(d * d, axis=1)
    return out


def _wrap(tuple_set: TupleSet, profile: WeightProfile) -> np.ndarray:
    """Translate each tuple so its κ = 1 centroid lies in the canonical cell."""
    system = tuple_set.system
    B = system.central.basis_matrix
    M = system.product.matrix
    _, cents = _centroids(profile, tuple_set.cartesian())
    s = np.linalg.solve(B @ M.astype(float), cents[0].T).T
    t = np.floor(s + settings.tolerance).astype(np.int64)
    return tuple_set.tuples - (t @ M.T)[:, None, :]


def _neighbour_shifts(system) -> np.ndarray:
    """Product lattice translates M_π·e for e ∈ {−1, 0, 1}^L, central coords."""
    L = system.dimension
    e = np.array(list(product((-1, 0, 1), repeat=L)), dtype=np.int64)
    return e @ system.product.matrix.T


def _cost_blocks(central_x: np.ndarray, totals: np.ndarray, cents: np.ndarray, shifts_x: np.ndarray):
    """
    Yield (row slice, cost block, best shift block) with
    C[k, t] = min_v Σ_κ γ̄_κ‖x_k − c_κ(t) − v‖².
    """
    gamma = float(totals.sum())
    G = np.einsum("k,kml->ml", totals, cents)
    Q = np.einsum("k,km->m", totals, np.sum(cents * cents, axis=2))
    for start in range(0, len(central_x), _ROW_CHUNK):
        x = central_x[start:start + _ROW_CHUNK]
        best = None
        arg = None
        for v_idx, v in enumerate(shifts_x):
            y = x - v
            block = gamma * np.sum(y * y, axis=1)[:, None] - 2.0 * (y @ G.T) + Q[None, :]
            if best is None:
                best, arg = block, np.zeros(block.shape, dtype=np.int64)
            else:
                better = block < best
                best = np.where(better, block, best)
                arg = np.where(better, v_idx, arg)
        yield slice(start, start + len(x)), np.maximum(best, 0.0), arg


def cost_matrix(tuple_set: TupleSet, profile: WeightProfile) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Assignment cost matrix between canonical central points (rows) and tuples (columns).

    Returns:
        (cost (N_π, N_π), best shift index (N_π, N_π), wrapped tuples)

    Raises:
        CapacityError: If N_π² exceeds the cost-matrix budget
    """
    system = tuple_set.system
    N = system.product_index
    if N * N > settings.max_cost_matrix_entries:
        raise CapacityError(f"cost matrix of {N}x{N} exceeds budget {settings.max_cost_matrix_entries}")
    B = system.central.basis_matrix
    wrapped = _wrap(tuple_set, profile)
    totals, cents = _centroids(profile, wrapped.astype(float) @ B.T)
    central_x = cell_points(system, CENTRAL).astype(float) @ B.T
    shifts_x = _neighbour_shifts(system).astype(float) @ B.T

    C = np.empty((N, N))
    which = np.empty((N, N), dtype=np.int8 if len(shifts_x) < 128 else np.int64)
    for rows, block, arg in _cost_blocks(central_x, totals, cents, shifts_x):
        C[rows] = block
        which[rows] = arg
    return C, which, wrapped


# -------------------------------------------------------------------
# Matching
# -------------------------------------------------------------------

def certify_assignment(cost: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """
    Dual potentials proving a perfect matching optimal.

    Column potentials v are relaxed until u_r + v_c ≤ C[r, c] everywhere,
    with u_r = C[r, σ(r)] − v[σ(r)] making matched edges tight. Relaxation
    settles within N passes exactly when the matching has no improving cycle.

    Returns:
        Column potentials v

    Raises:
        OptimalityCertificateError: If relaxation does not settle or a reduced cost is negative
    """
    N = cost.shape[0]
    matched = cost[np.arange(N), cols]
    scale = max(1.0, float(np.max(np.abs(cost)))) if N else 1.0
    tol = settings.tolerance * scale
    v = np.zeros(N)

    for _ in range(N + 1):
        base = v[cols] - matched
        best = v.copy()
        for start in range(0, N, _ROW_CHUNK):
            stop = start + _ROW_CHUNK
            block = cost[start:stop] + base[start:stop, None]
            best = np.minimum(best, block.min(axis=0))
        if np.all(best >= v - tol):
            break
        v = best
    else:
        raise OptimalityCertificateError("dual relaxation did not settle; the matching is not optimal")

    u = matched - v[cols]
    for start in range(0, N, _ROW_CHUNK):
        reduced = cost[start:start + _ROW_CHUNK] - u[start:start + _ROW_CHUNK, None] - v[None, :]
        if np.min(reduced) < -10.0 * tol:
            raise OptimalityCertificateError(f"negative reduced cost {np.min(reduced):.3e}")
    return v


def solve_assignment(cost: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Minimum-cost perfect matching of a square cost matrix.

    Returns:
        (column assigned to each row, total cost)
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got {cost.shape}")
    rows, cols = linear_sum_assignment(cost)
    cols = cols[np.argsort(rows)]
    certify_assignment(cost, cols)
    return cols, float(cost[np.arange(len(cols)), cols].sum())


def brute_force_assignment(cost: np.ndarray) -> Tuple[np.ndarray, float]:
    """Exhaustive minimum over all permutations (N ≤ 8)."""
    cost = np.asarray(cost, dtype=float)
    N = cost.shape[0]
    if N > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to N <= {BRUTE_FORCE_LIMIT}, got {N}")
    best_perm, best = None, np.inf
    rows = np.arange(N)
    for perm in permutations(range(N)):
        total = float(cost[rows, list(perm)].sum())
        if total < best:
            best, best_perm = total, np.array(perm, dtype=np.int64)
    return best_perm, best


def jitter_ties(cost: np.ndarray, seed: int = 0) -> None:
    """
    Add keyed noise of relative size TIE_JITTER to cost in place.

    Tuples sharing a centroid have identical columns; the noise decides which of
    them is displaced at a collision, so no channel is favoured by row order.
    """
    N = cost.shape[0]
    scale = TIE_JITTER * max(1.0, float(np.max(np.abs(cost)))) if N else 0.0
    for k, start in enumerate(range(0, N, _ROW_CHUNK)):
        block = cost[start:start + _ROW_CHUNK]
        block += scale * stream_generator(seed, Stream.TIES, k).random(block.shape)


def assign_tuples(tuple_set: TupleSet, profile: WeightProfile) -> LabelingFunction:
    """
    Optimal assignment of tuples to the canonical central points.

    Equal-cost matchings are separated by jitter_ties before solving; the
    result is optimal for the unperturbed costs up to N_π·TIE_JITTER.

    Returns:
        LabelingFunction with its cost split attached

    Raises:
        CapacityError: If the cost matrix exceeds the budget
        OptimalityCertificateError: If the matching fails certification
    """
    system = tuple_set.system
    if tuple_set.count != system.product_index:
        raise ValueError(f"need {system.product_index} tuples, got {tuple_set.count}")

    C, which, wrapped = cost_matrix(tuple_set, profile)
    jitter_ties(C)
    cols, total = solve_assignment(C)
    rows = np.arange(len(cols))
    shifts = _neighbour_shifts(system)[which[rows, cols].astype(np.int64)]
    forward = wrapped[cols] + shifts[:, None, :]

    labeling = LabelingFunction(
        system=system,
        profile=profile,
        central=cell_points(system, CENTRAL),
        forward=forward,
        psi=tuple_set.psi,
        radius=tuple_set.radius,
    )
    labeling.cost = evaluate_labeling(labeling, profile)
    logger.info(
        f"Assigned {len(cols)} tuples: matching cost={total:.6g}, "
        f"f={labeling.cost.f:.6g}, g={labeling.cost.g:.6g}"
    )
    return labeling


# -------------------------------------------------------------------
# Evaluation
# -------------------------------------------------------------------

def evaluate_labeling(labeling: LabelingFunction, profile: WeightProfile) -> LabelingCost:
    """Per-dimension means of the pairwise part f and the centroid part g."""
    L = labeling.system.dimension
    cart = labeling.forward_cartesian()
    central = labeling.central_cartesian()
    totals, cents = _centroids(profile, cart)
    diff = central[None, :, :] - cents
    g = np.sum(totals[:, None] * np.sum(diff * diff, axis=2), axis=0)
    f = _pairwise_sum(profile, cart)
    return LabelingCost(f=float(f.mean()) / L, g=float(g.mean()) / L)


def weighted_side_cost(labeling: LabelingFunction, profile: WeightProfile) -> float:
    """(1/N_π)Σ_κ Σ_ℓ γ_ℓ‖λ_c − x̂_ℓ(λ_c)‖² per dimension; equals f + g."""
    dist = labeling_distortions(labeling, profile.mu)
    return float(sum(profile.gamma_of(ell) * d for ell, d in dist.items()))


def labeling_distortions(labeling: LabelingFunction, mu: Optional[Sequence[float]] = None) -> Dict[Subset, float]:
    """
    Table-only side distortion (1/N_π)Σ‖λ_c − x̂_ℓ(λ_c)‖² per dimension for every
    proper non-empty ℓ, with x̂_ℓ = (1/κ)Σ_{i∈ℓ} μ_iλ_i.
    """
    system = labeling.system
    mu = np.asarray(system.mu if mu is None else mu, dtype=float)
    scaled = labeling.forward_cartesian() * mu[None, :, None]
    central = labeling.central_cartesian()
    out: Dict[Subset, float] = {}
    for kappa in range(1, system.n):
        for ell in combinations(range(system.n), kappa):
            diff = central - scaled[:, list(ell)].mean(axis=1)
            out[ell] = float(np.mean(np.sum(diff * diff, axis=1))) / system.dimension
    return out


# -------------------------------------------------------------------
# Applying the labeling
# -------------------------------------------------------------------

def _key(canonical_tuple: np.ndarray) -> bytes:
    return np.ascontiguousarray(canonical_tuple, dtype=np.int64).tobytes()


def _inverse_map(labeling: LabelingFunction) -> Dict[bytes, Tuple[int, np.ndarray]]:
    if not labeling._inverse:
        system = labeling.system
        M = system.product.matrix
        _, t = reduce_points(system, labeling.forward[:, 0])
        canon = labeling.forward - (t @ M.T)[:, None, :]
        inverse = {}
        for k in range(labeling.size):
            key = _key(canon[k])
            if key in inverse:
                raise ValueError(f"central points {inverse[key][0]} and {k} share a label")
            inverse[key] = (k, t[k])
        labeling._inverse = inverse
    return labeling._inverse


def alpha_apply(labeling: LabelingFunction, lam_c) -> np.ndarray:
    """
    α(λ_c) for central basis coordinates λ_c, shape (L,) or (m, L).

    Returns:
        (n, L) or (m, n, L) central basis coordinates
    """
    U = np.asarray(lam_c, dtype=np.int64)
    single = U.ndim == 1
    idx, t = cell_index(labeling.system, CENTRAL, np.atleast_2d(U))
    out = labeling.forward[idx] + (t @ labeling.system.product.matrix.T)[:, None, :]
    return out[0] if single else out


def alpha_invert(labeling: LabelingFunction, tuple_coords) -> np.ndarray:
    """
    α⁻¹ of one tuple (n, L) in central basis coordinates.

    Raises:
        NotALabelError: If the tuple is not a label
    """
    system = labeling.system
    T = np.asarray(tuple_coords, dtype=np.int64)
    if T.shape != (system.n, system.dimension):
        raise NotALabelError(f"expected a ({system.n}, {system.dimension}) tuple, got {T.shape}")
    M = system.product.matrix
    _, t = reduce_points(system, T[:1])
    entry = _inverse_map(labeling).get(_key(T - M @ t[0]))
    if entry is None:
        raise NotALabelError(f"tuple {T.tolist()} is not in the image of the labeling")
    k, t_k = entry
    return labeling.central[k] + M @ (t[0] - t_k)


def alpha_invert_many(labeling: LabelingFunction, tuples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized α⁻¹ over (m, n, L) tuples.

    Returns:
        (central points (m, L), found mask (m,)); rows not found are zero
    """
    system = labeling.system
    T = np.asarray(tuples, dtype=np.int64)
    M = system.product.matrix
    _, t = reduce_points(system, T[:, 0])
    canon = T - (t @ M.T)[:, None, :]
    inverse = _inverse_map(labeling)
    out = np.zeros((len(T), system.dimension), dtype=np.int64)
    found = np.zeros(len(T), dtype=bool)
    for r in range(len(T)):
        entry = inverse.get(_key(canon[r]))
        if entry is not None:
            k, t_k = entry
            out[r] = labeling.central[k] + M @ (t[r] - t_k)
            found[r] = True
    return out, found


def random_labeling(tuple_set: TupleSet, profile: WeightProfile, rng: np.random.Generator) -> LabelingFunction:
    """A random bijection between tuples and central points, as a baseline."""
    system = tuple_set.system
    perm = rng.permutation(tuple_set.count)
    labeling = LabelingFunction(
        system=system,
        profile=profile,
        central=cell_points(system, CENTRAL),
        forward=tuple_set.tuples[perm],
        psi=tuple_set.psi,
        radius=tuple_set.radius,
    )
    labeling.cost = evaluate_labeling(labeling, profile)
    return labeling
