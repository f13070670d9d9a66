"""
Lattice Geometry Core

This module provides the lattice substrate every other module quantizes against:
- Exact nearest-point quantization for Z^L, A2 and D4 (scalar and vectorized)
- Sphere constants: normalized second moment G(S_L) and unit-ball volume ω_L
- Exhaustive ball enumeration by bounding-box scan in basis coordinates
- Covering-radius bound for similar sublattices of a given index
- Monte-Carlo estimate of the normalized second moment
- make_lattice: validated factory for the supported families
"""

import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from src.lattice.models import LatticeName, LatticePoint, LatticeSpec
from src.utils.logger import get_logger
from src.utils.rng import Stream, stream_generator
from src.utils.settings import get_settings

logger = get_logger(__name__)
settings = get_settings()

_QUANTIZE_CHUNK = 16_384


class DimensionMismatchError(ValueError):
    """Raised when a vector does not match the lattice dimension."""
    pass


class CapacityError(Exception):
    """Raised when an enumeration would exceed the configured memory budget."""
    pass


class UnsupportedLatticeError(ValueError):
    """Raised for a lattice family or dimension outside Z^L, A2 and D4."""
    pass


# -------------------------------------------------------------------
# Construction
# -------------------------------------------------------------------

_FIXED_DIMENSION = {LatticeName.A2: 2, LatticeName.D4: 4}


def make_lattice(name: str, dimension: int = 0, scale: float = 1.0) -> LatticeSpec:
    """
    Build a supported lattice; `scale` multiplies the basis, so ν = scale^L·ν_unit.

    Raises:
        UnsupportedLatticeError: Unknown family, a dimension A2/D4 do not have,
            or a non-positive Z dimension or scale
    """
    try:
        family = LatticeName(name)
    except ValueError as e:
        raise UnsupportedLatticeError(f"unsupported lattice {name!r}; choose one of {[n.value for n in LatticeName]}") from e
    fixed = _FIXED_DIMENSION.get(family)
    if fixed is not None and dimension not in (0, fixed):
        raise UnsupportedLatticeError(f"{family.value} is {fixed}-dimensional, got L={dimension}")
    if family == LatticeName.Z and dimension < 1:
        raise UnsupportedLatticeError(f"Z^L needs L >= 1, got {dimension}")
    if scale <= 0:
        raise UnsupportedLatticeError(f"scale must be positive, got {scale}")
    lattice = LatticeSpec.make(family, dimension, scale)
    logger.debug(f"Built {family.value} lattice, L={lattice.dimension}, nu={lattice.cell_volume:.6g}")
    return lattice


# -------------------------------------------------------------------
# Sphere constants
# -------------------------------------------------------------------

def sphere_second_moment(L: int) -> float:
    """
    Normalized second moment of the L-dimensional ball,
    G(S_L) = Γ(L/2 + 1)^{2/L} / ((L + 2) π).
    """
    if L < 1:
        raise ValueError(f"dimension must be positive, got {L}")
    return math.exp((2.0 / L) * gammaln(L / 2.0 + 1.0)) / ((L + 2) * math.pi)


def unit_sphere_volume(L: int) -> float:
    """Volume ω_L of the unit ball in R^L (ω_0 = 1)."""
    if L < 0:
        raise ValueError(f"dimension must be non-negative, got {L}")
    return math.exp((L / 2.0) * math.log(math.pi) - gammaln(L / 2.0 + 1.0))


def covering_radius_bound(lattice: LatticeSpec, index: int) -> float:
    """
    Covering-radius bound for a similar sublattice of the given index,
    r = (1/2) √2 ν^{1/L} N^{1/L}.
    """
    if index < 1:
        raise ValueError(f"index must be positive, got {index}")
    L = lattice.dimension
    return 0.5 * math.sqrt(2.0) * lattice.cell_volume ** (1.0 / L) * index ** (1.0 / L)


# -------------------------------------------------------------------
# Nearest point
# -------------------------------------------------------------------

def _as_rows(lattice: LatticeSpec, X) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != lattice.dimension:
        raise DimensionMismatchError(
            f"expected vectors of length {lattice.dimension}, got shape {np.shape(X)}"
        )
    return arr


def _primary_candidate(lattice: LatticeSpec, X: np.ndarray) -> np.ndarray:
    """Nearest point in basis coordinates, before tie resolution."""
    B = lattice.basis_matrix

    if lattice.name == LatticeName.Z:
        return np.ceil(X / lattice.scale - 0.5).astype(np.int64)

    if lattice.name == LatticeName.A2:
        y = np.linalg.solve(B, X.T).T
        base = np.floor(y).astype(np.int64)
        offsets = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int64)
        cand = base[:, None, :] + offsets[None, :, :]
        dist = np.sum((cand @ B.T - X[:, None, :]) ** 2, axis=2)
        return cand[np.arange(len(X)), np.argmin(dist, axis=1)]

    # D4: round, then fix parity by moving the worst coordinate the other way.
    z = X / lattice.scale
    f = np.floor(z + 0.5)
    odd = (np.sum(f, axis=1) % 2) != 0
    if np.any(odd):
        rows = np.nonzero(odd)[0]
        diff = z[rows] - f[rows]
        worst = np.argmax(np.abs(diff), axis=1)
        step = np.where(diff[np.arange(len(rows)), worst] >= 0, 1.0, -1.0)
        f[rows, worst] += step
    unit = B / lattice.scale
    return np.rint(np.linalg.solve(unit, f.T).T).astype(np.int64)


def _lexicographic_nearest(B: np.ndarray, X: np.ndarray, cand: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Among candidates (m, K, L), the nearest with smallest basis coordinates, and the tie count."""
    dist = np.sum((cand @ B.T - X[:, None, :]) ** 2, axis=2)
    dmin = dist.min(axis=1)
    tied = dist - dmin[:, None] <= settings.tolerance
    mask = tied.copy()

    big = np.iinfo(np.int64).max
    for k in range(cand.shape[2]):
        vals = np.where(mask, cand[:, :, k], big)
        mask &= cand[:, :, k] == vals.min(axis=1)[:, None]

    return cand[np.arange(len(X)), np.argmax(mask, axis=1)], np.sum(tied, axis=1)


def _resolve_ties(lattice: LatticeSpec, X: np.ndarray, U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pick the lexicographically smallest basis coordinates among points tied
    for nearest.

    A row off every Voronoi facet of the primary point has no tie. Rows on a
    facet are rescanned over every point within twice the covering radius,
    which holds all points tied on lower-dimensional faces (Z^L corners, D4
    deep holes).

    Returns:
        (chosen basis coordinates, number of tied points per row)
    """
    B = lattice.basis_matrix
    steps = np.vstack([np.zeros((1, lattice.dimension), dtype=np.int64), lattice.relevant_vectors])
    chosen, ties = _lexicographic_nearest(B, X, U[:, None, :] + steps[None, :, :])

    boundary = np.nonzero(ties > 1)[0]
    if len(boundary):
        wide = ball_basis_coords(B, np.zeros(lattice.dimension), 2.0 * lattice.covering_radius)
        chosen[boundary], ties[boundary] = _lexicographic_nearest(
            B, X[boundary], U[boundary][:, None, :] + wide[None, :, :]
        )
    return chosen, ties


def quantize(lattice: LatticeSpec, X) -> np.ndarray:
    """
    Vectorized nearest-point quantization.

    Args:
        lattice: Lattice to quantize against
        X: (m, L) array of vectors (or a single length-L vector)

    Returns:
        (m, L) int64 array of basis coordinates
    """
    coords, _ = quantize_with_ties(lattice, X)
    return coords


def quantize_with_ties(lattice: LatticeSpec, X) -> Tuple[np.ndarray, np.ndarray]:
    """Like quantize, also returning how many points tie for nearest per row."""
    rows = _as_rows(lattice, X)
    coords = np.empty(rows.shape, dtype=np.int64)
    ties = np.empty(len(rows), dtype=np.int64)
    for start in range(0, len(rows), _QUANTIZE_CHUNK):
        block = rows[start:start + _QUANTIZE_CHUNK]
        stop = start + len(block)
        coords[start:stop], ties[start:stop] = _resolve_ties(lattice, block, _primary_candidate(lattice, block))
    return coords, ties


def to_cartesian(lattice: LatticeSpec, U) -> np.ndarray:
    """Map integer basis coordinates to Cartesian coordinates."""
    return np.asarray(U, dtype=float) @ lattice.basis_matrix.T


def to_points(lattice: LatticeSpec, U) -> List[LatticePoint]:
    """Wrap an array of basis coordinates as LatticePoint models."""
    U = np.atleast_2d(np.asarray(U, dtype=np.int64))
    coords = to_cartesian(lattice, U)
    return [
        LatticePoint(coords=c.tolist(), basis_coords=[int(v) for v in u])
        for c, u in zip(coords, U)
    ]


def nearest_point(lattice: LatticeSpec, x: Sequence[float]) -> LatticePoint:
    """
    Nearest lattice point to x; ties go to the lexicographically smallest
    basis coordinates.

    Raises:
        DimensionMismatchError: If len(x) != L
    """
    if np.ndim(x) != 1:
        raise DimensionMismatchError(f"expected a single vector, got shape {np.shape(x)}")
    return to_points(lattice, quantize(lattice, x))[0]


def nearest_point_ties(lattice: LatticeSpec, x: Sequence[float]) -> int:
    """Number of lattice points tied for nearest to x (1 off the Voronoi boundaries)."""
    _, ties = quantize_with_ties(lattice, x)
    return int(ties[0])


# -------------------------------------------------------------------
# Enumeration
# -------------------------------------------------------------------

def ball_basis_coords(basis: np.ndarray, center, radius: float) -> np.ndarray:
    """
    Integer coordinates u with ‖basis·u − center‖ ≤ radius, sorted lexicographically.

    Works for any non-singular basis, so sublattices can be scanned with
    their own generator matrix.

    Raises:
        CapacityError: If the bounding box exceeds the enumeration budget
    """
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    basis = np.asarray(basis, dtype=float)
    center = np.asarray(center, dtype=float)
    if center.shape != (basis.shape[0],):
        raise DimensionMismatchError(f"center has shape {center.shape}, basis is {basis.shape}")

    inv = np.linalg.inv(basis)
    y0 = inv @ center
    half = radius * np.linalg.norm(inv, axis=1)
    tol = settings.tolerance
    lo = np.ceil(y0 - half - tol).astype(np.int64)
    hi = np.floor(y0 + half + tol).astype(np.int64)
    extents = np.maximum(hi - lo + 1, 0)

    box = int(np.prod(extents.astype(float)))
    if box > settings.max_enumeration_points:
        raise CapacityError(
            f"bounding box of {box} points exceeds budget {settings.max_enumeration_points} "
            f"(radius={radius})"
        )
    if box == 0:
        return np.empty((0, basis.shape[0]), dtype=np.int64)

    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, basis.shape[0])
    d2 = np.sum((grid @ basis.T - center) ** 2, axis=1)
    inside = grid[d2 <= radius * radius + tol]
    order = np.lexsort(inside.T[::-1])
    return inside[order]


def enumerate_in_ball(lattice: LatticeSpec, center: Sequence[float], radius: float) -> List[LatticePoint]:
    """
    All lattice points within distance radius of center (boundary included),
    sorted lexicographically by basis coordinates.
    """
    center = np.asarray(center, dtype=float)
    if center.shape != (lattice.dimension,):
        raise DimensionMismatchError(f"center has length {center.size}, lattice dimension is {lattice.dimension}")
    U = ball_basis_coords(lattice.basis_matrix, center, radius)
    logger.debug(f"Enumerated {len(U)} points of {lattice.name.value} within radius {radius}")
    return to_points(lattice, U)


# -------------------------------------------------------------------
# Second-moment oracle
# -------------------------------------------------------------------

def monte_carlo_second_moment(lattice: LatticeSpec, samples: int, seed: int) -> Tuple[float, float]:
    """
    Monte-Carlo estimate of G(Λ) from uniform samples over a fundamental
    parallelepiped (quantization error is then uniform over V(0)).

    Returns:
        (estimate, standard error)
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    L = lattice.dimension
    B = lattice.basis_matrix
    norm = L * lattice.cell_volume ** (2.0 / L)

    total, total_sq, done, chunk = 0.0, 0.0, 0, 0
    while done < samples:
        m = min(settings.simulation_chunk_size, samples - done)
        rng = stream_generator(seed, Stream.ORACLE, chunk)
        X = rng.random((m, L)) @ B.T
        err = X - to_cartesian(lattice, quantize(lattice, X))
        vals = np.sum(err * err, axis=1) / norm
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += m
        chunk += 1

    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    stderr = math.sqrt(var / (samples - 1))
    logger.info(f"Second moment of {lattice.name.value}: {mean:.6f} +/- {stderr:.2e} ({samples} samples)")
    return mean, stderr
