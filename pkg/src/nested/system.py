"""
Nested Lattice System

This module builds and queries the hierarchy Λ_π ⊂ Λ_i ⊂ Λ_c:
- build_nested: sublattices from similarity choices, product lattice, nesting checks
- canonical_rep / reduce_points: coset arithmetic modulo Λ_π (half-open cell)
- points_in_product_cell / cell_points: canonical representatives inside V_π(0)
- cell_index: vectorized representative index + Λ_π translate lookup
- is_clean: Voronoi-boundary check of Λ_c against a sublattice
- save_system / load_system: versioned JSON descriptor
"""

import json
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.lattice.core import CapacityError, quantize_with_ties, to_points
from src.lattice.models import LatticeName, LatticePoint, LatticeSpec
from src.nested.models import (
    DESCRIPTOR_VERSION,
    IndexSpec,
    NestedSystem,
    ProductRule,
    SublatticeSpec,
)
from src.utils.logger import get_logger
from src.utils.settings import get_settings

logger = get_logger(__name__)
settings = get_settings()

CENTRAL = "central"
PRODUCT = "product"

Which = Union[str, int]


class NestingError(Exception):
    """Raised when the product lattice is not contained in every sublattice."""
    pass


class InvalidIndexSpecError(ValueError):
    """Raised when a similarity choice does not fit the central lattice."""
    pass


class SystemDescriptorError(Exception):
    """Raised when a stored system descriptor is unreadable or of an unknown version."""
    pass


# -------------------------------------------------------------------
# Construction
# -------------------------------------------------------------------

def _product_matrix(matrices: List[np.ndarray], rule: ProductRule) -> np.ndarray:
    """Product lattice scale matrix. The similarity matrices commute, so order is irrelevant."""
    L = matrices[0].shape[0]
    if rule == ProductRule.DEDUPLICATED:
        unique: List[np.ndarray] = []
        for m in matrices:
            if not any(np.array_equal(m, u) for u in unique):
                unique.append(m)
        if len(unique) == 1:
            return unique[0] @ unique[0]
        factors = unique
    else:
        factors = matrices
    out = np.eye(L, dtype=np.int64)
    for m in factors:
        out = out @ m
    return out


def _divides(outer: np.ndarray, inner: np.ndarray) -> bool:
    """True when inner⁻¹·outer is integral, i.e. outer's lattice lies in inner's."""
    q = np.linalg.solve(inner.astype(float), outer.astype(float))
    return bool(np.all(np.abs(q - np.rint(q)) <= settings.tolerance))


def build_nested(
    central: LatticeSpec,
    index_specs: Sequence[IndexSpec],
    mu: Sequence[float],
    product_rule: ProductRule = ProductRule.DEDUPLICATED,
) -> NestedSystem:
    """
    Build a nested system. Description order is preserved.

    Args:
        central: Central lattice Λ_c
        index_specs: One similarity choice per description
        mu: Positive description weights
        product_rule: Product lattice convention

    Returns:
        NestedSystem

    Raises:
        InvalidIndexSpecError: If a similarity choice does not fit the lattice
        NestingError: If Λ_π is not contained in some Λ_i
    """
    specs = [IndexSpec.model_validate(s) for s in index_specs]
    try:
        matrices = [np.asarray(s.scale_matrix(central), dtype=np.int64) for s in specs]
    except ValueError as e:
        logger.error(f"Invalid index specification for {central.name.value}: {e}", exc_info=True)
        raise InvalidIndexSpecError(str(e)) from e

    product = _product_matrix(matrices, ProductRule(product_rule))
    for i, m in enumerate(matrices):
        if not _divides(product, m):
            raise NestingError(f"product lattice is not contained in sublattice {i} (matrix {m.tolist()})")

    system = NestedSystem(
        central=central,
        index_specs=specs,
        subs=[SublatticeSpec(scale_matrix=m.tolist()) for m in matrices],
        product=SublatticeSpec(scale_matrix=product.tolist()),
        mu=[float(v) for v in mu],
        product_rule=ProductRule(product_rule),
    )
    logger.info(
        f"Built nested system on {central.name.value}^{central.dimension}: "
        f"N_i={system.indices}, N_pi={system.product_index}, rule={system.product_rule.value}"
    )
    return system


def sublattice_similarity(system: NestedSystem, which: Which) -> np.ndarray:
    """Cartesian similarity S with Λ_s = S·Λ_c (which is a description index or PRODUCT)."""
    B = system.central.basis_matrix
    M = _scale_matrix(system, which).astype(float)
    return B @ M @ np.linalg.inv(B)


def _scale_matrix(system: NestedSystem, which: Which) -> np.ndarray:
    if which == PRODUCT:
        return system.product.matrix
    if which == CENTRAL:
        return np.eye(system.dimension, dtype=np.int64)
    if not isinstance(which, (int, np.integer)) or not 0 <= which < system.n:
        raise ValueError(f"no sublattice {which!r} in a {system.n}-description system")
    return system.subs[int(which)].matrix


# -------------------------------------------------------------------
# Coset arithmetic
# -------------------------------------------------------------------

def reduce_points(system: NestedSystem, U) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split central points into canonical representative and Λ_π translate.

    Args:
        system: Nested system
        U: (m, L) central basis coordinates

    Returns:
        (representatives, translates) with U = rep + M_π·translate; translates
        are in product-basis coordinates
    """
    U = np.atleast_2d(np.asarray(U, dtype=np.int64))
    M = system.product.matrix
    s = np.linalg.solve(M.astype(float), U.T.astype(float)).T
    t = np.floor(s + settings.tolerance).astype(np.int64)
    return U - t @ M.T, t


def canonical_rep(point: LatticePoint, system: NestedSystem) -> LatticePoint:
    """Translate of point by Λ_π lying in the canonical half-open cell."""
    reps, _ = reduce_points(system, [point.basis_coords])
    return to_points(system.central, reps)[0]


def _cell_box(system: NestedSystem) -> Tuple[np.ndarray, np.ndarray]:
    M = system.product.matrix
    L = system.dimension
    corners = np.array(np.meshgrid(*[[0, 1]] * L, indexing="ij")).reshape(L, -1)
    images = M @ corners
    return images.min(axis=1), images.max(axis=1)


def cell_points(system: NestedSystem, which: Which = CENTRAL) -> np.ndarray:
    """
    Canonical representatives inside the product cell, sorted lexicographically.

    Returns:
        (N_π, L) central basis coordinates for CENTRAL, or (N_π/N_i, L) for sub i
    """
    key = ("cell", which)
    if key in system._cache:
        return system._cache[key]

    if which == CENTRAL:
        lo, hi = _cell_box(system)
        box = int(np.prod((hi - lo + 1).astype(float)))
        if box > settings.max_enumeration_points:
            raise CapacityError(f"product cell box of {box} points exceeds budget")
        axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, system.dimension)
        s = np.linalg.solve(system.product.matrix.astype(float), grid.T.astype(float)).T
        tol = settings.tolerance
        inside = np.all((s >= -tol) & (s < 1.0 - tol), axis=1)
        pts = grid[inside]
        pts = pts[np.lexsort(pts.T[::-1])]
        if len(pts) != system.product_index:
            raise NestingError(f"found {len(pts)} central points in the product cell, expected {system.product_index}")
    else:
        central = cell_points(system, CENTRAL)
        M = _scale_matrix(system, which).astype(float)
        q = np.linalg.solve(M, central.T.astype(float)).T
        member = np.all(np.abs(q - np.rint(q)) <= settings.tolerance, axis=1)
        pts = central[member]
        expected = system.product_index // system.subs[int(which)].index
        if len(pts) != expected:
            raise NestingError(f"found {len(pts)} points of sublattice {which} in the product cell, expected {expected}")

    system._cache[key] = pts
    return pts


def points_in_product_cell(system: NestedSystem, which: Which = CENTRAL) -> List[LatticePoint]:
    """Canonical representatives of Λ_c (or Λ_i) modulo Λ_π as LatticePoint models."""
    return to_points(system.central, cell_points(system, which))


def _index_table(system: NestedSystem, which: Which) -> Tuple[np.ndarray, np.ndarray]:
    key = ("table", which)
    if key not in system._cache:
        lo, hi = _cell_box(system)
        table = np.full(tuple((hi - lo + 1).tolist()), -1, dtype=np.int64)
        pts = cell_points(system, which)
        table[tuple((pts - lo).T)] = np.arange(len(pts), dtype=np.int64)
        system._cache[key] = (lo, table)
    return system._cache[key]


def cell_index(system: NestedSystem, which: Which, U) -> Tuple[np.ndarray, np.ndarray]:
    """
    Index of each point's canonical representative among cell_points(which),
    plus its Λ_π translate.

    Raises:
        ValueError: If a point is not in the requested lattice
    """
    reps, t = reduce_points(system, U)
    lo, table = _index_table(system, which)
    idx = table[tuple((reps - lo).T)]
    if np.any(idx < 0):
        bad = reps[np.argmax(idx < 0)].tolist()
        raise ValueError(f"point with representative {bad} is not in lattice {which!r}")
    return idx, t


# -------------------------------------------------------------------
# Cleanliness
# -------------------------------------------------------------------

def is_clean(system: NestedSystem, which: Which = PRODUCT) -> Tuple[bool, Optional[LatticePoint]]:
    """
    Check that no central point lies on the boundary of the Voronoi cell of
    the chosen sublattice (a description index, or PRODUCT for Λ_π).

    Returns:
        (clean, witness) where witness is a boundary point of V_s(0) when not clean
    """
    S = sublattice_similarity(system, which)
    B = system.central.basis_matrix
    X = cell_points(system, CENTRAL) @ B.T
    Y = np.linalg.solve(S, X.T).T
    nearest, ties = quantize_with_ties(system.central, Y)
    on_boundary = np.nonzero(ties > 1)[0]
    if len(on_boundary) == 0:
        return True, None

    k = on_boundary[0]
    offset = X[k] - S @ (B @ nearest[k])
    witness_coords = np.rint(np.linalg.solve(B, offset)).astype(np.int64)
    logger.debug(f"Sublattice {which!r} is not clean, witness {witness_coords.tolist()}")
    return False, to_points(system.central, witness_coords)[0]


# -------------------------------------------------------------------
# Serialization
# -------------------------------------------------------------------

def save_system(system: NestedSystem, path: Union[str, Path]) -> Path:
    """Write the versioned descriptor as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(system.descriptor(), indent=2), encoding="utf-8")
    return path


def system_from_descriptor(descriptor: dict) -> NestedSystem:
    """
    Rebuild a system from its descriptor.

    Raises:
        SystemDescriptorError: On unknown version or inconsistent matrices
    """
    try:
        version = descriptor.get("version")
        if version != DESCRIPTOR_VERSION:
            raise SystemDescriptorError(f"unsupported system descriptor version {version!r}")
        lat = descriptor["lattice"]
        central = LatticeSpec.make(LatticeName(lat["name"]), int(lat.get("dimension", 0)), float(lat.get("scale", 1.0)))
        system = build_nested(
            central,
            [IndexSpec.model_validate(s) for s in descriptor["subs"]],
            descriptor["mu"],
            ProductRule(descriptor.get("product_rule", ProductRule.DEDUPLICATED.value)),
        )
    except SystemDescriptorError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        logger.error(f"Malformed system descriptor: {e}", exc_info=True)
        raise SystemDescriptorError(f"malformed system descriptor: {e}") from e

    stored = descriptor.get("scale_matrices")
    if stored is not None and stored != [s.scale_matrix for s in system.subs]:
        raise SystemDescriptorError("stored scale matrices disagree with the similarity choices")
    return system


def load_system(path: Union[str, Path]) -> NestedSystem:
    """Read a descriptor written by save_system."""
    try:
        descriptor = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read system descriptor {path}: {e}", exc_info=True)
        raise SystemDescriptorError(f"cannot read system descriptor {path}: {e}") from e
    return system_from_descriptor(descriptor)
