"""
Multiple-Description Encoder and Decoder

This module maps source vectors to descriptions and back:
- encode / encode_batch: nearest central point, then its label split into
  per-description (representative index, product translate) pairs
- decode / decode_batch: exact central point when every description arrives,
  the μ-weighted average of the received points otherwise
"""

from typing import Optional, Sequence

import numpy as np

from src.codec.models import EncodedBatch, EncodedFrame
from src.labeling.assignment import alpha_apply, alpha_invert_many
from src.labeling.models import LabelingFunction
from src.lattice.core import quantize
from src.nested.system import CENTRAL, cell_index, cell_points
from src.utils.logger import get_logger
from src.weights.models import Subset

logger = get_logger(__name__)


class FrameCorruptionError(ValueError):
    """Raised when a frame does not describe a labeled central point."""
    pass


# -------------------------------------------------------------------
# Encoding
# -------------------------------------------------------------------

def encode_batch(labeling: LabelingFunction, X) -> EncodedBatch:
    """
    Encode an (m, L) array of source vectors.

    Raises:
        DimensionMismatchError: If the vectors do not have length L
    """
    system = labeling.system
    lam_c = quantize(system.central, X)
    _, product_t = cell_index(system, CENTRAL, lam_c)
    tuples = alpha_apply(labeling, lam_c)

    m, n, L = tuples.shape
    side_idx = np.empty((m, n), dtype=np.int64)
    side_t = np.empty((m, n, L), dtype=np.int64)
    for i in range(n):
        side_idx[:, i], side_t[:, i] = cell_index(system, i, tuples[:, i])
    return EncodedBatch(
        central=lam_c,
        product_translates=product_t,
        side_indices=side_idx,
        side_translates=side_t,
    )


def encode(labeling: LabelingFunction, x: Sequence[float]) -> EncodedFrame:
    """Encode a single source vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a single vector, got shape {x.shape}")
    return encode_batch(labeling, x[None, :]).frame(0)


# -------------------------------------------------------------------
# Decoding
# -------------------------------------------------------------------

def side_points(labeling: LabelingFunction, side_indices: np.ndarray, side_translates: np.ndarray) -> np.ndarray:
    """
    Rebuild λ_i from (index, translate) pairs.

    Args:
        side_indices: (m, n)
        side_translates: (m, n, L)

    Returns:
        (m, n, L) central basis coordinates

    Raises:
        FrameCorruptionError: If an index is out of range
    """
    system = labeling.system
    M = system.product.matrix
    side_indices = np.asarray(side_indices, dtype=np.int64)
    side_translates = np.asarray(side_translates, dtype=np.int64)
    if side_indices.ndim != 2 or side_indices.shape[1] != system.n:
        raise FrameCorruptionError(f"expected {system.n} side indices per frame, got shape {side_indices.shape}")
    out = np.empty(side_translates.shape, dtype=np.int64)
    for i in range(system.n):
        reps = cell_points(system, i)
        idx = side_indices[:, i]
        if np.any((idx < 0) | (idx >= len(reps))):
            raise FrameCorruptionError(f"side index out of range [0, {len(reps)}) for description {i}")
        out[:, i] = reps[idx] + side_translates[:, i] @ M.T
    return out


def _check_received(n: int, received: Subset) -> Subset:
    received = tuple(sorted(set(received)))
    if not received:
        raise ValueError("no description received; reconstruct with the source mean")
    if received[0] < 0 or received[-1] >= n:
        raise ValueError(f"received set {received} names a description outside [0, {n})")
    return received


def decode_batch(
    labeling: LabelingFunction,
    batch: EncodedBatch,
    received: Subset,
    mu: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """
    Reconstruct (m, L) Cartesian vectors from the received descriptions.

    Raises:
        FrameCorruptionError: If all descriptions arrive but do not form a label
    """
    system = labeling.system
    received = _check_received(system.n, received)
    B = system.central.basis_matrix
    lams = side_points(labeling, batch.side_indices, batch.side_translates)

    if len(received) == system.n:
        central, found = alpha_invert_many(labeling, lams)
        if not np.all(found):
            raise FrameCorruptionError(f"{int((~found).sum())} frames do not form a label")
        return central.astype(float) @ B.T

    mu = np.asarray(system.mu if mu is None else mu, dtype=float)
    cart = lams[:, list(received)].astype(float) @ B.T
    return np.mean(cart * mu[list(received)][None, :, None], axis=1)


def decode(labeling: LabelingFunction, frame: EncodedFrame, received: Subset, mu: Optional[Sequence[float]] = None) -> np.ndarray:
    """Reconstruct one vector; see decode_batch."""
    L = labeling.system.dimension
    if frame.n != labeling.system.n:
        raise FrameCorruptionError(f"frame has {frame.n} descriptions, labeling has {labeling.system.n}")
    batch = EncodedBatch(
        central=np.zeros((1, L), dtype=np.int64),
        product_translates=np.asarray([frame.product_translate], dtype=np.int64),
        side_indices=np.asarray([frame.side_indices], dtype=np.int64),
        side_translates=np.asarray([frame.side_translates], dtype=np.int64),
    )
    return decode_batch(labeling, batch, received, mu)[0]
