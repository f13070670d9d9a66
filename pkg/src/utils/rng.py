"""
Keyed random streams.

Every random quantity in the package is drawn from a counter-based Philox
generator keyed by (seed, stream, index). Chunk k of any stream can be
regenerated on its own, so results do not depend on how work is split
across workers.
"""

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """Named stream identifiers."""
    SOURCE = 0
    BINNING = 1
    ERASURES = 2
    ORACLE = 3
    TIES = 4


def stream_generator(seed: int, stream: Stream, index: int = 0) -> np.random.Generator:
    """
    Build the generator for one (seed, stream, index) key.

    Args:
        seed: Run seed (non-negative)
        stream: Stream identifier
        index: Chunk or trial index within the stream

    Returns:
        Independent numpy Generator
    """
    if seed < 0 or index < 0:
        raise ValueError(f"seed and index must be non-negative, got {seed}, {index}")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.Philox(seq))
