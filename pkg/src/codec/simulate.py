"""
Monte-Carlo Simulation Harness

This module measures the codec on an i.i.d. Gaussian source:
- gaussian_source: reproducible stream of source chunks
- plug_in_entropy: empirical entropy from symbol counts
- simulate: per-pattern distortions, central distortion, empirical rates,
  optional i.i.d. erasure channel, closed-form predictions attached

Samples are split into fixed-size chunks drawn from keyed streams; chunks
can run on any number of threads and are merged in chunk order, so a seed
determines the result bit for bit.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from src.analysis.closed_forms import central_distortion, theoretical_distortion2, theoretical_distortion3
from src.analysis.special import UnsupportedDimensionError
from src.codec.coder import encode_batch, side_points
from src.codec.models import EMPTY_PATTERN, ExperimentResult, PatternResult, SourceConfig
from src.labeling.models import LabelingFunction
from src.nested.system import CENTRAL, cell_index
from src.utils.logger import get_logger, run_context
from src.utils.rng import Stream, stream_generator
from src.utils.settings import get_settings
from src.weights.models import Subset, WeightProfile, subset_key, subset_mask

logger = get_logger(__name__)
settings = get_settings()


class SimulationConfigError(ValueError):
    """Raised for invalid simulation parameters."""
    pass


# -------------------------------------------------------------------
# Source
# -------------------------------------------------------------------

def source_chunk(source: SourceConfig, L: int, seed: int, index: int, size: int) -> np.ndarray:
    """Chunk `index` of the source stream as an (size, L) array."""
    rng = stream_generator(seed, Stream.SOURCE, index)
    return source.mean + source.sigma * rng.standard_normal((size, L))


def gaussian_source(L: int, sigma2: float, seed: int, chunk_size: Optional[int] = None) -> Iterator[np.ndarray]:
    """
    Endless stream of (chunk_size, L) arrays of i.i.d. N(0, σ²) vectors.

    Example:
        >>> stream = gaussian_source(2, 1.0, seed=7)
        >>> next(stream).shape
        (65536, 2)
    """
    source = SourceConfig(sigma2=sigma2)
    size = chunk_size or settings.simulation_chunk_size
    index = 0
    while True:
        yield source_chunk(source, L, seed, index, size)
        index += 1


def _chunk_sizes(samples: int) -> List[int]:
    size = settings.simulation_chunk_size
    return [min(size, samples - start) for start in range(0, samples, size)]


# -------------------------------------------------------------------
# Entropy
# -------------------------------------------------------------------

def plug_in_entropy(counts: Dict[int, int]) -> float:
    """−Σ p log₂ p over observed symbol counts (bits)."""
    total = sum(counts.values())
    if total == 0:
        return 0.0
    p = np.array([c for _, c in sorted(counts.items())], dtype=float) / total
    return float(-np.sum(p * np.log2(p)))


def _window_symbols(index: np.ndarray, translates: np.ndarray, alphabet: int) -> np.ndarray:
    """
    Symbol id of each (translate, index) pair; translates outside the window
    share one escape symbol.
    """
    W = settings.entropy_window
    span = 2 * W + 1
    inside = np.all(np.abs(translates) <= W, axis=1)
    code = np.zeros(len(index), dtype=np.int64)
    for k in range(translates.shape[1]):
        code = code * span + (translates[:, k] + W)
    symbols = code * alphabet + index
    return np.where(inside, symbols, -1)


def _count(counts: Dict[int, int], symbols: np.ndarray) -> None:
    values, freq = np.unique(symbols, return_counts=True)
    for v, f in zip(values.tolist(), freq.tolist()):
        counts[v] = counts.get(v, 0) + f


# -------------------------------------------------------------------
# Simulation
# -------------------------------------------------------------------

def _patterns(n: int) -> List[Subset]:
    return [s for k in range(1, n + 1) for s in combinations(range(n), k)]


def _run_chunk(
    labeling: LabelingFunction,
    source: SourceConfig,
    seed: int,
    index: int,
    size: int,
    erasure_probability: Optional[float],
) -> dict:
    system = labeling.system
    n, L = system.n, system.dimension
    B = system.central.basis_matrix
    mu = np.asarray(system.mu)

    X = source_chunk(source, L, seed, index, size)
    batch = encode_batch(labeling, X)
    lams = side_points(labeling, batch.side_indices, batch.side_translates).astype(float) @ B.T
    central = batch.central.astype(float) @ B.T

    errors: Dict[Subset, np.ndarray] = {}
    for ell in _patterns(n):
        recon = central if len(ell) == n else np.mean(lams[:, list(ell)] * mu[list(ell)][None, :, None], axis=1)
        diff = X - recon
        errors[ell] = np.sum(diff * diff, axis=1)
    empty = np.sum((X - source.mean) ** 2, axis=1)

    stats = {
        "sse": {ell: float(e.sum()) for ell, e in errors.items()},
        "sse_empty": float(empty.sum()),
        "side_counts": [dict() for _ in range(n)],
        "central_counts": dict(),
        "channel_sse": None,
    }
    for i in range(n):
        alphabet = system.product_index // system.indices[i]
        _count(stats["side_counts"][i], _window_symbols(batch.side_indices[:, i], batch.side_translates[:, i], alphabet))
    central_idx, _ = cell_index(system, CENTRAL, batch.central)
    _count(stats["central_counts"], _window_symbols(central_idx, batch.product_translates, system.product_index))

    if erasure_probability is not None:
        rng = stream_generator(seed, Stream.ERASURES, index)
        received = rng.random((size, n)) >= erasure_probability
        masks = received.astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))
        channel = np.where(masks == 0, empty, 0.0)
        for ell, e in errors.items():
            channel = np.where(masks == subset_mask(ell), e, channel)
        stats["channel_sse"] = float(channel.sum())
    return stats


def _merge(parts: List[dict], n: int) -> dict:
    total = {
        "sse": {ell: 0.0 for ell in _patterns(n)},
        "sse_empty": 0.0,
        "side_counts": [dict() for _ in range(n)],
        "central_counts": dict(),
        "channel_sse": None,
    }
    for part in parts:
        for ell, v in part["sse"].items():
            total["sse"][ell] += v
        total["sse_empty"] += part["sse_empty"]
        for i in range(n):
            for k, v in part["side_counts"][i].items():
                total["side_counts"][i][k] = total["side_counts"][i].get(k, 0) + v
        for k, v in part["central_counts"].items():
            total["central_counts"][k] = total["central_counts"].get(k, 0) + v
        if part["channel_sse"] is not None:
            total["channel_sse"] = (total["channel_sse"] or 0.0) + part["channel_sse"]
    return total


def theory_predictions(labeling: LabelingFunction, profile: WeightProfile) -> Dict[Subset, Optional[float]]:
    """
    Closed-form per-dimension distortion for every received set where one exists.

    n = 2 uses the two-description forms; n = 3 with odd L the three-description
    forms; the full set gets the central distortion. Others are None.
    """
    system = labeling.system
    n, L = system.n, system.dimension
    out: Dict[Subset, Optional[float]] = {ell: None for ell in _patterns(n)}
    out[tuple(range(n))] = central_distortion(system.central)
    nu_c = system.central_volume
    if n == 2:
        d0, d1 = theoretical_distortion2(profile, L, nu_c, *system.indices)
        out[(0,)], out[(1,)] = d0, d1
    elif n == 3:
        try:
            out.update(theoretical_distortion3(profile, L, nu_c, system.indices))
        except UnsupportedDimensionError:
            logger.debug(f"No three-description closed form for even L={L}")
    return out


def simulate(
    labeling: LabelingFunction,
    profile: WeightProfile,
    source: SourceConfig,
    samples: int,
    seed: int,
    workers: int = 1,
    erasure_probability: Optional[float] = None,
) -> ExperimentResult:
    """
    Run the codec on `samples` source vectors.

    Args:
        labeling: Labeling to encode with
        profile: Weights used for the closed-form predictions
        source: Source parameters
        samples: Number of source vectors
        seed: Run seed
        workers: Threads; the result does not depend on it
        erasure_probability: Optional i.i.d. erasure probability per description

    Returns:
        ExperimentResult

    Raises:
        SimulationConfigError: On invalid parameters
    """
    if samples < 1:
        raise SimulationConfigError(f"sample count must be at least 1, got {samples}")
    if workers < 1:
        raise SimulationConfigError(f"workers must be at least 1, got {workers}")
    if erasure_probability is not None and not 0.0 <= erasure_probability <= 1.0:
        raise SimulationConfigError(f"erasure probability must lie in [0, 1], got {erasure_probability}")
    if profile.n != labeling.system.n:
        raise SimulationConfigError(f"profile has n={profile.n}, labeling has n={labeling.system.n}")

    system = labeling.system
    n, L = system.n, system.dimension
    sizes = _chunk_sizes(samples)
    started = time.perf_counter()

    def run(args: Tuple[int, int]) -> dict:
        index, size = args
        return _run_chunk(labeling, source, seed, index, size, erasure_probability)

    jobs = list(enumerate(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    total = _merge(parts, n)

    theory = theory_predictions(labeling, profile)
    norm = samples * L
    patterns = [PatternResult(pattern=EMPTY_PATTERN, samples=samples, empirical_mse=total["sse_empty"] / norm, theory_mse=source.sigma2)]
    patterns += [
        PatternResult(pattern=subset_key(ell), samples=samples, empirical_mse=sse / norm, theory_mse=theory[ell])
        for ell, sse in total["sse"].items()
    ]

    result = ExperimentResult(
        seed=seed,
        samples=samples,
        dimension=L,
        patterns=patterns,
        central_mse=total["sse"][tuple(range(n))] / norm,
        central_entropy=plug_in_entropy(total["central_counts"]) / L,
        side_entropies=[plug_in_entropy(c) / L for c in total["side_counts"]],
        erasure_probability=erasure_probability,
        channel_mse=None if total["channel_sse"] is None else total["channel_sse"] / norm,
        wall_clock_seconds=time.perf_counter() - started,
    )
    logger.info(
        f"Simulated {samples} vectors in {len(sizes)} chunks: central mse={result.central_mse:.4e}, "
        f"side entropies={[round(h, 4) for h in result.side_entropies]}",
        extra=run_context(seed=seed, samples=samples, workers=workers, indices=list(system.indices)),
    )
    return result


def gap_db(empirical: float, theory: float) -> float:
    """10 log₁₀ ratio of two distortions."""
    if empirical <= 0 or theory <= 0:
        raise SimulationConfigError("distortions must be positive to compare in dB")
    return 10.0 * math.log10(empirical / theory)
