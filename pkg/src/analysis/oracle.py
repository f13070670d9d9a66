"""
Monte-Carlo Geometry Oracle

Independent estimates of the sphere-intersection integrals behind β_L and β̃_L:
- intersection_volume_mc: volume of two unit balls at a given distance
- mc_intersection_oracle: β_L and β̃_L from pairs of uniform points in the unit ball

All draws come from the ORACLE stream, chunk by chunk, so estimates are
reproducible for a given seed.
"""

import math
from typing import Iterator, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.lattice.core import unit_sphere_volume
from src.utils.logger import get_logger
from src.utils.rng import Stream, stream_generator
from src.utils.settings import get_settings

logger = get_logger(__name__)
settings = get_settings()


class IntersectionEstimate(BaseModel):
    """Monte-Carlo estimates of β_L and β̃_L with standard errors."""

    L: int = Field(..., ge=1)
    samples: int = Field(..., ge=1)
    beta: float
    beta_stderr: float = Field(..., ge=0)
    beta_tilde: float
    beta_tilde_stderr: float = Field(..., ge=0)


def _uniform_ball(rng: np.random.Generator, m: int, L: int) -> np.ndarray:
    direction = rng.standard_normal((m, L))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.random(m) ** (1.0 / L)
    return direction * radius[:, None]


def _chunks(samples: int) -> Iterator[Tuple[int, int]]:
    size = settings.simulation_chunk_size
    for index, start in enumerate(range(0, samples, size)):
        yield index, min(size, samples - start)


def _mean_stderr(total: float, total_sq: float, count: int) -> Tuple[float, float]:
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    return mean, math.sqrt(var / max(count - 1, 1))


def intersection_volume_mc(L: int, distance: float, samples: int, seed: int) -> Tuple[float, float]:
    """
    Volume of the intersection of two unit balls at the given distance.

    Returns:
        (estimate, standard error)
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    omega = unit_sphere_volume(L)
    shift = np.zeros(L)
    shift[0] = distance
    hits = 0
    for index, m in _chunks(samples):
        y = _uniform_ball(stream_generator(seed, Stream.ORACLE, index), m, L)
        hits += int(np.count_nonzero(np.sum((y - shift) ** 2, axis=1) <= 1.0))
    p = hits / samples
    return omega * p, omega * math.sqrt(p * (1.0 - p) / (samples - 1))


def mc_intersection_oracle(L: int, samples: int, seed: int) -> IntersectionEstimate:
    """
    Estimate β_L and β̃_L.

    With b and y uniform in the unit ball, P(‖y − b‖ ≤ 1) equals the
    normalized lens-volume integral; scaling by ω_L (L+1)/(2L ω_{L-1})
    gives β_L, and weighting each hit by ‖b‖² gives β̃_L.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    scale = unit_sphere_volume(L) * (L + 1) / (2.0 * L * unit_sphere_volume(L - 1))

    s1 = s1q = s2 = s2q = 0.0
    for index, m in _chunks(samples):
        rng = stream_generator(seed, Stream.ORACLE, index)
        b = _uniform_ball(rng, m, L)
        y = _uniform_ball(rng, m, L)
        hit = (np.sum((y - b) ** 2, axis=1) <= 1.0).astype(float)
        weighted = hit * np.sum(b * b, axis=1)
        s1 += float(hit.sum())
        s1q += float((hit * hit).sum())
        s2 += float(weighted.sum())
        s2q += float((weighted * weighted).sum())

    m1, e1 = _mean_stderr(s1, s1q, samples)
    m2, e2 = _mean_stderr(s2, s2q, samples)
    estimate = IntersectionEstimate(
        L=L,
        samples=samples,
        beta=scale * m1,
        beta_stderr=scale * e1,
        beta_tilde=scale * m2,
        beta_tilde_stderr=scale * e2,
    )
    logger.info(
        f"Intersection oracle L={L}: beta={estimate.beta:.5f}+/-{estimate.beta_stderr:.1e}, "
        f"beta_tilde={estimate.beta_tilde:.5f}+/-{estimate.beta_tilde_stderr:.1e}"
    )
    return estimate
