"""
Random Binning of Side Indices

Three-description experiment where each description sends only a bin of
its representative index:
- bin_assign: random balanced bins, 2^{L·R_b} per description
- bin_decode: every representative pair consistent with two received bins
- binning_ambiguity: how often two bins leave more than one pair
"""

from itertools import combinations
from typing import Tuple

import numpy as np
import polars as pl

from src.codec.models import AmbiguityReport, BinDecodeResult, BinTable
from src.labeling.models import LabelingFunction
from src.nested.system import cell_index
from src.utils.logger import get_logger
from src.utils.rng import Stream, stream_generator
from src.weights.models import subset_key

logger = get_logger(__name__)


def bins_for_rate(binning_rate: float, L: int) -> int:
    """Number of bins, round(2^{L·R_b}), at least one."""
    return max(1, int(round(2.0 ** (L * binning_rate))))


def _pair_inventory(labeling: LabelingFunction, i: int, j: int) -> pl.DataFrame:
    """Representative indices of α_i and α_j for every canonical central point."""
    system = labeling.system
    idx_i, _ = cell_index(system, i, labeling.forward[:, i])
    idx_j, _ = cell_index(system, j, labeling.forward[:, j])
    return pl.DataFrame({
        "idx_i": idx_i.astype(np.int64),
        "idx_j": idx_j.astype(np.int64),
        "central": np.arange(labeling.size, dtype=np.int64),
    })


def bin_assign(labeling: LabelingFunction, binning_rate: float, seed: int) -> BinTable:
    """
    Randomly bin each description's representatives.

    A random permutation of the N_π/N_i representatives is reduced modulo the
    bin count, so bins differ in size by at most one.

    Raises:
        ValueError: Unless the labeling has three descriptions
    """
    system = labeling.system
    if system.n != 3:
        raise ValueError(f"binning needs three descriptions, got n={system.n}")
    if binning_rate <= 0:
        raise ValueError(f"binning rate must be positive, got {binning_rate}")
    count = bins_for_rate(binning_rate, system.dimension)
    bins = []
    for i in range(system.n):
        size = system.product_index // system.indices[i]
        perm = stream_generator(seed, Stream.BINNING, i).permutation(size)
        bins.append((perm % count).astype(np.int64))
    pairs = {subset_key((i, j)): _pair_inventory(labeling, i, j) for i, j in combinations(range(system.n), 2)}
    logger.debug(f"Binned {system.n} descriptions into {count} bins each (R_b={binning_rate})")
    return BinTable(binning_rate=binning_rate, bins_per_description=count, bins=bins, pairs=pairs)


def _binned_pairs(table: BinTable, i: int, j: int) -> pl.DataFrame:
    inventory = table.pairs[subset_key((i, j))]
    return inventory.with_columns(
        pl.Series("bin_i", table.bins[i][inventory["idx_i"].to_numpy()]),
        pl.Series("bin_j", table.bins[j][inventory["idx_j"].to_numpy()]),
    )


def bin_decode(table: BinTable, pair: Tuple[int, int], received_bins: Tuple[int, int]) -> BinDecodeResult:
    """
    Representative pairs consistent with the two received bins.

    Ambiguity is reported in the result, not raised.
    """
    i, j = sorted(pair)
    b_i, b_j = received_bins if pair[0] <= pair[1] else received_bins[::-1]
    matches = (
        _binned_pairs(table, i, j)
        .filter((pl.col("bin_i") == b_i) & (pl.col("bin_j") == b_j))
        .group_by(["idx_i", "idx_j"], maintain_order=True)
        .agg(pl.col("central"))
        .sort(["idx_i", "idx_j"])
    )
    candidates = list(zip(matches["idx_i"].to_list(), matches["idx_j"].to_list()))
    return BinDecodeResult(
        unique=len(candidates) == 1,
        candidates=candidates,
        central_indices=[list(c) for c in matches["central"].to_list()],
    )


def binning_ambiguity(
    labeling: LabelingFunction,
    binning_rate: float,
    trials: int,
    seed: int,
    pair: Tuple[int, int] = (0, 1),
) -> AmbiguityReport:
    """
    Fraction of random central points whose two bins admit more than one
    representative pair, and the expected count of false candidates,
    (distinct pairs − 1)/bins².
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    table = bin_assign(labeling, binning_rate, seed)
    i, j = sorted(pair)
    binned = _binned_pairs(table, i, j)

    distinct = binned.unique(subset=["idx_i", "idx_j"])
    per_bin = distinct.group_by(["bin_i", "bin_j"]).agg(pl.len().alias("candidates"))
    lookup = binned.join(per_bin, on=["bin_i", "bin_j"], how="left").sort("central")
    ambiguous_point = lookup["candidates"].to_numpy() > 1

    rng = stream_generator(seed, Stream.BINNING, labeling.system.n)
    picks = rng.integers(0, labeling.size, size=trials)
    ambiguous = int(ambiguous_point[picks].sum())

    count = table.bins_per_description
    report = AmbiguityReport(
        binning_rate=binning_rate,
        bins_per_description=count,
        trials=trials,
        ambiguous=ambiguous,
        expected_false_candidates=max(len(distinct) - 1, 0) / float(count * count),
    )
    logger.info(
        f"Binning ambiguity at R_b={binning_rate}: {report.frequency:.4f} "
        f"({count} bins, {len(distinct)} distinct pairs)"
    )
    return report
