"""
Labeling Table Files

Versioned JSON form of a labeling:
{"version": 1, "system": descriptor, "psi": ..., "radius": ..., "profile": {...},
 "entries": [{"c": [...], "tuple": [[...], ...]}, ...]}
"""

import json
from pathlib import Path
from typing import Union

import numpy as np
from src.labeling.assignment import assign_tuples, evaluate_labeling
from src.labeling.models import TABLE_VERSION, LabelingFunction
from src.labeling.tuples import generate_tuples
from src.nested.models import NestedSystem
from src.nested.system import CENTRAL, SystemDescriptorError, cell_index, cell_points, system_from_descriptor
from src.utils.logger import get_logger
from src.weights.models import WeightProfile, WeightProfileError, profile_from_dict

logger = get_logger(__name__)


class LabelingTableError(Exception):
    """Raised when a labeling table is unreadable, inconsistent or of an unknown version."""
    pass


def build_labeling(system: NestedSystem, profile: WeightProfile, workers: int = 1) -> LabelingFunction:
    """Tuple generation followed by optimal assignment."""
    return assign_tuples(generate_tuples(system, profile, workers=workers), profile)


def labeling_to_dict(labeling: LabelingFunction) -> dict:
    return {
        "version": TABLE_VERSION,
        "system": labeling.system.descriptor(),
        "psi": labeling.psi,
        "radius": labeling.radius,
        "profile": labeling.profile.model_dump(mode="json"),
        "entries": [
            {"c": c.tolist(), "tuple": t.tolist()}
            for c, t in zip(labeling.central, labeling.forward)
        ],
    }


def save_labeling(labeling: LabelingFunction, path: Union[str, Path]) -> Path:
    """Write the labeling table as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(labeling_to_dict(labeling), indent=1), encoding="utf-8")
    logger.info(f"Saved labeling with {labeling.size} entries to {path}")
    return path


def labeling_from_dict(data: dict) -> LabelingFunction:
    """
    Rebuild a labeling from its table.

    Raises:
        LabelingTableError: On an unknown version or entries that do not
            cover the canonical product cell exactly once
    """
    version = data.get("version") if isinstance(data, dict) else None
    if version != TABLE_VERSION:
        raise LabelingTableError(f"unsupported labeling table version {version!r}")
    try:
        system = system_from_descriptor(data["system"])
        profile = (
            profile_from_dict(data["profile"])
            if data.get("profile") is not None
            else WeightProfile.symmetric(system.n, mu=list(system.mu))
        )
        entries = data["entries"]
        central = np.asarray([e["c"] for e in entries], dtype=np.int64).reshape(-1, system.dimension)
        tuples = np.asarray([e["tuple"] for e in entries], dtype=np.int64).reshape(-1, system.n, system.dimension)
    except (SystemDescriptorError, WeightProfileError, KeyError, TypeError, ValueError) as e:
        logger.error(f"Malformed labeling table: {e}", exc_info=True)
        raise LabelingTableError(f"malformed labeling table: {e}") from e

    N = system.product_index
    if len(central) != N or len(tuples) != N:
        raise LabelingTableError(f"table has {len(central)} entries, expected {N}")
    try:
        idx, t = cell_index(system, CENTRAL, central)
    except ValueError as e:
        raise LabelingTableError(f"table entry is not a central point: {e}") from e
    if np.any(t != 0) or len(np.unique(idx)) != N:
        raise LabelingTableError("table entries do not cover the canonical product cell exactly once")
    for i in range(system.n):
        try:
            cell_index(system, i, tuples[:, i])
        except ValueError as e:
            raise LabelingTableError(f"tuple element {i} is not in its sublattice: {e}") from e

    forward = np.empty_like(tuples)
    forward[idx] = tuples
    labeling = LabelingFunction(
        system=system,
        profile=profile,
        central=cell_points(system, CENTRAL),
        forward=forward,
        psi=float(data.get("psi", 0.0)),
        radius=float(data.get("radius", 0.0)),
    )
    labeling.cost = evaluate_labeling(labeling, profile)
    return labeling


def load_labeling(path: Union[str, Path]) -> LabelingFunction:
    """Read a table written by save_labeling."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read labeling table {path}: {e}", exc_info=True)
        raise LabelingTableError(f"cannot read labeling table {path}: {e}") from e
    return labeling_from_dict(data)
