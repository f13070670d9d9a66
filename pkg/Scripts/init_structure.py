"""
Workspace Layout

Creates the run directories a fresh checkout needs before build-labeling
and simulate write their artifacts:
- configs/: experiment JSON documents
- data/artifacts/: labeling tables and nested-system descriptors
- data/results/: simulation and analysis CSV/JSON
- logs/: rotating JSON logs
"""

import sys
from pathlib import Path
from typing import Dict, List

# Project root (run from project root)
ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from src.utils.logger import get_logger
from src.utils.settings import get_settings

logger = get_logger(__name__)
settings = get_settings()

STRUCTURE: Dict[str, List[str]] = {
    "configs": [],
    "data": [
        "artifacts",
        "results"
    ],
    "logs": [],
}


def create_structure(base_path: Path, structure: Dict[str, List[str]] = STRUCTURE) -> List[Path]:
    """
    Create every folder of the layout under base_path.

    Returns:
        The directories that did not exist before
    """
    created: List[Path] = []
    for folder, subfolders in structure.items():
        for path in [base_path / folder] + [base_path / folder / sub for sub in subfolders]:
            if not path.exists():
                path.mkdir(parents=True)
                created.append(path)
    logger.info(f"Workspace layout ready under {base_path}: {len(created)} directories created")
    return created


if __name__ == "__main__":
    create_structure(settings.root_path)
    print("Project structure created successfully.")
