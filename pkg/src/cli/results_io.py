"""
Result Files

CSV tables carry a schema header line, `# schema_version=1`, ahead of the
column row; JSON documents carry a top-level "schema_version" key. Readers
reject any other version.
"""

import io
import json
import sys
from pathlib import Path
from typing import Optional, Union

import polars as pl

from src.utils.logger import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = 1
HEADER_PREFIX = "# schema_version="


class ResultsSchemaError(ValueError):
    """Raised when a result file is missing its schema header or has an unknown version."""
    pass


def render_csv(df: pl.DataFrame) -> str:
    """CSV text with the schema header."""
    return f"{HEADER_PREFIX}{SCHEMA_VERSION}\n" + df.write_csv()


def write_csv(df: pl.DataFrame, path: Optional[Union[str, Path]] = None) -> Optional[Path]:
    """Write a table to `path`, or to stdout when no path is given."""
    text = render_csv(df)
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {df.height} rows to {path}")
    return path


def parse_csv(text: str) -> pl.DataFrame:
    """
    Parse CSV text written by render_csv.

    Raises:
        ResultsSchemaError: If the header is missing or names another version
    """
    first, _, body = text.partition("\n")
    if not first.startswith(HEADER_PREFIX):
        raise ResultsSchemaError("missing schema_version header")
    version = first[len(HEADER_PREFIX):].strip()
    if version != str(SCHEMA_VERSION):
        raise ResultsSchemaError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    return pl.read_csv(io.StringIO(body))


def read_csv(path: Union[str, Path]) -> pl.DataFrame:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Cannot read results {path}: {e}", exc_info=True)
        raise ResultsSchemaError(f"cannot read results {path}: {e}") from e
    return parse_csv(text)


def render_json(document: dict) -> str:
    """Sorted, indented JSON with the schema version added."""
    return json.dumps({"schema_version": SCHEMA_VERSION, **document}, indent=2, sort_keys=True) + "\n"


def write_json(document: dict, path: Optional[Union[str, Path]] = None) -> Optional[Path]:
    text = render_json(document)
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info(f"Wrote JSON document to {path}")
    return path


def read_json(path: Union[str, Path]) -> dict:
    """
    Read a document written by write_json.

    Raises:
        ResultsSchemaError: On unreadable JSON or an unknown version
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ResultsSchemaError(f"cannot read results {path}: {e}") from e
    version = data.get("schema_version") if isinstance(data, dict) else None
    if version != SCHEMA_VERSION:
        raise ResultsSchemaError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    return data
