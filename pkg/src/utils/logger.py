import logging
import json
from pathlib import Path
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Any, Dict, Mapping, Optional

from src.utils.settings import settings


# -------------------------------------------------------------------
# JSON Log Formatter
# -------------------------------------------------------------------

class JsonFormatter(logging.Formatter):
    """
    One JSON object per record.

    Run parameters passed as `extra={"context": {...}}` (seed, sample count,
    system indices) are emitted under "context" so runs can be traced from
    the log alone.
    """

    def format(self, record: logging.LogRecord) -> str:
        log_record: Dict[str, Any] = {
            "timestamp": datetime.utcnow().isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "function": record.funcName,
            "message": record.getMessage(),
            "environment": settings.environment,
            "project": settings.project_name,
        }

        context = getattr(record, "context", None)
        if isinstance(context, Mapping):
            log_record["context"] = {str(k): _plain(v) for k, v in context.items()}

        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_record)


def _plain(value: Any) -> Any:
    """numpy scalars and arrays become JSON-native values."""
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return str(value)


def run_context(**fields: Any) -> Dict[str, Any]:
    """`extra` payload for a log call: logger.info(msg, extra=run_context(seed=1))."""
    return {"context": fields}


# -------------------------------------------------------------------
# Logger Factory
# -------------------------------------------------------------------

def get_logger(name: str, level: Optional[str] = None) -> logging.Logger:
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, level or settings.log_level, logging.INFO))

    if logger.handlers:
        return logger

    formatter = JsonFormatter()

    # stderr only; stdout carries CSV/JSON results
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    log_dir: Path = settings.logs_path
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_dir / "application.log",
            maxBytes=10_000_000,
            backupCount=5,
            encoding="utf-8"
        )
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
    except OSError:
        logger.warning(f"Log directory not writable, file logging disabled: {log_dir}")

    logger.propagate = False
    return logger
