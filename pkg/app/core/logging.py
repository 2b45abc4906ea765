import logging
from typing import Optional

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


def setup_logging(level: Optional[str] = None) -> None:
    root_logger = logging.getLogger()
    if root_logger.handlers:
        if level:
            root_logger.setLevel(_resolve_level(level))
        return

    logging.basicConfig(level=_resolve_level(level or "INFO"), format=LOG_FORMAT)
    # uvicorn access lines are noisy next to training progress
    logging.getLogger("uvicorn.access").setLevel(logging.WARNING)


def _resolve_level(level: str) -> int:
    value = logging.getLevelName(level.strip().upper())
    return value if isinstance(value, int) else logging.INFO
