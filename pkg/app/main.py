import logging
import sys
import time
from typing import List, Optional

from app.cli import router
from app.core.config import LOG_LEVEL

logger = logging.getLogger(__name__)


def setup_logging(level: str = LOG_LEVEL) -> None:
    """Configure logging with local time."""
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
    )
    logging.Formatter.converter = time.localtime


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    return router.dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
