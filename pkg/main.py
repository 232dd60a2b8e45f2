"""
Main entry point for duplex-green.

Configures logging once and hands the command line to the batch front end.
"""

import logging
import sys
from typing import Optional, Sequence

from duplex_green.cli import main as run
from duplex_green.config import LOG_FORMAT

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format=LOG_FORMAT,
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return its exit code."""
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
