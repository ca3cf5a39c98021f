import os
import sys


class Colors:
    """Class to define colors for terminal output"""

    HEADER = "\033[95m"
    INFO = "\033[94m"
    OKGREEN = "\033[92m"
    WARNING = "\033[93m"
    ERROR = "\033[91m"
    BOLD = "\033[1m"
    RESET = "\033[0m"


def plain_output() -> bool:
    """True when escapes should be stripped: NO_COLOR set or stderr not a terminal."""
    return bool(os.environ.get("NO_COLOR")) or not sys.stderr.isatty()
