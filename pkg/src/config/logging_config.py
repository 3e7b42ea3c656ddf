"""Console logging with colorama-coloured level prefixes."""

import logging
import sys

from colorama import Fore, Style, init

_LEVEL_COLOURS = {
    logging.DEBUG: Style.DIM,
    logging.INFO: Fore.CYAN,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.RED + Style.BRIGHT,
}


class ColourFormatter(logging.Formatter):
    """Prefix each record with its level name in the level's colour."""

    def format(self, record: logging.LogRecord) -> str:
        colour = _LEVEL_COLOURS.get(record.levelno, "")
        prefix = f"{colour}{record.levelname:<7}{Style.RESET_ALL}"
        return f"{prefix} {record.name}: {record.getMessage()}" + (
            "\n" + self.formatException(record.exc_info) if record.exc_info else ""
        )


def setup_logging(level: str = "INFO") -> None:
    """Install a single coloured stream handler on the package logger."""
    init(strip=not sys.stderr.isatty())
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(ColourFormatter())
    root = logging.getLogger("src")
    root.handlers[:] = [handler]
    root.setLevel(level.upper())
    root.propagate = False
