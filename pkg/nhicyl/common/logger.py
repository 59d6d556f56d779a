"""
🌀 nhicyl.common.logger

Contains the rich logging setup shared by every `nhicyl` module.
"""

import logging
from typing import Dict, Literal, Union

from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

console = Console(stderr=True)

LEVEL_STYLES: Dict[int, str] = {
    logging.CRITICAL: "bold red",
    logging.ERROR: "italic red",
    logging.WARNING: "italic yellow",
    logging.INFO: "white",
    logging.DEBUG: "italic dim",
}
"""
Markup applied to a message, by the highest level it reaches.
"""

Verbosity = Literal["debug", "info", "warning", "error", "critical"]


class RichMarkupFilter(logging.Filter):
    """
    Styles a record by level. The formatted message is escaped first:
    numeric logs print arrays and lists whose brackets rich would otherwise
    read as markup tags.
    """

    def filter(self, record: logging.LogRecord) -> bool:
        if getattr(record, "_nhicyl_styled", False):
            return True
        style = next(
            (s for level, s in sorted(LEVEL_STYLES.items(), reverse=True) if record.levelno >= level),
            None,
        )
        message = escape(record.getMessage())
        record.msg = f"[{style}]{message}[/{style}]" if style else message
        record.args = None
        record._nhicyl_styled = True
        return True


def setup_logging(level: Union[int, str] = logging.WARNING) -> logging.Logger:
    """
    Installs a single rich handler on the `nhicyl` logger. Calling it again
    replaces the handler instead of stacking a second one.
    """
    logger = logging.getLogger("nhicyl")

    handler = RichHandler(
        level=level,
        console=console,
        rich_tracebacks=True,
        show_time=False,
        show_path=False,
        markup=True,
    )
    handler.setFormatter(logging.Formatter("| [bold]{name}[/bold] - {message}", style="{"))
    handler.addFilter(RichMarkupFilter())
    if logger.hasHandlers():
        logger.handlers.clear()
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    # numerics log a lot at debug; keep them out of the root logger
    logger.propagate = False

    return logger


def verbosity(level: Verbosity) -> None:
    """Sets the level of the `nhicyl` logger and all of its handlers."""
    logger = logging.getLogger("nhicyl")
    logger.setLevel(level.upper())
    for handler in logger.handlers:
        handler.setLevel(level.upper())
