import json
import logging
import sys
from pathlib import Path

from appdirs import user_config_dir
from colorama import Fore, Style

_PATH_APP_CONFIG = None

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


class ColorFormatter(logging.Formatter):
    """Level-coloured records; plain text when the stream is not a terminal."""

    COLORS = {
        logging.DEBUG: Style.DIM,
        logging.WARNING: Fore.YELLOW,
        logging.ERROR: Fore.RED,
        logging.CRITICAL: Style.BRIGHT + Fore.RED,
    }

    def __init__(self, fmt: str = LOG_FORMAT, use_color: bool = True):
        super().__init__(fmt)
        self.use_color = use_color

    def format(self, record):
        msg = super().format(record)
        color = self.COLORS.get(record.levelno) if self.use_color else None
        if not color:
            return msg
        return f"{color}{msg}{Style.RESET_ALL}"


def setup_logger(level: int = logging.INFO) -> logging.Logger:
    logger = logging.getLogger("rhparametrix")
    logger.setLevel(level)

    # the CLI calls this again to change the level
    if not logger.handlers:
        ch = logging.StreamHandler()
        ch.setFormatter(ColorFormatter(use_color=sys.stderr.isatty()))
        logger.addHandler(ch)

    for handler in logger.handlers:
        handler.setLevel(level)

    return logger


logger = setup_logger()


def get_config_path() -> Path:
    global _PATH_APP_CONFIG

    if _PATH_APP_CONFIG:
        return _PATH_APP_CONFIG

    _PATH_APP_CONFIG = Path(user_config_dir("rhparametrix"))
    return _PATH_APP_CONFIG


def load_config() -> dict | None:
    """Per-user defaults, merged under the tolerances of a problem file."""
    try:
        return json.loads((get_config_path() / "defaults.json").read_text())
    except (FileNotFoundError, json.JSONDecodeError):
        return None
