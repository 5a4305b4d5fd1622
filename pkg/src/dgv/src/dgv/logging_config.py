"""Logging setup for the dgv command line: rotating file log plus a rich console handler."""

import logging
import os
import tempfile
from logging.handlers import RotatingFileHandler

from rich.console import Console
from rich.logging import RichHandler

LOG_LEVEL_ENV = "DGV_LOG_LEVEL"
LOG_FILE_NAME = "dgv.log"
FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: str | None = None) -> str:
    """Route solver and CLI logs to ``{tempdir}/dgv.log`` and to stderr.

    The file receives everything down to DEBUG (per-step dt, conservation drift). The
    console level is ``level``, else ``DGV_LOG_LEVEL``, else WARNING.

    Returns:
        Path to the log file
    """
    level_name = (level or os.getenv(LOG_LEVEL_ENV, "WARNING")).upper()
    log_file = os.path.join(tempfile.gettempdir(), LOG_FILE_NAME)

    logging.root.handlers.clear()

    file_handler = RotatingFileHandler(log_file, maxBytes=5 * 1024 * 1024, backupCount=3)  # 5 MB
    file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
    file_handler.setLevel(logging.DEBUG)

    console_handler = RichHandler(console=Console(stderr=True), show_path=False, markup=False)
    console_handler.setLevel(getattr(logging, level_name, logging.WARNING))

    logging.root.setLevel(logging.DEBUG)
    logging.root.addHandler(file_handler)
    logging.root.addHandler(console_handler)

    logging.getLogger(__name__).debug(f"Logging to {log_file}, console level {level_name}")
    return log_file
