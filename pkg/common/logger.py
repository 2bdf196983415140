import logging
import threading
import time
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Iterator

from common.config import CONFIG

COMMAND = logging.INFO + 2
SUCCESS = logging.INFO + 5
logging.addLevelName(COMMAND, 'COMMAND')
logging.addLevelName(SUCCESS, 'SUCCESS')

RESET = '\033[0m'
COLORS = {
    logging.DEBUG: RESET,
    logging.INFO: '\033[0;36m',
    COMMAND: '\033[0;35m',
    SUCCESS: '\033[0;32m',
    logging.WARNING: '\033[1;33m',
    logging.ERROR: '\033[0;31m',
}


class Logger:
    """
    Console and file logger shared by every command of a run.

    The file handler writes the run log next to the run's artifacts; the console
    gets colored, timestamped one-liners. Worker threads may log concurrently.
    """
    def __init__(self, log_dir: Path, verbose: bool = False, quiet: bool = False, timestamp_format: str = '%H:%M:%S'):
        log_dir.mkdir(parents=True, exist_ok=True)
        self.log_file = log_dir / CONFIG['files']['log']
        self.console_level = logging.WARNING if quiet else (logging.DEBUG if verbose else logging.INFO)
        self.timestamp_format = timestamp_format
        self._lock = threading.Lock()

        # One handler per run directory; a second Logger in the same process gets its own file.
        self.logger = logging.getLogger(f"KPPLab.{log_dir.resolve()}")
        self.logger.setLevel(logging.DEBUG if verbose else logging.INFO)
        self.logger.propagate = False
        if not self.logger.handlers:
            handler = logging.FileHandler(self.log_file, mode='w')
            handler.setFormatter(logging.Formatter('%(asctime)s [%(levelname)-8s] %(threadName)s %(message)s',
                                                   datefmt='%Y-%m-%d %H:%M:%S'))
            self.logger.addHandler(handler)

    def _emit(self, level: int, message: str):
        self.logger.log(level, message)
        if level < self.console_level:
            return
        name = logging.getLevelName(level)
        stamp = datetime.now().strftime(self.timestamp_format)
        with self._lock:
            print(f"[{stamp}] [{COLORS.get(level, RESET)}{name: <8}{RESET}] {message}")

    def debug(self, message: str):
        self._emit(logging.DEBUG, message)

    def info(self, message: str):
        self._emit(logging.INFO, message)

    def command(self, message: str):
        self._emit(COMMAND, message)

    def success(self, message: str):
        self._emit(SUCCESS, message)

    def warning(self, message: str):
        self._emit(logging.WARNING, message)

    def error(self, message: str):
        self._emit(logging.ERROR, message)

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        """Log the start and wall time of one stage of a command (log only, never an artifact)."""
        self.debug(f"[{name}] started")
        started = time.perf_counter()
        try:
            yield
        finally:
            self.debug(f"[{name}] took {time.perf_counter() - started:.2f}s")

    def close(self):
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)
