"""
Logging configuration for satsec.

Console output goes to stderr so stdout stays free for CSV and reports.
A log directory gets one file per run, named after the command, preset and
seed, so sweeps with different seeds never interleave in one file.
"""

import logging
import re
import sys
from pathlib import Path
from datetime import datetime
from typing import Optional

# Log files kept per directory
KEEP_LOGS = 5

HANDLER_PREFIX = "satsec."

_VERBOSITY_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def verbosity_level(verbosity: int = 0, debug: bool = False) -> int:
    """Map a -v count to a level: none is WARNING, -v INFO, -vv DEBUG."""
    if debug:
        return logging.DEBUG
    return _VERBOSITY_LEVELS[min(max(int(verbosity), 0), len(_VERBOSITY_LEVELS) - 1)]


def run_label(command: str, preset: Optional[str] = None, seed: Optional[int] = None) -> str:
    """File-safe run name such as "run_fig3_K_sweep_seed7"."""
    parts = [command]
    if preset:
        parts.append(preset)
    if seed is not None:
        parts.append(f"seed{seed}")
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", "_".join(parts))


def setup_logging(log_dir: Optional[Path] = None, verbosity: int = 0, debug: bool = False,
                  run_name: Optional[str] = None) -> logging.Logger:
    """
    Set up satsec logging.

    Args:
        log_dir: Base directory for per-run log files (optional)
        verbosity: Count of -v flags on the command line
        debug: Force debug level on the console
        run_name: Label embedded in the log file name

    Returns:
        The "satsec" root logger
    """
    logger = logging.getLogger("satsec")

    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    level = verbosity_level(verbosity, debug)

    formatter = logging.Formatter(
        fmt="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.set_name(HANDLER_PREFIX + "console")
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    handlers = [console_handler]
    logger.setLevel(level)

    log_file = None
    if log_dir:
        logs = Path(log_dir) / "logs"
        try:
            logs.mkdir(parents=True, exist_ok=True)
            stamp = datetime.now().strftime('%Y%m%d')
            log_file = logs / (f"satsec_{run_name}_{stamp}.log" if run_name else f"satsec_{stamp}.log")
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.set_name(HANDLER_PREFIX + "file")
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(formatter)
            handlers.append(file_handler)
            # The file records everything regardless of the console level
            logger.setLevel(logging.DEBUG)

            _cleanup_old_logs(logs, keep=KEEP_LOGS)
        except (IOError, PermissionError) as e:
            log_file = None
            logger.warning(f"Could not create log file: {e}")

    for handler in handlers:
        logger.addHandler(handler)
    _capture_warnings(handlers)

    if log_file is not None:
        logger.debug(f"Logging to {log_file}")
    return logger


def _capture_warnings(handlers: list) -> None:
    """Route warnings.warn through the satsec handlers."""
    logging.captureWarnings(True)
    py_warnings = logging.getLogger("py.warnings")
    for old in [h for h in py_warnings.handlers if (h.get_name() or "").startswith(HANDLER_PREFIX)]:
        py_warnings.removeHandler(old)
    for handler in handlers:
        py_warnings.addHandler(handler)
    py_warnings.propagate = False


def _cleanup_old_logs(log_dir: Path, keep: int = KEEP_LOGS):
    """Remove old log files, keeping the most recently written ones."""
    try:
        logs = sorted(log_dir.glob("satsec_*.log"), key=lambda p: (p.stat().st_mtime, p.name), reverse=True)
        for old_log in logs[keep:]:
            try:
                old_log.unlink()
            except (IOError, PermissionError):
                pass
    except (OSError, PermissionError):
        pass


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Logger named "satsec.<name>", or the root "satsec" logger."""
    if name:
        return logging.getLogger(f"satsec.{name}")
    return logging.getLogger("satsec")
