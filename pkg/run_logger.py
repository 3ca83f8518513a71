"""
Run Logger for Heat Enclosure
Session log for command runs plus console output, built on stdlib logging.

Each command run opens a session block in ``<config dir>/runs.log``. Lines carry
a wall-clock timestamp and the elapsed time since the session started, and only
the last MAX_SESSIONS blocks are kept.
"""

import logging
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import Optional

ROOT_LOGGER = "heat_enclosure"

# Maximum number of run sessions to keep in the log
MAX_SESSIONS = 10
SESSION_SEPARATOR = "=" * 60

_session_start: Optional[float] = None
_file_handler: Optional[logging.Handler] = None
_console_handler: Optional[logging.Handler] = None


class _ElapsedFormatter(logging.Formatter):
    """Formats records as ``[timestamp] [+Nms] LEVEL name: message``."""

    def format(self, record: logging.LogRecord) -> str:
        stamp = datetime.fromtimestamp(record.created).strftime("%Y-%m-%d %H:%M:%S.%f")[:-3]
        start = _session_start if _session_start is not None else record.created
        elapsed_ms = max(0.0, (record.created - start) * 1000)
        short = record.name[len(ROOT_LOGGER) + 1:] or record.name
        return f"[{stamp}] [+{elapsed_ms:.0f}ms] {record.levelname} {short}: {record.getMessage()}"


def get_logger(name: str) -> logging.Logger:
    """Module logger under the toolkit root, e.g. ``get_logger("bie_core")``."""
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


def default_log_path() -> Path:
    from config_manager import get_config_dir
    return get_config_dir() / "runs.log"


def _rotate_log(log_path: Path) -> None:
    """Keep only the last MAX_SESSIONS sessions in the log file."""
    if not log_path.exists():
        return

    try:
        content = log_path.read_text(encoding="utf-8")
        sessions = [s.strip() for s in content.split(SESSION_SEPARATOR) if s.strip()]
        # Leave room for the session about to start
        if len(sessions) >= MAX_SESSIONS:
            sessions = sessions[-(MAX_SESSIONS - 1):]
            body = f"\n{SESSION_SEPARATOR}\n".join(sessions)
            log_path.write_text(f"{SESSION_SEPARATOR}\n{body}\n", encoding="utf-8")
    except OSError:
        # Logging must never break a run
        pass


def start_session(command: str, level: str = "INFO", log_path: Optional[Path] = None,
                  console: bool = True) -> None:
    """
    Start a new run session.

    Args:
        command: name of the command being run, written in the session header
        level: console log level name
        log_path: session log file; defaults to ``runs.log`` in the config dir
        console: attach a stderr handler
    """
    global _session_start, _file_handler, _console_handler

    if _file_handler is not None or _console_handler is not None:
        end_session(status="superseded")
    _session_start = time.time()

    root = logging.getLogger(ROOT_LOGGER)
    root.setLevel(logging.DEBUG)
    root.propagate = False

    if console:
        _console_handler = logging.StreamHandler(sys.stderr)
        _console_handler.setLevel(getattr(logging, level.upper(), logging.INFO))
        _console_handler.setFormatter(_ElapsedFormatter())
        root.addHandler(_console_handler)

    try:
        path = Path(log_path) if log_path is not None else default_log_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        _rotate_log(path)
        with open(path, "a", encoding="utf-8") as f:
            f.write(f"\n{SESSION_SEPARATOR}\n")
        _file_handler = logging.FileHandler(path, encoding="utf-8")
        _file_handler.setLevel(logging.DEBUG)
        _file_handler.setFormatter(_ElapsedFormatter())
        root.addHandler(_file_handler)
    except OSError:
        _file_handler = None

    root.info("=== Run Begin (%s) ===", command)


def end_session(status: str = "ok") -> None:
    """Record the total run time and detach the session handlers."""
    global _file_handler, _console_handler, _session_start

    root = logging.getLogger(ROOT_LOGGER)
    if _session_start is not None:
        total_ms = (time.time() - _session_start) * 1000
        root.info("=== Run Complete: %.0fms (%s) ===", total_ms, status)

    for handler in (_file_handler, _console_handler):
        if handler is None:
            continue
        root.removeHandler(handler)
        try:
            handler.close()
        except OSError:
            pass
    _file_handler = None
    _console_handler = None
    _session_start = None
