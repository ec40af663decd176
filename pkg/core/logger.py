"""
JSON File Logger
Logs to JSON files, split per component, 1 file per day, keeps Config.LOG_DAYS days
"""

import json
import threading
from datetime import datetime, timedelta
from pathlib import Path

import pytz

from core.config import Config

LOGS_DIR = Path(Config.LOG_DIR)
MAX_DAYS = Config.LOG_DAYS

_write_lock = threading.Lock()


def _now() -> datetime:
    return datetime.now(pytz.timezone(Config.LOG_TIMEZONE))


def get_log_file(component: str) -> Path:
    """Get the log file path for a component (creates directory if needed)"""
    LOGS_DIR.mkdir(parents=True, exist_ok=True)
    today = _now().strftime("%Y-%m-%d")
    return LOGS_DIR / f"{component}_{today}.json"


def _jsonable(value):
    # numpy scalars and arrays show up in result payloads
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)


def log(component: str, event: str, data: dict = None):
    """
    Log an event to JSON file

    Args:
        component: Name of the component (e.g., "depth", "sim", "cli")
        event: Event type (e.g., "study_started", "jitter_escalated")
        data: Additional data to log
    """
    if not Config.LOG_ENABLED:
        return

    entry = {
        "timestamp": _now().isoformat(),
        "event": event,
        "data": data or {},
    }

    with _write_lock:
        log_file = get_log_file(component)

        # Read existing logs or start fresh
        logs = []
        if log_file.exists():
            try:
                with open(log_file, "r", encoding="utf-8") as f:
                    logs = json.load(f)
            except (json.JSONDecodeError, IOError):
                logs = []

        logs.append(entry)

        with open(log_file, "w", encoding="utf-8") as f:
            json.dump(logs, f, ensure_ascii=False, indent=2, default=_jsonable)


def cleanup_old_logs():
    """Remove log files older than MAX_DAYS"""
    if not LOGS_DIR.exists():
        return

    cutoff = _now().replace(tzinfo=None) - timedelta(days=MAX_DAYS)

    for log_file in LOGS_DIR.glob("*.json"):
        try:
            # Extract date from filename (component_YYYY-MM-DD.json)
            date_str = log_file.stem.split("_")[-1]
            file_date = datetime.strptime(date_str, "%Y-%m-%d")

            if file_date < cutoff:
                log_file.unlink()
        except (ValueError, IndexError):
            # Skip files with unexpected naming
            pass
