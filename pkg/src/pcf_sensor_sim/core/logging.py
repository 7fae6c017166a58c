"""Structured logging utilities for JSONL run logs."""

from __future__ import annotations

import json
import os
import uuid
from collections import Counter
from datetime import datetime
from pathlib import Path
from typing import Any

RUN_LOG_PREFIX = "run"


def new_run_id() -> str:
    """Short random identifier pairing a run's started and finished entries."""
    return uuid.uuid4().hex[:12]


def write_log_entry(
    entry: dict[str, Any],
    log_dir: str | Path,
    prefix: str = "log",
    timestamp: datetime | None = None,
) -> Path:
    """Append log entry to daily JSONL file.

    Args:
        entry: Dictionary to serialize and append.
        log_dir: Directory for log files.
        prefix: Filename prefix (default: "log").
        timestamp: Optional timestamp for filename (default: now).

    Returns:
        Path to the log file written.

    Example:
        >>> write_log_entry(
        ...     {"event": "finished", "status": "success"},
        ...     "/tmp/pcf-logs",
        ...     prefix="run"
        ... )
        PosixPath('/tmp/pcf-logs/run-2026-10-17.jsonl')
    """
    Path(log_dir).mkdir(parents=True, exist_ok=True)
    log_file = get_log_file_path(log_dir, prefix, timestamp)

    with open(log_file, "a") as f:
        f.write(json.dumps(entry) + "\n")
        f.flush()
        os.fsync(f.fileno())

    return log_file


def get_log_file_path(
    log_dir: str | Path,
    prefix: str = "log",
    date: datetime | None = None,
) -> Path:
    """Get the path to a log file without writing to it."""
    date_str = (date or datetime.now()).strftime("%Y-%m-%d")
    return Path(log_dir) / f"{prefix}-{date_str}.jsonl"


def read_log_entries(log_file: str | Path) -> tuple[list[dict[str, Any]], int]:
    """Read all entries from a JSONL log file.

    Blank lines are skipped; lines that do not parse are counted, not fatal.

    Returns:
        The parsed entries and the number of corrupt lines.

    Raises:
        FileNotFoundError: If log file doesn't exist.
    """
    entries = []
    corrupt = 0
    with open(log_file, encoding="utf-8", errors="replace") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError:
                corrupt += 1
    return entries, corrupt


def summarize_runs(log_dir: str | Path) -> dict[str, Any]:
    """Summarize started/finished run entries across all daily run logs.

    Runs are paired by ``run_id``. A started run with no finished entry is
    reported as unfinished, which usually means it crashed or is still going.
    """
    started: dict[str, dict[str, Any]] = {}
    finished: dict[str, dict[str, Any]] = {}
    corrupt_lines = 0

    for log_file in sorted(Path(log_dir).glob(f"{RUN_LOG_PREFIX}-*.jsonl")):
        entries, corrupt = read_log_entries(log_file)
        corrupt_lines += corrupt
        for entry in entries:
            run_id = entry.get("run_id") if isinstance(entry, dict) else None
            if not run_id:
                continue
            if entry.get("event") == "started":
                started[run_id] = entry
            elif entry.get("event") == "finished":
                finished[run_id] = entry

    finished_entries = list(finished.values())
    statuses = Counter(entry.get("status", "unknown") for entry in finished_entries)
    commands = Counter(entry.get("command", "unknown") for entry in finished_entries)
    unfinished = [started[key] for key in started.keys() - finished.keys()]
    failures = [entry for entry in finished_entries if entry.get("status") == "failed"]

    return {
        "finished": len(finished_entries),
        "succeeded": statuses["success"],
        "failed": statuses["failed"],
        "unfinished": len(unfinished),
        "by_command": dict(sorted(commands.items())),
        "elapsed_seconds": round(
            sum(entry.get("elapsed_seconds") or 0.0 for entry in finished_entries), 3
        ),
        "corrupt_log_lines": corrupt_lines,
        "unfinished_runs": [
            {
                "run_id": entry.get("run_id"),
                "command": entry.get("command"),
                "started_at": entry.get("timestamp"),
            }
            for entry in sorted(unfinished, key=lambda item: item.get("timestamp", ""))
        ],
        "recent_failures": [
            {
                "run_id": entry.get("run_id"),
                "command": entry.get("command"),
                "error": entry.get("error"),
                "finished_at": entry.get("timestamp"),
            }
            for entry in failures[-10:]
        ],
    }
