"""Tests for core.logging module."""

import json
from datetime import datetime
from pathlib import Path

import pytest

from pcf_sensor_sim.core.logging import (
    RUN_LOG_PREFIX,
    get_log_file_path,
    new_run_id,
    read_log_entries,
    summarize_runs,
    write_log_entry,
)


def _entry(event, run_id, command="sweep-proximity", **extra):
    return {"event": event, "run_id": run_id, "command": command, **extra}


class TestWriteLogEntry:
    """Test suite for write_log_entry function."""

    def test_creates_log_directory(self, tmp_path):
        """Should create log directory if it doesn't exist."""
        log_dir = tmp_path / "logs" / "deep"

        write_log_entry({"status": "test"}, log_dir)

        assert log_dir.exists()

    def test_appends_jsonl_entries(self, tmp_path):
        """Should append one JSON object per line."""
        log_dir = tmp_path / "logs"

        write_log_entry({"entry": 1}, log_dir, prefix=RUN_LOG_PREFIX)
        write_log_entry({"entry": 2}, log_dir, prefix=RUN_LOG_PREFIX)

        (log_file,) = log_dir.glob("*.jsonl")
        lines = log_file.read_text().strip().split("\n")
        assert [json.loads(line) for line in lines] == [{"entry": 1}, {"entry": 2}]

    def test_uses_date_in_filename(self, tmp_path):
        """Should name files <prefix>-YYYY-MM-DD.jsonl."""
        log_dir = tmp_path / "logs"

        result = write_log_entry(
            {"test": True}, log_dir, prefix="run", timestamp=datetime(2024, 1, 15, 10, 30)
        )

        assert result == log_dir / "run-2024-01-15.jsonl"
        assert isinstance(result, Path)


class TestGetLogFilePath:
    """Test suite for get_log_file_path function."""

    def test_returns_correct_path(self, tmp_path):
        """Should return correct path with date and prefix."""
        result = get_log_file_path(tmp_path, prefix="run", date=datetime(2024, 6, 15))

        assert result == tmp_path / "run-2024-06-15.jsonl"

    def test_matches_written_file(self, tmp_path):
        """write_log_entry should write to the path get_log_file_path names."""
        stamp = datetime(2026, 3, 4, 5, 6)

        written = write_log_entry({"a": 1}, tmp_path, prefix="run", timestamp=stamp)

        assert written == get_log_file_path(tmp_path, prefix="run", date=stamp)


class TestReadLogEntries:
    """Test suite for read_log_entries function."""

    def test_skips_empty_lines(self, tmp_path):
        """Should read every entry and skip blank lines."""
        log_file = tmp_path / "run.jsonl"
        log_file.write_text('{"a": 1}\n\n{"b": 2}\n')

        assert read_log_entries(log_file) == ([{"a": 1}, {"b": 2}], 0)

    def test_counts_corrupt_lines(self, tmp_path):
        """Unparsable lines should be counted and skipped."""
        log_file = tmp_path / "run.jsonl"
        log_file.write_text('{"a": 1}\n{"b": \nnot json\n{"c": 3}\n')

        entries, corrupt = read_log_entries(log_file)

        assert entries == [{"a": 1}, {"c": 3}]
        assert corrupt == 2

    def test_missing_file(self, tmp_path):
        """A missing log file should raise FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            read_log_entries(tmp_path / "absent.jsonl")


class TestNewRunId:
    """Test suite for new_run_id."""

    def test_ids_are_short_and_unique(self):
        """Run ids should be 12 hex characters and not repeat."""
        ids = {new_run_id() for _ in range(50)}

        assert len(ids) == 50
        assert all(len(run_id) == 12 for run_id in ids)


class TestSummarizeRuns:
    """Test suite for summarize_runs."""

    def test_pairs_started_and_finished(self, tmp_path):
        """Finished runs should be counted by status and command."""
        for entry in (
            _entry("started", "a"),
            _entry("finished", "a", status="success", elapsed_seconds=1.5),
            _entry("started", "b", command="pipeline"),
            _entry("finished", "b", command="pipeline", status="failed", error="boom"),
        ):
            write_log_entry(entry, tmp_path, prefix=RUN_LOG_PREFIX)

        summary = summarize_runs(tmp_path)

        assert summary["finished"] == 2
        assert summary["succeeded"] == 1
        assert summary["failed"] == 1
        assert summary["unfinished"] == 0
        assert summary["by_command"] == {"pipeline": 1, "sweep-proximity": 1}
        assert summary["elapsed_seconds"] == 1.5
        assert summary["recent_failures"][0]["error"] == "boom"

    def test_reports_unfinished_runs(self, tmp_path):
        """A started run without a finished entry should be unfinished."""
        write_log_entry(
            _entry("started", "c", timestamp="2026-01-01T00:00:00"),
            tmp_path,
            prefix=RUN_LOG_PREFIX,
        )

        summary = summarize_runs(tmp_path)

        assert summary["unfinished"] == 1
        assert summary["unfinished_runs"][0]["run_id"] == "c"

    def test_counts_corrupt_lines(self, tmp_path):
        """Unparsable lines should be counted, not fatal."""
        (tmp_path / "run-2026-01-01.jsonl").write_text('{"event": "started"\nnot json\n')

        summary = summarize_runs(tmp_path)

        assert summary["corrupt_log_lines"] == 2
        assert summary["finished"] == 0

    def test_ignores_other_prefixes(self, tmp_path):
        """Only run-*.jsonl files should be summarized."""
        write_log_entry(_entry("finished", "x", status="success"), tmp_path, prefix="other")

        assert summarize_runs(tmp_path)["finished"] == 0

    def test_empty_directory(self, tmp_path):
        """A missing or empty log directory should summarize to zeros."""
        summary = summarize_runs(tmp_path / "nothing-here")

        assert summary["finished"] == 0
        assert summary["unfinished_runs"] == []
