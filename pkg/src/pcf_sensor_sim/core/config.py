"""Centralized configuration with environment variable fallbacks."""

from __future__ import annotations

import configparser
import os
from collections.abc import Mapping
from pathlib import Path

from pcf_sensor_sim.exceptions import ConfigError

# Logging
LOG_DIR = os.environ.get("PCF_LOG_DIR", "~/.local/state/pcf-sim/logs")

# Outputs
OUTPUT_DIR = os.environ.get("PCF_OUTPUT_DIR", "./pcf-output")

# Parallel sweeps
WORKERS = os.environ.get("PCF_WORKERS", "1")

# Environment variable names for CLI override
ENV_LOG_DIR = "PCF_LOG_DIR"
ENV_OUTPUT_DIR = "PCF_OUTPUT_DIR"
ENV_WORKERS = "PCF_WORKERS"


def get_config_value(cli_value: str | None, env_name: str, default: str) -> str:
    """Get configuration value with priority: CLI > env var > default.

    Args:
        cli_value: Value from CLI argument (highest priority).
        env_name: Environment variable name.
        default: Default value if neither CLI nor env var set.

    Returns:
        Resolved configuration value.

    Example:
        >>> get_config_value(None, "PCF_WORKERS", "1")
        '1'
        >>> get_config_value("4", "PCF_WORKERS", "1")
        '4'
    """
    if cli_value is not None:
        return cli_value
    return os.environ.get(env_name, default)


def get_log_dir(cli_value: str | None = None) -> Path:
    """Get the run-log directory, expanding user if needed."""
    return Path(get_config_value(cli_value, ENV_LOG_DIR, LOG_DIR)).expanduser()


def get_output_dir(cli_value: str | None = None) -> Path:
    """Get the default directory for CSV, SVG and report outputs."""
    return Path(get_config_value(cli_value, ENV_OUTPUT_DIR, OUTPUT_DIR)).expanduser()


def get_workers(cli_value: int | None = None) -> int:
    """Get the sweep process-pool size.

    Raises:
        ConfigError: If the resolved value is not a positive integer.
    """
    raw = get_config_value(None if cli_value is None else str(cli_value), ENV_WORKERS, WORKERS)
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{ENV_WORKERS} must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ConfigError(f"{ENV_WORKERS} must be >= 1, got {workers}")
    return workers


def read_sections(
    text: str, schema: Mapping[str, Mapping[str, object]], source: str = "<config>"
) -> dict[str, dict[str, str]]:
    """Parse sectioned ``key = value`` text, rejecting anything not in ``schema``.

    Args:
        text: Config file contents.
        schema: Allowed sections mapped to their allowed keys.
        source: Name used in error messages.

    Returns:
        Raw string values per section; absent sections map to empty dicts.

    Raises:
        ConfigError: On syntax errors or unknown sections/keys.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from e
    values: dict[str, dict[str, str]] = {section: {} for section in schema}
    for section in parser.sections():
        if section not in schema:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in schema[section]:
                raise ConfigError(f"{source}: unknown key {section}.{key}")
            values[section][key] = value
    return values
