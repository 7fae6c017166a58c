"""Core utilities shared across pcf-sensor-sim."""

from pcf_sensor_sim.core.config import (
    ENV_LOG_DIR,
    ENV_OUTPUT_DIR,
    ENV_WORKERS,
    LOG_DIR,
    OUTPUT_DIR,
    WORKERS,
    get_config_value,
    get_log_dir,
    get_output_dir,
    get_workers,
    read_sections,
)
from pcf_sensor_sim.core.locking import (
    LockAcquisitionError,
    acquire_lock,
    lock_path_for,
    write_locked,
)
from pcf_sensor_sim.core.logging import (
    RUN_LOG_PREFIX,
    get_log_file_path,
    new_run_id,
    read_log_entries,
    summarize_runs,
    write_log_entry,
)

__all__ = [
    # Locking
    "acquire_lock",
    "lock_path_for",
    "write_locked",
    "LockAcquisitionError",
    # Logging
    "RUN_LOG_PREFIX",
    "new_run_id",
    "write_log_entry",
    "get_log_file_path",
    "read_log_entries",
    "summarize_runs",
    # Config
    "get_config_value",
    "get_log_dir",
    "get_output_dir",
    "get_workers",
    "read_sections",
    "LOG_DIR",
    "OUTPUT_DIR",
    "WORKERS",
    "ENV_LOG_DIR",
    "ENV_OUTPUT_DIR",
    "ENV_WORKERS",
]
