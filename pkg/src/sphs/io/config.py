"""Runtime settings and JSON run specifications"""

import json
import logging
import os
from dataclasses import dataclass, field

from sphs.core.errors import ConfigurationError, DataError

logger = logging.getLogger(__name__)

THREADS_ENV = "SPHS_THREADS"

# Accepted top-level keys of the run specification of each command
RUN_SPEC_KEYS = {
    "generate": {
        "system", "inertia", "mu", "n_traj", "duration", "dt", "seed", "out",
        "A", "B", "input", "x0_box",
    },
    "train": {
        "preset", "model", "train", "finetune", "data", "normalize", "noise_percent",
        "instances", "seed", "out", "verify_samples",
    },
    "predict": {
        "checkpoint", "initial_state", "initial_from", "times", "t_eval", "inputs",
        "integration", "interpolation", "truth", "out", "seed",
    },
    "eval": {"predictions", "truth", "dims", "spinning_body", "out", "seed"},
    "verify": {"checkpoint", "samples", "seed", "box_halfwidth", "probe", "out"},
    "decompose": {"checkpoint", "grid", "input", "out", "seed"},
    "pod": {
        "snapshots", "latent_dim", "equilibrium", "input_snapshots", "input_latent_dim",
        "out", "seed",
    },
}

# Keys holding file paths, resolved relative to the run specification's directory
PATH_KEYS = {
    "out", "checkpoint", "initial_from", "inputs", "truth", "predictions",
    "snapshots", "equilibrium", "input_snapshots",
}


def _threads_from_env():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be >= 1, got {threads}")
    return threads


class Config:
    """Process-wide runtime settings"""

    def __init__(self):
        self.threads = _threads_from_env()
        self.log_level = "INFO"  # Options: DEBUG, INFO, WARNING, ERROR

    def set_threads(self, threads):
        """Cap on concurrently trained model instances"""
        if not isinstance(threads, int) or threads < 1:
            raise ConfigurationError(f"Thread count must be a positive integer, got {threads!r}")
        self.threads = threads

    def set_log_level(self, level):
        """Set log level"""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR"]
        if level not in valid_levels:
            raise ConfigurationError(f"Invalid log level. Choose from: {valid_levels}")
        self.log_level = level

    def reload_environment(self):
        """Re-read settings taken from environment variables"""
        self.threads = _threads_from_env()


# Global configuration instance
config = Config()


@dataclass
class RunSpec:
    """
    Command-specific run configuration

    Args:
        command: Subcommand name
        values: Parsed JSON document with overrides applied
        base_dir: Directory relative paths are resolved against
    """

    command: str
    values: dict = field(default_factory=dict)
    base_dir: str = "."

    def get(self, key, default=None):
        value = self.values.get(key, default)
        if key in PATH_KEYS and isinstance(value, str):
            return self.path(value)
        if key in PATH_KEYS and isinstance(value, list):
            return [self.path(v) for v in value]
        return value

    def require(self, key):
        if key not in self.values:
            raise ConfigurationError(f"Run specification for '{self.command}' needs '{key}'")
        return self.get(key)

    def path(self, value):
        return value if os.path.isabs(value) else os.path.normpath(os.path.join(self.base_dir, value))

    @property
    def seed(self):
        return int(self.values.get("seed", 0))


def load_run_spec(command, path=None, overrides=None):
    """
    Read a run specification and apply command-line overrides

    Args:
        command: Subcommand name (selects the accepted keys)
        path: JSON file, or None for an empty specification
        overrides: Mapping of key to value; None values are ignored. The key
            "steps" overrides ``train.steps``.

    Returns:
        RunSpec

    Raises:
        ConfigurationError: Unknown command or keys
        DataError: Unreadable JSON
    """
    if command not in RUN_SPEC_KEYS:
        raise ConfigurationError(f"Unknown command: {command}")
    values = {}
    base_dir = os.getcwd()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                values = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"invalid JSON ({e.msg})", path=path, line=e.lineno) from None
        if not isinstance(values, dict):
            raise DataError("run specification must be a JSON object", path=path)
        base_dir = os.path.dirname(os.path.abspath(path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "steps":
            if command != "train":
                raise ConfigurationError(f"--steps does not apply to '{command}'")
            values.setdefault("train", {})["steps"] = value
        elif key == "out":
            values["out"] = os.path.abspath(value)
        else:
            values[key] = value
    unknown = set(values) - RUN_SPEC_KEYS[command]
    if unknown:
        raise ConfigurationError(f"Unknown keys for '{command}': {sorted(unknown)}")
    logger.debug("Run specification for %s: %s", command, values)
    return RunSpec(command, values, base_dir)
