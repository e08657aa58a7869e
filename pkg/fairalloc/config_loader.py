"""
config_loader.py: read the platform-appropriate fairalloc settings file.

load_config() returns the raw JSON object, or {} when the file is absent or
malformed; it never raises. load_settings() validates that object into a
Settings model; one invalid value discards the whole file with a warning.
Unknown keys are ignored.

Called by: cli.main() once per invocation. Command-line flags override
every value read here.
"""
import json
import logging
import os
import platform
from pathlib import Path

import psutil
from pydantic import BaseModel, Field, ValidationError

from fairalloc.exact import DEFAULT_LEAF_BUDGET
from fairalloc.ilp import DEFAULT_NODE_BUDGET


def _config_dir() -> Path:
    """Return the platform-appropriate fairalloc config directory.

    Windows : %APPDATA%/fairalloc/
    macOS   : ~/Library/Application Support/fairalloc/
    Linux   : $XDG_CONFIG_HOME/fairalloc/ (fallback: ~/.config/fairalloc/)
    """
    system = platform.system()
    if system == "Windows":
        base = Path(os.environ.get("APPDATA") or Path.home() / "AppData" / "Roaming")
    elif system == "Darwin":
        base = Path.home() / "Library" / "Application Support"
    else:
        base = Path(os.environ.get("XDG_CONFIG_HOME") or Path.home() / ".config")
    return base / "fairalloc"


def _config_path() -> Path:
    return _config_dir() / "config.json"


def _default_jobs() -> int:
    return psutil.cpu_count(logical=False) or 1


class Settings(BaseModel):
    """Defaults for the command-line tool."""

    leaf_budget: int = Field(DEFAULT_LEAF_BUDGET, ge=1, description="Exact-oracle leaf budget.")
    node_budget: int = Field(DEFAULT_NODE_BUDGET, ge=1, description="Integer-search node budget.")
    jobs: int = Field(default_factory=_default_jobs, ge=1, description="Experiment worker processes.")
    trials: int = Field(2000, ge=1, description="Experiment trials per cell.")
    seed: int = Field(0, ge=0, lt=2**64)
    log_level: str = Field("WARNING", pattern=r"^(DEBUG|INFO|WARNING|ERROR|CRITICAL)$")


def load_config() -> dict:
    """
    Read config.json from the config directory and return its contents as a dict.

    Returns {} if the file does not exist or does not hold a JSON object.
    Never raises; logs a warning on parse error.
    """
    path = _config_path()
    if not path.exists():
        logging.debug("No config file found at %s, using defaults.", path)
        return {}
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(cfg, dict):
            logging.warning("config.json does not contain a JSON object, ignoring.")
            return {}
        logging.debug("Loaded config from %s: %s", path, list(cfg.keys()))
        return cfg
    except Exception:
        logging.warning("Failed to load config from %s, using defaults.", path, exc_info=True)
        return {}


def load_settings() -> Settings:
    """Settings from config.json merged over the defaults; invalid content yields the defaults."""
    raw = load_config()
    try:
        return Settings(**raw)
    except ValidationError as exc:
        logging.warning("Ignoring invalid settings in %s: %s", _config_path(), exc.errors()[0]["msg"])
        return Settings()
