"""
Runtime configuration and logging setup.

Configuration lives in freightledger_config.json; missing keys fall back to
DEFAULT_CONFIG. Logs go to a file and to stderr, never to stdout.
"""

import copy
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Union

CONFIG_FILE = "freightledger_config.json"
SEED_ENV = "FREIGHTLEDGER_SEED"

DEFAULT_CONFIG: Dict[str, Any] = {
    "log_file": "freightledger.log",
    "output_dir": "./outputs",
    "training": {
        "hidden_dim": 8,
        "epochs": 300,
        "learning_rate": 0.5,
        "init_scale": 0.1,
    },
    "source_weights": {},
    "relay": {"quorum_signers": None},
}

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
_STDERR_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Load configuration from ``path`` (default CONFIG_FILE) merged over the
    defaults. An unreadable file is reported and the defaults are used.
    """
    config_path = Path(path or CONFIG_FILE)
    if not config_path.exists():
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with config_path.open("r", encoding="utf-8") as file:
            loaded = json.load(file)
        if not isinstance(loaded, dict):
            raise ValueError("top level must be an object")
    except (OSError, ValueError) as exc:
        logging.getLogger(__name__).warning("Unable to read config file %s, using defaults: %s", config_path, exc)
        return copy.deepcopy(DEFAULT_CONFIG)
    return _merge(DEFAULT_CONFIG, loaded)


def save_config(config: Dict[str, Any], path: Union[str, Path] = CONFIG_FILE) -> None:
    with Path(path).open("w", encoding="utf-8") as file:
        json.dump(config, file, indent=2, sort_keys=True)


def setup_logger(log_file: Optional[str] = None, verbosity: int = 0) -> logging.Logger:
    """
    Configure the package logger.

    Parameters:
        log_file: File receiving INFO and above; None disables the file handler.
        verbosity: 0 → WARNING, 1 → INFO, 2+ → DEBUG on stderr.

    Returns:
        The ``freight_ledger`` logger.
    """
    logger = logging.getLogger("freight_ledger")
    logger.setLevel(logging.DEBUG)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)
    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(logging.INFO)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setLevel(_STDERR_LEVELS[min(max(verbosity, 0), len(_STDERR_LEVELS) - 1)])
    stream_handler.setFormatter(formatter)
    logger.addHandler(stream_handler)
    logger.propagate = False
    return logger


def resolve_seed(flag: Optional[int] = None, scenario_seed: Optional[int] = None) -> int:
    """--seed flag, else FREIGHTLEDGER_SEED, else the scenario's seed, else 0."""
    if flag is not None:
        return int(flag)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)  # type: ignore[arg-type]
        except ValueError:
            logging.getLogger(__name__).warning("Ignoring non-integer %s=%r", SEED_ENV, env)
    if scenario_seed is not None:
        return int(scenario_seed)
    return 0
