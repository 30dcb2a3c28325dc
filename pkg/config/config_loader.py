"""
Load the YAML configuration, filling anything it leaves out from DEFAULTS.
"""

import copy
import logging
from pathlib import Path

import yaml

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent / 'config.yaml'

DEFAULTS = {
    'logging': {
        'level': 'INFO',
        'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    },
    'explorer': {
        'processes': 2,
        'cycles': 2,
        'state_budget': 2_000_000,
        'long_run': False,
        'witness': True,
        'show_progress': False,
        'stop_on_violation': False,
        'oracles': [
            'mutex', 'fifo', 'safety', 'inv', 'deadlock', 'queue',
            'window', 'automaton', 'progress', 'divergence', 'scenario',
        ],
    },
    'stress': {
        'processes': 8,
        'iterations': 10_000,
        'runners': 4,
        'seed': 42,
        'repeats': 20,
        'timeout_s': 60,
        'cs_pause_probability': 0.05,
    },
    'cas_report': {
        'processes': 3,
        'cycles': 2,
        'long_run': False,
    },
    'report': {
        'output_dir': 'results',
        'basename': 'exploration',
    },
}


def _merge(base, override):
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path=None) -> dict:
    """Load configuration from a YAML file merged over the defaults.

    A missing file is not an error when no path was given explicitly.
    """
    path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
    if not path.exists():
        if config_path:
            raise FileNotFoundError(f"configuration file not found: {path}")
        logger.debug("No configuration file, using defaults")
        return copy.deepcopy(DEFAULTS)
    with open(path, 'r') as f:
        loaded = yaml.safe_load(f) or {}
    if not isinstance(loaded, dict):
        raise ValueError(f"configuration root must be a mapping: {path}")
    return _merge(DEFAULTS, loaded)
