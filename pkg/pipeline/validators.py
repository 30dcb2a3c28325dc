"""
Configuration validation.
"""

import logging
from typing import List, Tuple

from .explorer import DEFAULT_MAX_PROCESSES, MAX_CYCLES, MAX_PROCESSES
from .mutants import MUTANTS
from .oracles import ORACLE_NAMES

logger = logging.getLogger(__name__)


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


class ConfigValidator:
    """Validate pipeline configuration."""

    @staticmethod
    def validate(config: dict) -> Tuple[bool, List[str]]:
        """
        Validate configuration.

        Args:
            config: Configuration dictionary

        Returns:
            Tuple of (is_valid, list of error messages)
        """
        errors = []

        for section in ('logging', 'explorer', 'stress', 'cas_report', 'report'):
            if section not in config:
                errors.append(f"Missing required section: {section}")
        if errors:
            return False, errors

        level = config['logging'].get('level')
        if level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            errors.append(f"logging.level must be a logging level name, got {level!r}")

        errors.extend(ConfigValidator.validate_explorer(config['explorer']))
        errors.extend(ConfigValidator.validate_stress(config['stress']))

        cas = config['cas_report']
        errors.extend(ConfigValidator._bounds('cas_report', cas.get('processes'), cas.get('cycles'),
                                              long_run=bool(cas.get('long_run'))))

        if not config['report'].get('output_dir'):
            errors.append("report.output_dir must be set")
        if not config['report'].get('basename'):
            errors.append("report.basename must be set")

        mutant = config.get('mutant')
        if mutant is not None and mutant not in MUTANTS:
            errors.append(f"unknown mutant {mutant!r}; choose from {sorted(MUTANTS)}")

        return len(errors) == 0, errors

    @staticmethod
    def _bounds(section, processes, cycles, long_run=False):
        errors = []
        if not _is_int(processes) or processes < 1:
            errors.append(f"{section}.processes must be a positive integer, got {processes!r}")
        elif processes > MAX_PROCESSES:
            errors.append(f"{section}.processes must be at most {MAX_PROCESSES}, got {processes}")
        elif processes > DEFAULT_MAX_PROCESSES and not long_run:
            errors.append(f"{section}.processes = {processes} requires long_run")
        if not _is_int(cycles) or not 1 <= cycles <= MAX_CYCLES:
            errors.append(f"{section}.cycles must be between 1 and {MAX_CYCLES}, got {cycles!r}")
        return errors

    @staticmethod
    def validate_explorer(explorer: dict) -> List[str]:
        errors = ConfigValidator._bounds('explorer', explorer.get('processes'),
                                         explorer.get('cycles'), bool(explorer.get('long_run')))
        budget = explorer.get('state_budget')
        if not _is_int(budget) or budget < 1:
            errors.append(f"explorer.state_budget must be a positive integer, got {budget!r}")
        oracles = explorer.get('oracles')
        if not isinstance(oracles, (list, tuple)):
            errors.append("explorer.oracles must be a list")
        else:
            unknown = [name for name in oracles if name not in ORACLE_NAMES]
            if unknown:
                errors.append(f"unknown oracles {unknown}; choose from {list(ORACLE_NAMES)}")
        return errors

    @staticmethod
    def validate_stress(stress: dict) -> List[str]:
        errors = []
        for key in ('processes', 'iterations', 'runners', 'repeats'):
            value = stress.get(key)
            if not _is_int(value) or value < 1:
                errors.append(f"stress.{key} must be a positive integer, got {value!r}")
        if not _is_int(stress.get('seed')):
            errors.append(f"stress.seed must be an integer, got {stress.get('seed')!r}")
        timeout = stress.get('timeout_s')
        if not isinstance(timeout, (int, float)) or isinstance(timeout, bool) or timeout <= 0:
            errors.append(f"stress.timeout_s must be positive, got {timeout!r}")
        pause = stress.get('cs_pause_probability')
        if not isinstance(pause, (int, float)) or isinstance(pause, bool) or not 0 <= pause <= 1:
            errors.append(f"stress.cs_pause_probability must be in [0, 1], got {pause!r}")
        return errors
