"""Verification pipeline: model, oracles, explorer and run orchestration."""

from .validators import ConfigValidator
from .explorer import ExplorationConfig, ExplorationReport, explore
from .manager import ExplorationManager

__all__ = ['ConfigValidator', 'ExplorationConfig', 'ExplorationReport', 'ExplorationManager', 'explore']
