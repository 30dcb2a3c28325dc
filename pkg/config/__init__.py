"""Configuration loading."""

from .config_loader import DEFAULTS, load_config

__all__ = ['DEFAULTS', 'load_config']
