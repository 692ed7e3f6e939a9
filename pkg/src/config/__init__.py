"""
Configuration management for the granular digging toolkit.

This module handles loading, overriding and snapshotting the sectioned
scene/material/sim/optimizer configuration.
"""

from .config_manager import ConfigManager, load_config_from_file, load_config_from_dict

__all__ = ['ConfigManager', 'load_config_from_file', 'load_config_from_dict']
