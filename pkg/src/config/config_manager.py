"""
Configuration manager for loading and managing simulation configurations.
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ValidationError

from src.models.domain import (
    GradientRegularization,
    MaterialParams,
    OptimizerConfig,
    SceneConfig,
    SimConfig,
)
from src.models.errors import ConfigError

logger = logging.getLogger(__name__)

SECTIONS: dict[str, type[BaseModel]] = {
    'scene': SceneConfig,
    'material': MaterialParams,
    'sim': SimConfig,
    'optimizer': OptimizerConfig,
    'regularization': GradientRegularization,
}


class ConfigManager:
    """Manager for loading and validating the sectioned simulation configuration"""

    def __init__(self):
        self.raw: dict[str, dict[str, Any]] = {name: {} for name in SECTIONS}
        self.scene = SceneConfig()
        self.material = MaterialParams()
        self.sim = SimConfig()
        self.optimizer = OptimizerConfig()
        self.regularization = GradientRegularization()
        self.source_path: Path | None = None
        self.errors: list[str] = []

    def load_from_file(self, file_path: str | Path) -> bool:
        """Load configuration from a YAML or JSON file"""
        try:
            path = Path(file_path)
            if not path.exists():
                logger.error(f"Configuration file not found: {file_path}")
                return False

            with open(path, 'r') as f:
                if path.suffix.lower() in ['.yaml', '.yml']:
                    config_data = yaml.safe_load(f)
                elif path.suffix.lower() == '.json':
                    config_data = json.load(f)
                else:
                    logger.error(f"Unsupported configuration file format: {path.suffix}")
                    return False

            self.source_path = path
            return self.load_from_dict(config_data or {})

        except (OSError, yaml.YAMLError, json.JSONDecodeError) as e:
            logger.error(f"Error loading configuration from {file_path}: {e}")
            return False

    def load_from_dict(self, config_data: dict[str, Any]) -> bool:
        """Load configuration from a dictionary"""
        unknown = set(config_data) - set(SECTIONS)
        if unknown:
            logger.error(f"Unknown configuration sections: {sorted(unknown)}")
            return False

        raw = {name: dict(config_data.get(name) or {}) for name in SECTIONS}
        if not self._build(raw):
            return False
        self.raw = raw
        logger.info(f"Loaded configuration sections: {', '.join(n for n in SECTIONS if raw[n])}")
        return True

    def _build(self, raw: dict[str, dict[str, Any]]) -> bool:
        built = {}
        self.errors = []
        for name, model in SECTIONS.items():
            try:
                built[name] = model(**raw[name])
            except ValidationError as e:
                for err in e.errors():
                    location = '.'.join(str(part) for part in err['loc'])
                    self.errors.append(f"{name}.{location}: {err['msg']}")
        if self.errors:
            for message in self.errors:
                logger.error(f"Invalid configuration: {message}")
            return False
        for name, value in built.items():
            setattr(self, name, value)
        return True

    def apply_overrides(self, overrides: list[str]) -> bool:
        """Apply `section.key=value` overrides; values are parsed as YAML scalars"""
        raw = copy.deepcopy(self.raw)
        for item in overrides:
            key, sep, value = item.partition('=')
            parts = key.strip().split('.')
            if not sep or len(parts) < 2 or parts[0] not in SECTIONS:
                logger.error(f"Malformed override '{item}', expected section.key=value")
                self.errors = [f"malformed override: {item}"]
                return False
            target = raw[parts[0]]
            for part in parts[1:-1]:
                target = target.setdefault(part, {})
            target[parts[-1]] = yaml.safe_load(value)
            logger.info(f"Override {key} = {value}")
        if not self._build(raw):
            return False
        self.raw = raw
        return True

    def validate_configs(self) -> list[str]:
        """Cross-section checks that individual models cannot express"""
        errors = list(self.errors)
        sim, scene = self.sim, self.scene

        lower = sim.domain_min
        upper = tuple(lo + sim.domain_size for lo in lower)
        margin = 2 * sim.grid_dx
        hx, hy = scene.container_half_extent
        if -hx < lower[0] + margin or hx > upper[0] - margin:
            errors.append("Container x walls are within two cells of the grid boundary")
        if -hy < lower[1] + margin or hy > upper[1] - margin:
            errors.append("Container y walls are within two cells of the grid boundary")
        if scene.floor_height < lower[2] + margin:
            errors.append("Container floor is within two cells of the grid boundary")
        if scene.block_extent[2] + scene.floor_height > upper[2] - margin:
            errors.append("Particle block exceeds the grid height")
        bx, by, _ = scene.block_extent
        if bx / 2 > hx or by / 2 > hy:
            errors.append("Particle block is wider than the container")
        if self.optimizer.max_workers < 1:
            errors.append("optimizer.max_workers must be at least 1")
        return errors

    def snapshot(self) -> dict[str, Any]:
        """The effective configuration after defaults and overrides"""
        return {name: getattr(self, name).model_dump(mode='json') for name in SECTIONS}

    def dump_snapshot(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, 'w') as f:
            yaml.safe_dump(self.snapshot(), f, sort_keys=True)
        return path


def load_config_from_file(file_path: str | Path) -> ConfigManager:
    """Convenience function to load configuration from file"""
    manager = ConfigManager()
    if not manager.load_from_file(file_path):
        raise ConfigError(f"Failed to load configuration from {file_path}: {'; '.join(manager.errors)}")
    return manager


def load_config_from_dict(config_data: dict[str, Any]) -> ConfigManager:
    """Convenience function to load configuration from dictionary"""
    manager = ConfigManager()
    if not manager.load_from_dict(config_data):
        raise ConfigError(f"Failed to load configuration from dictionary: {'; '.join(manager.errors)}")
    return manager
