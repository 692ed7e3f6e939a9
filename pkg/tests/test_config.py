"""
Tests for configuration loading, overrides, validation and snapshots.
"""

import json

import pytest
import yaml

from src.config import ConfigManager, load_config_from_dict, load_config_from_file
from src.models.domain import CheckpointMode, LossKind, MaterialParams, RegMode, RunRecord, SkillParams
from src.models.errors import ConfigError

from .conftest import DEFAULT_CONFIG


class TestConfigManager:
    """Test the ConfigManager class"""

    def test_defaults_without_file(self, config_manager):
        """Test that every section falls back to model defaults"""
        assert config_manager.material.E == 100000.0
        assert config_manager.sim.n_sub == 20
        assert config_manager.optimizer.ls_multipliers == (0.1, 0.5, 1.0, 1.5, 2.0)
        assert config_manager.regularization.mode is RegMode.CLIP

    def test_load_shipped_config(self, config_manager):
        """Test loading the configuration file shipped with the repository"""
        assert config_manager.load_from_file(DEFAULT_CONFIG)
        assert config_manager.scene.observation.grid_res == 40
        assert config_manager.sim.checkpoint_mode is CheckpointMode.STEP
        assert config_manager.optimizer.loss_kind is LossKind.HMD
        assert config_manager.validate_configs() == []

    def test_load_json(self, config_manager, temp_dir):
        """Test loading a JSON configuration"""
        path = temp_dir / 'config.json'
        path.write_text(json.dumps({'material': {'E': 150000.0}}))

        assert config_manager.load_from_file(path)
        assert config_manager.material.E == 150000.0

    def test_missing_file(self, config_manager, temp_dir):
        """Test that a missing file is reported, not raised"""
        assert not config_manager.load_from_file(temp_dir / 'missing.yaml')

    def test_unsupported_format(self, config_manager, temp_dir):
        path = temp_dir / 'config.toml'
        path.write_text('[material]\n')
        assert not config_manager.load_from_file(path)

    def test_unknown_section(self, config_manager):
        """Test that unknown top-level sections are rejected"""
        assert not config_manager.load_from_dict({'sources': {}})

    def test_unknown_key(self, config_manager):
        """Test that unknown keys inside a section are rejected"""
        assert not config_manager.load_from_dict({'sim': {'substeps': 4}})
        assert any('sim.substeps' in message for message in config_manager.errors)

    def test_invalid_poisson_ratio(self, config_manager):
        assert not config_manager.load_from_dict({'material': {'nu': 0.5}})
        assert any('material.nu' in message for message in config_manager.errors)

    def test_failed_load_keeps_previous_values(self, config_manager):
        assert config_manager.load_from_dict({'material': {'E': 120000.0}})
        assert not config_manager.load_from_dict({'material': {'E': -1.0}})
        assert config_manager.material.E == 120000.0

    def test_overrides(self, config_manager):
        """Test dotted section.key=value overrides, including nested keys"""
        assert config_manager.apply_overrides([
            'sim.n_sub=10', 'scene.observation.grid_res=20', 'regularization.mode=normalize',
        ])
        assert config_manager.sim.n_sub == 10
        assert config_manager.scene.observation.grid_res == 20
        assert config_manager.regularization.mode is RegMode.NORMALIZE

    def test_malformed_override(self, config_manager):
        assert not config_manager.apply_overrides(['n_sub=10'])
        assert not config_manager.apply_overrides(['sim.n_sub'])

    def test_invalid_override_value(self, config_manager):
        assert not config_manager.apply_overrides(['sim.n_sub=0'])
        assert config_manager.sim.n_sub == 20

    def test_multipliers_are_sorted(self, config_manager):
        assert config_manager.load_from_dict({'optimizer': {'ls_multipliers': [2.0, 0.1, 1.0]}})
        assert config_manager.optimizer.ls_multipliers == (0.1, 1.0, 2.0)

    def test_validate_block_wider_than_container(self, config_manager):
        """Test the cross-section check between scene and container"""
        assert config_manager.load_from_dict({'scene': {'block_extent': [0.4, 0.2, 0.05]}})
        errors = config_manager.validate_configs()
        assert any('wider than the container' in message for message in errors)

    def test_validate_walls_near_grid_boundary(self, config_manager):
        assert config_manager.load_from_dict({'scene': {'container_half_extent': [0.24, 0.14]}})
        assert any('x walls' in message for message in config_manager.validate_configs())

    def test_snapshot_round_trip(self, config_manager, temp_dir):
        """Test that a dumped snapshot loads back to the same effective config"""
        config_manager.apply_overrides(['sim.n_sub=8', 'material.phi_f=30'])
        path = config_manager.dump_snapshot(temp_dir / 'config.snapshot')

        reloaded = ConfigManager()
        assert reloaded.load_from_dict(yaml.safe_load(path.read_text()))
        assert reloaded.snapshot() == config_manager.snapshot()


class TestConvenienceLoaders:
    """Test the raising module-level helpers"""

    def test_load_from_file(self):
        manager = load_config_from_file(DEFAULT_CONFIG)
        assert manager.source_path == DEFAULT_CONFIG

    def test_load_from_file_failure(self, temp_dir):
        with pytest.raises(ConfigError):
            load_config_from_file(temp_dir / 'missing.yaml')

    def test_load_from_dict_failure(self):
        with pytest.raises(ConfigError, match='material.rho'):
            load_config_from_dict({'material': {'rho': 0}})


class TestDomainModels:
    """Test parameter models and their bounds"""

    def test_lame_constants(self):
        params = MaterialParams(E=100000.0, nu=0.25)
        assert params.mu == pytest.approx(40000.0)
        assert params.lam == pytest.approx(40000.0)

    def test_midpoint_and_bounds(self):
        params = MaterialParams.midpoint()
        assert params.as_array().tolist() == [125000.0, 0.25, 1700.0, 25.0]
        assert params.within_bounds()
        assert not MaterialParams(E=250000.0).within_bounds()

    def test_from_array_clamps(self):
        params = MaterialParams.from_array([300000.0, 0.05, 1700.0, 45.0], clamp=True)
        assert params.as_array().tolist() == [200000.0, 0.1, 1700.0, 40.0]

    def test_skill_range(self):
        with pytest.raises(ValueError):
            SkillParams(theta_rotate=1.5)
        with pytest.raises(ValueError):
            SkillParams.from_array([0.0, 0.0, 0.0])

    def test_random_init_is_seeded(self):
        import numpy as np

        first = MaterialParams.random(np.random.default_rng(7))
        second = MaterialParams.random(np.random.default_rng(7))
        assert first == second
        assert first.within_bounds()

    def test_run_record_best_prefers_earliest_tie(self):
        record = RunRecord(kind='skill', label='t', parameter_names=['a'], iterations=[
            {'iteration': 0, 'solution': [0.0], 'train_loss': 1.0, 'val_loss': 2.0},
            {'iteration': 1, 'solution': [1.0], 'train_loss': 1.0, 'val_loss': 1.0},
            {'iteration': 2, 'solution': [2.0], 'train_loss': 1.0, 'val_loss': 1.0},
            {'iteration': 3, 'solution': [3.0], 'train_loss': 1.0, 'val_loss': float('nan')},
        ])
        assert record.best.iteration == 1
        assert record.best_so_far() == [2.0, 1.0, 1.0, 1.0]
