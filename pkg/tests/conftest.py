"""
Test configuration and fixtures for the granular digging toolkit.

Scenes here are deliberately tiny (a coarse grid, a few hundred particles and
fast end-effector speeds) so that rollouts and reverse passes run in seconds.
"""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest
import yaml

from src.config import ConfigManager
from src.models.domain import (
    GradientRegularization,
    MaterialParams,
    ObservationConfig,
    OptimizerConfig,
    SceneConfig,
    ShovelConfig,
    SimConfig,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = REPO_ROOT / 'config' / 'simulation.yaml'


@pytest.fixture
def temp_dir():
    """Create a temporary directory for run outputs"""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def material():
    return MaterialParams()


@pytest.fixture
def small_sim():
    """16^3 grid, ten substeps of 1 ms, no settling"""
    return SimConfig(
        dt=0.01,
        n_sub=10,
        grid_res=16,
        domain_min=(-0.25, -0.25, -0.1),
        settle_substeps=0,
        checkpoint_stride=2,
        v_l=0.5,
        v_w=5.0,
    )


@pytest.fixture
def fast_sim(small_sim):
    """The tiny grid with fast end-effector speeds and a short settle, for whole sysid and skill runs"""
    return SimConfig(**{**small_sim.model_dump(), 'v_l': 2.0, 'v_w': 20.0, 'settle_substeps': 5})


@pytest.fixture
def small_scene():
    """A 6 x 6 x 3 cm block of ~200 particles observed on an 8 x 8 grid"""
    return SceneConfig(
        block_extent=(0.06, 0.06, 0.03),
        fill_density=1.8e6,
        seed=0,
        observation=ObservationConfig(grid_res=8, extent=0.08),
        shovel=ShovelConfig(half_extents=(0.02, 0.004, 0.05), initial_tip=(0.0, 0.0, 0.02)),
    )


@pytest.fixture
def reg_none():
    return GradientRegularization(mode='none')


@pytest.fixture
def reg_clip():
    return GradientRegularization(mode='clip', clip_threshold=1e4)


@pytest.fixture
def optimizer_config():
    return OptimizerConfig(iterations=3)


@pytest.fixture
def config_manager():
    """Create a config manager for testing"""
    return ConfigManager()


@pytest.fixture
def small_config_file(temp_dir, small_sim, small_scene):
    """YAML config of the tiny scene, as the CLI reads it"""
    data = {
        'scene': small_scene.model_dump(mode='json'),
        'sim': small_sim.model_dump(mode='json'),
        'optimizer': {'iterations': 2},
    }
    path = temp_dir / 'small.yaml'
    path.write_text(yaml.safe_dump(data))
    return path
