"""
Tests for the command-line entry point: exit codes, run directories and the
commands that do not need a long optimization.
"""

import json
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from src.main import EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO, EXIT_OK, content_hash, main
from src.models.domain import IterationRecord, RunRecord
from src.models.errors import SimulationDivergedError
from src.models.trajectory import ActionTrajectory
from src.scene import read_point_cloud, write_point_cloud, write_trajectory_csv
from src.scene.observation import cell_centers
from src.scene.particles import block_particle_count

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / 'config' / 'simulation.yaml'


@pytest.fixture
def workdir(temp_dir, monkeypatch):
    """Run the CLI from a scratch directory so logs/ and runs/ land there"""
    monkeypatch.chdir(temp_dir)
    return temp_dir


@pytest.fixture
def target_cloud(workdir):
    """A flat 7 cm surface with one dip at x = 0.0679 on the default observation grid"""
    points = np.zeros((1600, 3))
    points[:, :2] = cell_centers(40, 0.24, (0.0, 0.0))
    points[:, 2] = 0.07
    points[20 * 40 + 31] = (0.0679, 0.003, 0.03)
    path = workdir / 'target.csv'
    write_point_cloud(path, points)
    return path


@pytest.fixture
def trajectory_file(workdir):
    path = workdir / 'push.csv'
    write_trajectory_csv(path, ActionTrajectory(np.tile([0.002, 0.0, -0.001, 0.0, 0.0, 0.0], (2, 1))), 0.01)
    return path


def fake_record():
    record = RunRecord(kind='sysid', label='sysid-hmd-clip', parameter_names=['E', 'nu', 'rho', 'phi_f'])
    for i, val in enumerate([0.02, 0.01]):
        record.iterations.append(IterationRecord(
            iteration=i, solution=[100000.0 + i, 0.3, 1500.0, 20.0], train_loss=val, val_loss=val,
        ))
    return record


class TestUsageErrors:
    """Test that invalid invocations exit with the configuration code"""

    def test_missing_command(self, workdir):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 2

    def test_sim_needs_theta_or_trajectory(self, workdir, small_config_file):
        out = workdir / 'out'
        assert main(['sim', '--config', str(small_config_file), '--out', str(out)]) == EXIT_CONFIG
        assert not out.exists()

    def test_missing_config_file(self, workdir):
        out = workdir / 'out'
        assert main(['sim', '--config', 'missing.yaml', '--theta', '0', '0', '0', '0', '0', '--out', str(out)]) == EXIT_CONFIG
        assert not out.exists()

    def test_invalid_override(self, workdir, small_config_file, trajectory_file):
        argv = ['sim', '--config', str(small_config_file), '--trajectory', str(trajectory_file),
                '--set', 'sim.no_such_key=1']
        assert main(argv) == EXIT_CONFIG

    def test_invalid_thread_count(self, workdir, small_config_file, trajectory_file):
        argv = ['sim', '--config', str(small_config_file), '--trajectory', str(trajectory_file), '--threads', '0']
        assert main(argv) == EXIT_CONFIG

    def test_malformed_target(self, workdir):
        path = workdir / 'broken.csv'
        path.write_text('x,y,z\n0.1,0.2\n')
        out = workdir / 'out'
        assert main(['demo-prior', str(path), '--config', str(DEFAULT_CONFIG), '--out', str(out)]) == EXIT_CONFIG
        assert not out.exists()

    def test_theta_outside_range(self, workdir, small_config_file):
        argv = ['sim', '--config', str(small_config_file), '--theta', '2', '0', '0', '0', '0']
        assert main(argv) == EXIT_CONFIG


class TestDemoPriorCommand:
    """Test the demo-prior command"""

    def test_prints_parameters(self, workdir, target_cloud, capsys):
        assert main(['demo-prior', str(target_cloud), '--config', str(DEFAULT_CONFIG)]) == EXIT_OK
        output = capsys.readouterr().out
        assert 'theta_displace = 0.399167' in output
        assert 'theta_push_dist = -0.500000' in output
        assert not (workdir / 'runs').exists()

    def test_writes_csv_with_out(self, workdir, target_cloud):
        out = workdir / 'prior'
        assert main(['demo-prior', str(target_cloud), '--config', str(DEFAULT_CONFIG), '--out', str(out)]) == EXIT_OK
        values = np.loadtxt(out / 'demo_prior.csv', delimiter=',', skiprows=1)
        assert values[0] == pytest.approx(0.399167, abs=1e-6)
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['command'] == 'demo-prior'
        assert manifest['outputs'] == ['config.snapshot', 'demo_prior.csv']


class TestSimCommand:
    """Test forward rollouts from the command line"""

    def test_writes_outputs_and_manifest(self, workdir, small_config_file, trajectory_file):
        out = workdir / 'sim'
        argv = ['sim', '--config', str(small_config_file), '--trajectory', str(trajectory_file), '--out', str(out)]
        assert main(argv) == EXIT_OK

        assert read_point_cloud(out / 'observation.csv').shape == (64, 3)
        assert read_point_cloud(out / 'particles.ply').shape == (block_particle_count((0.06, 0.06, 0.03), 1.8e6), 3)
        manifest = json.loads((out / 'manifest.json').read_text())
        assert manifest['outputs'] == [
            'config.snapshot', 'heightmap.csv', 'heightmap.pgm', 'observation.csv', 'particles.ply',
            'trajectory.csv',
        ]
        assert manifest['argv'] == argv
        assert len(manifest['input_hash']) == 40

    def test_rerun_is_byte_identical(self, workdir, small_config_file, trajectory_file):
        outputs = []
        for name in ('first', 'second'):
            out = workdir / name
            argv = ['sim', '--config', str(small_config_file), '--trajectory', str(trajectory_file), '--out', str(out)]
            assert main(argv) == EXIT_OK
            outputs.append(out)
        for name in ('observation.csv', 'particles.ply', 'heightmap.csv', 'config.snapshot'):
            assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()
        first, second = (json.loads((out / 'manifest.json').read_text()) for out in outputs)
        assert first['input_hash'] == second['input_hash']

    def test_dump_steps(self, workdir, small_config_file, trajectory_file):
        out = workdir / 'sim'
        argv = ['sim', '--config', str(small_config_file), '--trajectory', str(trajectory_file), '--out', str(out),
                '--dump-steps']
        assert main(argv) == EXIT_OK
        manifest = json.loads((out / 'manifest.json').read_text())
        assert any(name.startswith('steps/') for name in manifest['outputs'])

    def test_content_hash(self):
        assert content_hash([b'']) == 'e69de29bb2d1d6434b8b29ae775ad8c2e48c5391'
        assert content_hash([b'a']) != content_hash([b'b'])


class TestSysidCommand:
    """Test sysid output handling with the optimization stubbed out"""

    @pytest.fixture
    def argv(self, workdir, small_config_file, target_cloud):
        return ['sysid', str(target_cloud), str(target_cloud), '--config', str(small_config_file),
                '--out', str(workdir / 'sysid')]

    def test_writes_run_record(self, workdir, argv, capsys):
        with patch('src.main.run_sysid', return_value=fake_record()) as run:
            assert main(argv + ['--reg', 'normalize', '--iterations', '4']) == EXIT_OK

        config = run.call_args.args[5]
        assert config.iterations == 4
        assert run.call_args.args[6].mode.value == 'normalize'
        out = workdir / 'sysid'
        assert (out / 'run_record.json').exists()
        assert (out / 'best_solution.csv').exists()
        assert 'best iteration 1: validation loss 0.01' in capsys.readouterr().out

    def test_divergence_exit_code(self, argv):
        with patch('src.main.run_sysid', side_effect=SimulationDivergedError("NaN in F", substep=4, step=0)):
            assert main(argv) == EXIT_DIVERGED

    def test_io_error_exit_code(self, argv):
        with patch('src.main.run_sysid', return_value=fake_record()), \
             patch('src.main.write_run_record', side_effect=OSError("disk full")):
            assert main(argv) == EXIT_IO

    def test_init_outside_ranges(self, argv):
        with patch('src.main.run_sysid') as run:
            assert main(argv + ['--init', 'config', '--set', 'material.E=1e7']) == EXIT_CONFIG
        run.assert_not_called()
