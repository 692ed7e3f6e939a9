"""
Command-line entry point for the granular digging toolkit.

Subcommands: sim, sysid, skill-opt, traj-opt, landscape, demo-prior.
Every command that writes results creates one run directory holding the
effective configuration (``config.snapshot``), its outputs and a
``manifest.json`` listing them.
"""

import argparse
import hashlib
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from src.config import ConfigManager
from src.loss import hole_statistics, rasterize_observation, write_height_map_csv, write_height_map_pgm
from src.models.domain import (
    PHYSICS_PARAM_NAMES,
    SKILL_PARAM_NAMES,
    LossKind,
    RegMode,
    Rounding,
    RunManifest,
    SkillParams,
)
from src.models.errors import ConfigError, ContractViolation, SimulationDivergedError
from src.models.trajectory import ActionTrajectory
from src.mpm import prepare_scene
from src.optimize import (
    RunArtifacts,
    landscape_objective,
    landscape_scan,
    parse_axis,
    resolve_physics_init,
    resolve_skill_init,
    run_skill_opt,
    run_sysid,
    run_traj_opt,
    write_landscape_csv,
    write_run_record,
)
from src.optimize.landscape import default_steps
from src.scene import read_point_cloud, read_trajectory_csv, write_point_cloud, write_trajectory_csv
from src.scene.io import write_point_cloud_csv
from src.scene.observation import SurfaceObservation, observe
from src.skill import demo_prior, skill_to_actions

# GLOBAL SETTINGS
CONFIG_FILE = os.getenv("GRANULAR_DIG_CONFIG", "config/simulation.yaml")
LOG_FILE = "logs/granular_dig.log"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

logger = logging.getLogger(__name__)


def setup_logging(verbose: bool = False) -> None:
    # Ensure logs directory exists
    os.makedirs('logs', exist_ok=True)

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(LOG_FILE)
        ],
        force=True,
    )


def configure_determinism(threads: int) -> None:
    torch.set_num_threads(threads)
    torch.use_deterministic_algorithms(True)


def content_hash(parts: list[bytes]) -> str:
    """SHA-1 over git-style blobs of every input"""
    digest = hashlib.sha1()
    for part in parts:
        digest.update(f"blob {len(part)}\0".encode())
        digest.update(part)
    return digest.hexdigest()


class RunDirectory:
    """Output directory of one command; created only once the inputs are valid"""

    def __init__(self, path: str | Path, command: str, config: ConfigManager, seed: int, argv: list[str]):
        self.path = Path(path)
        self.command = command
        self.config = config
        self.seed = seed
        self.argv = argv
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self.started_at = datetime.now(timezone.utc)
        self.opened = False

    def add_input(self, path: str | Path) -> Path:
        path = Path(path)
        self.inputs.append(path)
        return path

    def open(self) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        self.outputs.append(self.config.dump_snapshot(self.path / 'config.snapshot'))
        self.opened = True
        logger.info(f"Writing {self.command} results to {self.path}")

    def file(self, name: str) -> Path:
        path = self.path / name
        self.outputs.append(path)
        return path

    def record(self, paths: list[Path]) -> None:
        self.outputs.extend(paths)

    def input_hash(self) -> str:
        parts = [self.command.encode(), repr(sorted(self.config.snapshot().items())).encode()]
        parts += [path.read_bytes() for path in self.inputs]
        return content_hash(parts)

    def finish(self) -> Path:
        manifest = RunManifest(
            command=self.command,
            config_path=str(self.config.source_path) if self.config.source_path else None,
            seed=self.seed,
            input_hash=self.input_hash(),
            out_dir=str(self.path),
            started_at=self.started_at,
            finished_at=datetime.now(timezone.utc),
            outputs=sorted(str(p.relative_to(self.path)) for p in self.outputs),
            argv=self.argv,
        )
        path = self.path / 'manifest.json'
        path.write_text(manifest.model_dump_json(indent=2))
        return path


def load_configuration(args: argparse.Namespace) -> ConfigManager:
    """Config file, then --set overrides, then the dedicated flags"""
    config = ConfigManager()
    config_path = args.config or (CONFIG_FILE if Path(CONFIG_FILE).exists() else None)
    if config_path is not None and not config.load_from_file(config_path):
        raise ConfigError(f"Failed to load configuration from {config_path}: {'; '.join(config.errors)}")

    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"scene.seed={args.seed}")
    for flag, key in (('loss', 'optimizer.loss_kind'), ('reg', 'regularization.mode'),
                      ('iterations', 'optimizer.iterations')):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    line_search = getattr(args, 'line_search', None)
    if line_search is not None:
        overrides.append(f"optimizer.use_line_search={'true' if line_search == 'on' else 'false'}")
    if overrides and not config.apply_overrides(overrides):
        raise ConfigError(f"Invalid overrides: {'; '.join(config.errors)}")

    errors = config.validate_configs()
    if errors:
        raise ConfigError("; ".join(errors))
    return config


def load_target(path: str | Path, config: ConfigManager) -> SurfaceObservation:
    """Resample a target cloud onto the observation grid"""
    points = read_point_cloud(path)
    expected = config.scene.observation.grid_res ** 2
    if len(points) != expected:
        logger.info(f"Target {path} has {len(points)} points, resampling onto {expected} cells")
    return observe(points, config.scene.observation, config.scene.floor_height)


def parse_theta(values: list[float]) -> SkillParams:
    try:
        return SkillParams.from_array(values)
    except ValueError as e:
        raise ConfigError(f"Invalid skill parameters {values}: {e}")


def cmd_sim(args: argparse.Namespace, config: ConfigManager, run: RunDirectory) -> None:
    if (args.theta is None) == (args.trajectory is None):
        raise ConfigError("sim needs exactly one of --theta or --trajectory")
    sim = config.sim
    if args.trajectory is not None:
        trajectory = read_trajectory_csv(run.add_input(args.trajectory))
    else:
        trajectory, plan = skill_to_actions(parse_theta(args.theta), sim, Rounding(args.rounding))
        logger.info(f"Skill phases {plan.T1}/{plan.T2}/{plan.T3}/{plan.T4}, {plan.total} steps")

    simulator, initial = prepare_scene(config.scene, sim, config.material)
    run.open()
    dump_dir = run.path / 'steps' if args.dump_steps else None
    result = simulator.rollout(initial, trajectory, config.material, dump_dir=dump_dir)
    if dump_dir is not None:
        run.record(sorted(dump_dir.glob('step_*.csv')))

    write_point_cloud_csv(run.file('observation.csv'), result.observation.points)
    write_point_cloud(run.file('particles.ply'), result.state.x.numpy())
    height_map = rasterize_observation(result.observation, config.scene.splat_radius)
    write_height_map_csv(run.file('heightmap.csv'), height_map)
    write_height_map_pgm(run.file('heightmap.pgm'), height_map)
    write_trajectory_csv(run.file('trajectory.csv'), trajectory, sim.dt)

    reference = float(observe(initial.x, config.scene.observation, config.scene.floor_height).points[:, 2].mean())
    hole = hole_statistics(height_map, reference)
    logger.info(f"Hole center ({hole.center[0]:.4f}, {hole.center[1]:.4f}) m, depth {hole.depth:.4f} m")


def _write_record(record, artifacts: RunArtifacts, run: RunDirectory) -> None:
    run.record(write_run_record(record, run.path, artifacts.observations))
    if artifacts.trace is not None:
        artifacts.trace.to_csv(run.file('gradient_trace.csv'))
    best = record.best
    if best is not None:
        formatted = ", ".join(f"{name}={value:.6g}" for name, value in zip(record.parameter_names, best.solution))
        print(f"best iteration {best.iteration}: validation loss {best.val_loss:.6g} ({formatted})")


def cmd_sysid(args: argparse.Namespace, config: ConfigManager, run: RunDirectory) -> None:
    target_opt = load_target(run.add_input(args.target_opt), config)
    target_val = load_target(run.add_input(args.target_val), config)
    init = resolve_physics_init(args.init, config.material, config.scene.seed)

    run.open()
    artifacts = RunArtifacts(keep_observations=args.save_observations)
    record = run_sysid(
        target_opt, target_val, init, config.scene, config.sim, config.optimizer, config.regularization,
        seed=config.scene.seed, label=f"sysid-{config.optimizer.loss_kind.value}-{config.regularization.mode.value}",
        artifacts=artifacts,
    )
    _write_record(record, artifacts, run)


def cmd_skill_opt(args: argparse.Namespace, config: ConfigManager, run: RunDirectory) -> None:
    target = load_target(run.add_input(args.target), config)
    rounding = Rounding(args.rounding)
    init = parse_theta(args.theta) if args.theta is not None else resolve_skill_init(args.init, target, config.scene.seed)

    run.open()
    artifacts = RunArtifacts(keep_observations=args.save_observations)
    record = run_skill_opt(
        target, init, config.material, config.scene, config.sim, config.optimizer, config.regularization,
        rounding=rounding, seed=config.scene.seed, label=f"skill-{rounding.value}", artifacts=artifacts,
    )
    _write_record(record, artifacts, run)


def cmd_traj_opt(args: argparse.Namespace, config: ConfigManager, run: RunDirectory) -> None:
    target = load_target(run.add_input(args.target), config)
    if args.trajectory is not None:
        init = read_trajectory_csv(run.add_input(args.trajectory))
    else:
        theta = parse_theta(args.theta) if args.theta is not None else demo_prior(target)
        init, _ = skill_to_actions(theta, config.sim, Rounding.ROUNDED)
    if len(init) == 0:
        raise ConfigError("trajectory optimization needs a non-empty initial trajectory")

    run.open()
    artifacts = RunArtifacts(keep_observations=args.save_observations)
    record = run_traj_opt(
        target, init, config.material, config.scene, config.sim, config.optimizer, config.regularization,
        seed=config.scene.seed, artifacts=artifacts,
    )
    _write_record(record, artifacts, run)
    best = record.best
    if best is not None:
        write_trajectory_csv(run.file('best_trajectory.csv'), ActionTrajectory(np.reshape(best.solution, (-1, 6))), config.sim.dt)


def cmd_landscape(args: argparse.Namespace, config: ConfigManager, run: RunDirectory) -> None:
    target = load_target(run.add_input(args.target), config)
    names = [text.split(':')[0] for text in args.axis]
    skill = all(name in SKILL_PARAM_NAMES for name in names)
    if not (skill or all(name in PHYSICS_PARAM_NAMES for name in names)):
        raise ConfigError(f"scan axes {names} must all be physics or all be skill parameters")
    axes = [parse_axis(text, default_steps(names, skill)) for text in args.axis]
    if not 1 <= len(axes) <= 2:
        raise ConfigError("landscape takes one or two --axis options")
    if any(axis.steps < 3 for axis in axes):
        raise ConfigError("every scan axis needs at least 3 steps")

    theta = parse_theta(args.theta) if args.theta is not None else None
    objective = landscape_objective(
        names, target, config.scene, config.sim, config.material, theta,
        loss_kind=config.optimizer.loss_kind, rounding=Rounding(args.rounding),
    )
    run.open()
    grid = landscape_scan(axes, objective, centralize_loss=args.centralize, normalize_gradient=args.normalize)
    write_landscape_csv(run.file('landscape.csv'), grid)


def cmd_demo_prior(args: argparse.Namespace, config: ConfigManager, run: RunDirectory) -> None:
    target = load_target(run.add_input(args.target), config)
    theta = demo_prior(target)
    for name, value in zip(SKILL_PARAM_NAMES, theta.as_array()):
        print(f"{name} = {value:.6f}")
    if args.out is not None:
        run.open()
        np.savetxt(run.file('demo_prior.csv'), theta.as_array()[None, :], fmt='%.12g', delimiter=',',
                   header=','.join(SKILL_PARAM_NAMES), comments='')


COMMANDS: dict[str, Callable[[argparse.Namespace, ConfigManager, RunDirectory], None]] = {
    'sim': cmd_sim,
    'sysid': cmd_sysid,
    'skill-opt': cmd_skill_opt,
    'traj-opt': cmd_traj_opt,
    'landscape': cmd_landscape,
    'demo-prior': cmd_demo_prior,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help=f"YAML or JSON configuration (default {CONFIG_FILE})")
    common.add_argument('--seed', type=int, help="Seed for the particle fill and random initialisation")
    common.add_argument('--out', help="Run directory (default runs/<command>)")
    common.add_argument('--threads', type=int, default=1, help="Torch intra-op threads")
    common.add_argument('--set', action='append', metavar='SECTION.KEY=VALUE', help="Override a config value")
    common.add_argument('--verbose', action='store_true', help="Debug logging")

    optimizing = argparse.ArgumentParser(add_help=False)
    optimizing.add_argument('--loss', choices=[k.value for k in LossKind], help="Training loss")
    optimizing.add_argument('--reg', choices=[m.value for m in RegMode], help="Adjoint regularization")
    optimizing.add_argument('--line-search', choices=['on', 'off'], dest='line_search')
    optimizing.add_argument('--iterations', type=int)
    optimizing.add_argument('--save-observations', action='store_true', help="Write observations/iter_NN.csv")

    theta = argparse.ArgumentParser(add_help=False)
    theta.add_argument('--theta', type=float, nargs=5, metavar='T', help="Skill parameters in [-1, 1]")
    theta.add_argument('--rounding', choices=[r.value for r in Rounding], default=Rounding.ROUNDED.value)

    parser = argparse.ArgumentParser(prog='granular-dig', description="Differentiable granular digging simulation")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('sim', parents=[common, theta], help="Roll out a skill or trajectory")
    p.add_argument('--trajectory', help="Trajectory CSV (t,dx,dy,dz,da,db,dc)")
    p.add_argument('--dump-steps', action='store_true', help="Write particle positions after every step")

    p = sub.add_parser('sysid', parents=[common, optimizing], help="Identify material parameters")
    p.add_argument('target_opt', help="Target cloud of the optimization motion")
    p.add_argument('target_val', help="Target cloud of the validation motion")
    p.add_argument('--init', choices=['midpoint', 'random', 'config'], default='midpoint')

    p = sub.add_parser('skill-opt', parents=[common, optimizing, theta], help="Optimize the digging skill")
    p.add_argument('target')
    p.add_argument('--init', choices=['demo', 'midpoint', 'random'], default='demo')

    p = sub.add_parser('traj-opt', parents=[common, optimizing, theta], help="Optimize a raw action trajectory")
    p.add_argument('target')
    p.add_argument('--trajectory', help="Initial trajectory CSV; default is the demonstration skill")

    p = sub.add_parser('landscape', parents=[common, theta], help="Scan the loss over one or two parameters")
    p.add_argument('target')
    p.add_argument('--axis', action='append', required=True, metavar='NAME:LOW:HIGH[:STEPS]')
    p.add_argument('--loss', choices=[k.value for k in LossKind])
    p.add_argument('--centralize', action='store_true', help="Subtract the mean loss")
    p.add_argument('--normalize', action='store_true', help="Rescale gradients to unit length")

    p = sub.add_parser('demo-prior', parents=[common], help="Print the demonstration skill for a target")
    p.add_argument('target')
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    run: Optional[RunDirectory] = None
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        configure_determinism(args.threads)
        config = load_configuration(args)
        out = args.out or f"runs/{args.command}"
        run = RunDirectory(out, args.command, config, config.scene.seed, argv)
        COMMANDS[args.command](args, config, run)
        if run.opened:
            run.finish()
        return EXIT_OK

    except (ConfigError, ContractViolation) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_CONFIG
    except SimulationDivergedError as e:
        logger.error(f"{args.command}: simulation diverged: {e}")
        return EXIT_DIVERGED
    except OSError as e:
        logger.error(f"{args.command}: I/O error: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
