# src/main.py
"""
Command-line entry point: python -m src.main <command> [run-config] [--set key=value ...]
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from .config import Config, RunConfig, load_run_config, setup_logging
from .errors import PmcfError
from .experiments.studies import (StudyResult, run_coupled_study, run_epsilon_study,
                                  run_h_study)
from .experiments.tables import format_table, schema_text, write_table
from .fe.function_io import write_function
from .geometry.domain import DomainGeometry
from .geometry.mesh import build_mesh
from .operators.regularization import RegParams
from .oracle.radial import dump_profile_csv, radial_regularized_solve
from .rates.exponents import optimize_rate
from .solver.fixed_point import (continuation_solve, contraction_probe, coupled_mesh_size,
                                 default_schedule)
from .solver.params import CouplingParams

logger = logging.getLogger(__name__)

COMMANDS = ('solve', 'converge-eps', 'converge-h', 'converge-coupled', 'rates', 'oracle')
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2


def _parse_overrides(items: Optional[List[str]]) -> dict:
    overrides = {}
    for item in items or []:
        key, sep, value = item.partition('=')
        if not sep:
            raise ValueError(f"Override '{item}' is not of the form key=value")
        overrides[key.strip()] = value.strip()
    return overrides


def _load(args) -> RunConfig:
    overrides = _parse_overrides(args.set)
    if args.config:
        return load_run_config(Path(args.config), overrides)
    return RunConfig.model_validate(overrides)


def _domain(cfg: RunConfig) -> DomainGeometry:
    if cfg.domain == 'ellipse':
        return DomainGeometry.ellipse(cfg.a, cfg.b)
    return DomainGeometry.disk(cfg.R)


def _coupling(cfg: RunConfig) -> CouplingParams:
    return CouplingParams(beta=cfg.beta, c_coupling=cfg.c_coupling, delta=cfg.delta,
                          gamma_ball=cfg.gamma_ball, c_ball=cfg.c_ball, mu=cfg.mu)


def _emit(table: pd.DataFrame, output: Optional[Path]):
    if output is not None:
        write_table(table, output)
    else:
        sys.stdout.write(format_table(table))


def _finish(result: StudyResult, output: Optional[Path]) -> int:
    _emit(result.table, output)
    for key, value in result.summary.items():
        logger.info(f"{key}: {value:.6g}")
    failed = [name for name, ok in result.checks.items() if not ok]
    if failed:
        logger.error(f"Failed checks: {', '.join(failed)}")
        return EXIT_CHECK_FAILED
    return 0


def cmd_solve(cfg: RunConfig) -> int:
    domain = _domain(cfg)
    coupling = _coupling(cfg)
    h = coupled_mesh_size(coupling, cfg.epsilon) if cfg.coupled else cfg.mesh_h
    mesh = build_mesh(domain, h)
    rp = RegParams(epsilon=cfg.epsilon, k=cfg.k)
    schedule = cfg.schedule or default_schedule(cfg.epsilon)
    solution, reports = continuation_solve(mesh, rp, schedule, tol=cfg.tol, mode=cfg.mode,
                                           coupling=coupling)
    if cfg.mode == 'frozen':
        ratio = contraction_probe(solution, rp, cfg.sigma, cfg.trials, mu=cfg.mu)
        logger.info(f"Frozen T-map Lipschitz estimate at sigma={cfg.sigma:g}: {ratio:.4f}")
    table = pd.DataFrame([report.to_row() for report in reports])
    _emit(table, cfg.output_path)
    if cfg.output_path is not None:
        write_function(solution, Path(cfg.output_path).with_suffix('.fun'))
    return 0


def cmd_converge_eps(cfg: RunConfig) -> int:
    epsilons = cfg.schedule or [cfg.epsilon]
    result = run_epsilon_study(cfg.k, cfg.theta, epsilons, R=cfg.R, gamma_max=cfg.gamma_max,
                               margin=cfg.margin, grid_n=cfg.grid_n)
    return _finish(result, cfg.output_path)


def cmd_converge_h(cfg: RunConfig) -> int:
    h_list = cfg.h_list or [cfg.mesh_h]
    result = run_h_study(cfg.k, cfg.epsilon, h_list, R=cfg.R, mu=cfg.mu, tol=cfg.tol,
                         mode=cfg.mode, grid_n=cfg.grid_n)
    return _finish(result, cfg.output_path)


def cmd_converge_coupled(cfg: RunConfig) -> int:
    schedule = cfg.schedule or [cfg.epsilon]
    result = run_coupled_study(cfg.k, cfg.theta, _coupling(cfg), schedule, R=cfg.R, tol=cfg.tol,
                               mode=cfg.mode, gamma_max=cfg.gamma_max, margin=cfg.margin,
                               grid_n=cfg.grid_n)
    return _finish(result, cfg.output_path)


def cmd_rates(cfg: RunConfig, thetas: List[float]) -> int:
    rates = optimize_rate(cfg.k, cfg.gamma_max, cfg.margin)
    _emit(pd.DataFrame([rates.to_row(thetas)]), cfg.output_path)
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    profile = radial_regularized_solve(RegParams(epsilon=cfg.epsilon, k=cfg.k), cfg.R, cfg.grid_n)
    if cfg.output_path is not None:
        dump_profile_csv(profile, cfg.output_path)
    else:
        sys.stdout.write(format_table(profile.to_frame()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Finite element laboratory for the regularized power mean curvature '
                    'flow arrival-time equation')
    parser.add_argument('--schema', nargs='?', const='', metavar='COMMAND',
                        help='print the CSV columns of COMMAND (all commands if omitted) and exit')
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING, ERROR')
    sub = parser.add_subparsers(dest='command')
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument('config', nargs='?', default=None, help='key=value run file')
        cmd.add_argument('--set', action='append', metavar='KEY=VALUE',
                         help='override a run-file entry (repeatable)')
        if name == 'rates':
            cmd.add_argument('--thetas', default=None,
                             help='comma separated Hoelder exponents (default: theta from the run file)')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main application entry point.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    if args.schema is not None:
        sys.stdout.write(schema_text(args.schema or None) + "\n")
        return 0
    if args.command is None:
        parser.print_help()
        return EXIT_ERROR

    try:
        Config.validate()
        cfg = _load(args)
        logger.info(f"Running '{args.command}' with {cfg.model_dump(exclude_none=True)}")
        if args.command == 'solve':
            return cmd_solve(cfg)
        if args.command == 'converge-eps':
            return cmd_converge_eps(cfg)
        if args.command == 'converge-h':
            return cmd_converge_h(cfg)
        if args.command == 'converge-coupled':
            return cmd_converge_coupled(cfg)
        if args.command == 'rates':
            thetas = ([float(t) for t in args.thetas.split(',')] if args.thetas else [cfg.theta])
            return cmd_rates(cfg, thetas)
        return cmd_oracle(cfg)
    except (PmcfError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
