"""
Command line interface.

    bvsim solve --scenario step_noncomm --out runs/step
    bvsim approximate --scenario step_linear --ks 32,128,512
    bvsim verify [--scenario all|<path>] [--criterion clock]
"""
import os
import argparse
import numpy as np
from tqdm import tqdm
from dataclasses import dataclass, field
from bvsim import base
from bvsim.base import BVSimError, UsageError
from bvsim.data.fileio import csv_writer, store_report, write_completion, write_cost, write_report, write_trajectory
from bvsim.data.scenario import Scenario, load_scenario
from bvsim.modeling.completion import build_completion
from bvsim.modeling.integrator import solve
from bvsim.utils.approximation import MollifierKernel, approximating_sequence, build_report, family_sequence
from bvsim.utils.convergence import certificate
from bvsim.utils.evaluate import CRITERIA, run_criteria, verify_scenario
from bvsim.utils.lie import commutativity_report, sample_points
from bvsim.utils.metrics import StatePair, path_variation
from bvsim.utils.pipeline import _get_datestr


@dataclass
class RunResult:
    """Exit status, emitted files and summary numbers of one command."""

    status: int
    paths: base.List[str] = field(default_factory = list)
    summary: base.Dict[str, object] = field(default_factory = dict)


def _numbers(text: str) -> base.List[float]:
    try:
        return [float(value) for value in text.split(',') if value.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog = 'bvsim', description = "Impulsive control systems driven by BV inputs.")
    commands = parser.add_subparsers(dest = 'command')
    commands.required = True

    for name, helptext in (('solve', "Graph-completion solution of a scenario."),
                           ('approximate', "Approximating sequence and BV-simple certificate."),
                           ('verify', "Run the acceptance checks, or the checks of one scenario.")):
        sub = commands.add_parser(name, help = helptext)
        sub.add_argument('--scenario', default = 'all' if name == 'verify' else None, required = name != 'verify',
                         help = "Scenario file or built-in name (ex21, step_noncomm, step_comm, ac_loop, step_linear).")
        sub.add_argument('--step', type = float, default = None, help = "RK4 step, overrides [solver] step.")
        sub.add_argument('--grid', type = int, default = None, help = "Completion grid intervals.")
        sub.add_argument('--jobs', type = int, default = None, help = "joblib workers for sweeps.")
        sub.add_argument('--ks', type = _numbers, default = None, help = "Sweep indices, e.g. 8,32,128.")
        sub.add_argument('--taus', type = _numbers, default = None, help = "Probe times, e.g. 0.25,0.5,1.")
        sub.add_argument('--out', default = None, help = "Output directory.")
        sub.add_argument('--seed', type = int, default = base.DEFAULT_SEED, help = "Seed of all sampled checks.")
        if name == 'approximate':
            sub.add_argument('--track', action = 'store_true', default = False, help = "Log the sweep to wandb.")
        if name == 'verify':
            sub.add_argument('--criterion', default = None, choices = list(CRITERIA),
                             help = "Run a single acceptance check.")
    return parser


def _apply_overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    """Command line values replace the scenario's own."""
    if args.step is not None:
        if args.step <= 0:
            raise UsageError(f"--step must be positive, got {args.step}")
        scenario.step = args.step
    if args.grid is not None:
        if args.grid < 1:
            raise UsageError(f"--grid must be positive, got {args.grid}")
        scenario.grid = args.grid
    if args.jobs is not None:
        scenario.jobs = args.jobs
    if args.ks is not None:
        if not scenario.is_family and any(k != int(k) for k in args.ks):
            raise UsageError(f"--ks of a fixed input must be integers, got {args.ks}")
        scenario.ks = args.ks if scenario.is_family else [int(k) for k in args.ks]
    if args.taus is not None:
        if any(not scenario.a <= tau <= scenario.b for tau in args.taus):
            raise UsageError(f"--taus must lie in [{scenario.a}, {scenario.b}]")
        scenario.taus = args.taus
    return scenario


def _out_dir(scenario: Scenario, args: argparse.Namespace) -> str:
    out = args.out if args.out is not None else os.path.join('results', f'{scenario.name}_{_get_datestr()}')
    os.makedirs(out, exist_ok = True)
    return out


def _fixed_path(scenario: Scenario):
    if scenario.path is None:
        raise UsageError(f"Scenario '{scenario.name}' is a family in k; set [params] k to solve a single member")
    return scenario.path


def cmd_solve(scenario: Scenario, args: argparse.Namespace) -> RunResult:
    """Build the completion, integrate and write trajectory.csv and completion.csv."""
    path = _fixed_path(scenario)
    gc = build_completion(path, bridges = scenario.bridges, grid = scenario.grid)
    _, x = solve(gc, scenario.dynamics, scenario.v, scenario.x0, scenario.step)
    report = commutativity_report(scenario.dynamics, sample_points(scenario.dynamics.n, seed = args.seed))

    out = _out_dir(scenario, args)
    trajectory_path, completion_path = os.path.join(out, 'trajectory.csv'), os.path.join(out, 'completion.csv')
    with csv_writer(trajectory_path) as writer:
        write_trajectory(writer, x, np.linspace(gc.a, gc.b, 1001))
    with csv_writer(completion_path) as writer:
        write_completion(writer, gc)

    summary = {'variation': path.total_variation, 'lipschitz': gc.lipschitz_L, 'commutativity': report.verdict,
               'x_final': x(gc.b).tolist()}
    tqdm.write(f"Var(u) = {summary['variation']:.6g}, L = {summary['lipschitz']:.6g}, {report.verdict}")
    tqdm.write(f"x({gc.b:g}) = {summary['x_final']}")
    return RunResult(0, [trajectory_path, completion_path], summary)


def cmd_approximate(scenario: Scenario, args: argparse.Namespace) -> RunResult:
    """Sweep k, write report.csv (and cost.csv) and print the certificate verdict."""
    if scenario.is_family:
        members = family_sequence(scenario.build, scenario.v, scenario.x0, scenario.ks, scenario.step, scenario.jobs)
        report = build_report(scenario.limit_pair(), members, scenario.taus)
        trajectories = {member.k: member.trajectory for member in members}
    else:
        path = _fixed_path(scenario)
        gc = build_completion(path, bridges = scenario.bridges, grid = scenario.grid)
        _, x = solve(gc, scenario.dynamics, scenario.v, scenario.x0, scenario.step)
        kernel = MollifierKernel(scenario.support if scenario.support is not None else gc.b - gc.a)
        members = approximating_sequence(gc, scenario.dynamics, scenario.v, scenario.x0, scenario.ks, kernel,
                                         scenario.step, scenario.jobs)
        report = build_report(StatePair.from_objects(path, x), members, scenario.taus, path_variation(gc.phi))
        trajectories = {member.k: member.trajectory() for member in members}

    out = _out_dir(scenario, args)
    report_path = os.path.join(out, 'report.csv')
    with csv_writer(report_path) as writer:
        write_report(writer, report)
    paths = [report_path]

    if scenario.cost_phi is not None:
        for k, trajectory in trajectories.items():
            report.record('cost', k, scenario.cost(trajectory))
        cost_path = os.path.join(out, 'cost.csv')
        with csv_writer(cost_path) as writer:
            write_cost(writer, report.extras['cost'])
        paths.append(cost_path)
    paths.append(store_report(report, os.path.join(out, 'report')))

    if args.track:
        import wandb
        run = wandb.init(project = 'bvsim', name = f'{scenario.name}_{_get_datestr()}', mode = 'offline',
                         config = {'scenario': scenario.name, 'step': scenario.step, 'ks': list(scenario.ks),
                                   'taus': list(scenario.taus), 'grid': scenario.grid})
        for k in report.ks:
            scores = report.summary(k)
            if 'cost' in report.extras:
                scores['cost'] = report.extras['cost'][k]
            wandb.log({f'approximate/{key}': value for key, value in scores.items()})
        run.finish()

    verdict = certificate(report)
    for k in report.ks:
        scores = report.summary(k)
        tqdm.write(f"k = {k:g}: max pointwise error {scores['max_pointwise_err']:.3e}, L1 error "
                   f"{scores['l1_err']:.3e}, Var(u_k) {scores['var_uk']:.6g}")
    tqdm.write(verdict.verdict)
    return RunResult(0, paths, {'max_error': report.max_error, 'certified': verdict.passed,
                                'verdict': verdict.verdict})


def cmd_verify(args: argparse.Namespace) -> RunResult:
    """Run the acceptance suite or the checks of one scenario; the status is 1 when any check fails."""
    if args.scenario == 'all':
        results = run_criteria([args.criterion] if args.criterion else None, seed = args.seed)
    else:
        results = verify_scenario(_apply_overrides(load_scenario(args.scenario), args), seed = args.seed)

    for result in results:
        tqdm.write(f"{result} [{result.seconds:.2f}s]")
    failed = [result.name for result in results if not result.passed]
    if failed:
        tqdm.write(f"FAILED: {', '.join(failed)}")
    else:
        tqdm.write(f"All {len(results)} checks passed")
    return RunResult(1 if failed else 0, [], {'failed': failed, 'checks': len(results)})


def main(argv: base.List[str] = None) -> int:
    """
    Parse the command line and dispatch.

    :argv (base.List[str], default = None): Arguments, sys.argv[1:] when None.
    :returns (int): Exit status, 0 on success.
    """
    args = build_parser().parse_args(argv)
    try:
        if args.command == 'verify':
            return cmd_verify(args).status
        scenario = _apply_overrides(load_scenario(args.scenario), args)
        if args.command == 'solve':
            return cmd_solve(scenario, args).status
        return cmd_approximate(scenario, args).status
    except BVSimError as e:
        tqdm.write(f"ERROR {type(e).__name__}: {e}")
        return 1
