import os
import csv
import joblib
import numpy as np
from contextlib import contextmanager
from bvsim import base
from bvsim.modeling.completion import SpaceTimeControl
from bvsim.modeling.integrator import Trajectory
from bvsim.utils.metrics import ApproxReport


@contextmanager
def csv_writer(path: str) -> base.Iterator:
    """
    Open a UTF-8 CSV file for writing, creating its directory.

    :path (str): File path.
    :returns (base.Iterator): A csv.writer.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok = True)
    with open(path, 'w', encoding = 'utf-8', newline = '') as outf:
        yield csv.writer(outf)


def trajectory_header(n: int) -> base.List[str]:
    return ['t'] + [f'x_{i + 1}' for i in range(n)] + ['side']


def write_trajectory(writer: base.Callable, trajectory: Trajectory, times: base.VectorType,
                     envelope: bool = True) -> int:
    """
    Write x(t) in time order. At a jump time the sample x(t) is framed by the envelope rows x(t-) and x(t+),
    flagged with side left and right. Ordinary rows leave side empty.

    :writer (base.Callable): Opened csv writer.
    :trajectory (Trajectory): The trajectory.
    :times (base.VectorType): Sample times; jump times are added.
    :envelope (bool, default = True): Write the envelope rows.
    :returns (int): Number of data rows.
    """
    times = np.union1d(np.asarray(times, dtype = float), trajectory.jump_times)
    values = trajectory.sample(times)
    writer.writerow(trajectory_header(trajectory.n))
    rows = 0
    for t, value in zip(times, values):
        t = float(t)
        states = [('', value)]
        if envelope and t in trajectory.jumps:
            minus, plus = trajectory.jumps[t]
            states = [('left', minus), ('', value), ('right', plus)]
        for side, state in states:
            writer.writerow([t] + [float(x) for x in state] + [side])
        rows += len(states)
    return rows


def completion_header(m: int) -> base.List[str]:
    return ['s', 'phi0'] + [f'phi_{j + 1}' for j in range(m)]


def write_completion(writer: base.Callable, control: SpaceTimeControl) -> int:
    """
    Write the grid of a space-time control, one row per pseudo-time s.

    :writer (base.Callable): Opened csv writer.
    :control (SpaceTimeControl): A completion or any sampled control.
    :returns (int): Number of data rows.
    """
    writer.writerow(completion_header(control.dim))
    for s, t, phi in zip(control.s_grid, control.phi0, control.phi):
        writer.writerow([float(s), float(t)] + [float(p) for p in phi])
    return len(control.s_grid)


def write_report(writer: base.Callable, report: ApproxReport) -> int:
    """
    Write an approximation report ordered by k, then tau.

    :writer (base.Callable): Opened csv writer.
    :report (ApproxReport): The report.
    :returns (int): Number of data rows.
    """
    writer.writerow(report.columns)
    rows = sorted(report.rows, key = lambda r: (r['k'], r['tau']))
    for row in rows:
        writer.writerow([row[column] for column in report.columns])
    return len(rows)


def write_cost(writer: base.Callable, costs: base.Dict[float, float]) -> int:
    """
    Write the cost per k.

    :writer (base.Callable): Opened csv writer.
    :costs (base.Dict[float, float]): k -> cost.
    :returns (int): Number of data rows.
    """
    writer.writerow(['k', 'cost'])
    for k in sorted(costs):
        writer.writerow([k, float(costs[k])])
    return len(costs)


def store_report(report: ApproxReport, base_path: str) -> str:
    """
    Store a report for later analysis.

    :report (ApproxReport): The report.
    :base_path (str): Path without extension.
    :returns (str): The file written.
    """
    path = f'{base_path}.rpt'
    joblib.dump({'budget': report.budget, 'rows': report.rows, 'extras': report.extras}, path)
    return path


def load_report(base_path: str) -> ApproxReport:
    """
    Load a stored report.

    :base_path (str): Path without extension.
    :returns (ApproxReport): The report.
    """
    stored = joblib.load(f'{base_path}.rpt')
    report = ApproxReport(stored['budget'])
    report.rows = stored['rows']
    report.extras = stored['extras']
    return report
