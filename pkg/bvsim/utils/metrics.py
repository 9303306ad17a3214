import numpy as np
from scipy.integrate import trapezoid
from collections import OrderedDict
from bvsim import base
from bvsim.base import UsageError


class StatePair(object):
    """Input-state pair (u, x) on [a, b] with vectorised samplers."""

    def __init__(self, a: float, b: float, u: base.Callable, x: base.Callable) -> None:
        """
        Initialise the pair.

        :a (float): Start of the interval.
        :b (float): End of the interval.
        :u (base.Callable): times -> array (len, m).
        :x (base.Callable): times -> array (len, n).
        """
        self.a, self.b = float(a), float(b)
        self.u, self.x = u, x

    @classmethod
    def from_objects(cls, path: object, trajectory: object) -> 'StatePair':
        """Pair a BVPath (or anything with `sample`) with a Trajectory."""
        return cls(path.a, path.b, path.sample, trajectory.sample)

    def stacked(self, times: base.VectorType) -> base.ArrayType:
        """Rows (u(t), x(t))."""
        times = np.atleast_1d(np.asarray(times, dtype = float))
        return np.hstack([np.asarray(self.u(times)).reshape(len(times), -1),
                          np.asarray(self.x(times)).reshape(len(times), -1)])


def _check_compatible(target: StatePair, candidate: StatePair) -> None:
    if target.a != candidate.a or target.b != candidate.b:
        raise UsageError(f"Pairs live on [{target.a}, {target.b}] and [{candidate.a}, {candidate.b}]")


def pointwise_error(target: StatePair, candidate: StatePair, tau: float) -> float:
    """|(u_k, x_k)(tau) - (u, x)(tau)|."""
    _check_compatible(target, candidate)
    if not (target.a <= tau <= target.b):
        raise UsageError(f"tau={tau} lies outside [{target.a}, {target.b}]")
    diff = target.stacked([tau]) - candidate.stacked([tau])
    return float(np.linalg.norm(diff))


def l1_distance(first: base.Callable, second: base.Callable, a: float, b: float, points: int = base.L1_POINTS
                ) -> float:
    """
    Trapezoid-rule L1 distance of two vectorised maps on a uniform grid of [a, b].

    :first (base.Callable): times -> array (len, d).
    :second (base.Callable): times -> array (len, d).
    :returns (float): The distance.
    """
    times = np.linspace(a, b, points)
    diff = np.asarray(first(times), dtype = float).reshape(points, -1)
    diff = diff - np.asarray(second(times), dtype = float).reshape(points, -1)
    return float(trapezoid(np.linalg.norm(diff, axis = 1), times))


def l1_error(target: StatePair, candidate: StatePair, points: int = base.L1_POINTS) -> float:
    """||(u_k, x_k) - (u, x)||_1 by the trapezoid rule on a uniform grid."""
    _check_compatible(target, candidate)
    return l1_distance(target.stacked, candidate.stacked, target.a, target.b, points)


def limit_error(target: StatePair, candidate: StatePair, tau: float, points: int = base.L1_POINTS) -> float:
    """
    Pointwise mismatch at tau plus the L1 distance.

    :target (StatePair): The limit (u, x).
    :candidate (StatePair): The approximant (u_k, x_k).
    :tau (float): Probe time.
    :points (int, default = base.L1_POINTS): Grid size of the L1 quadrature.
    :returns (float): The error functional.
    """
    return pointwise_error(target, candidate, tau) + l1_error(target, candidate, points)


def sup_norm(values: base.ArrayType) -> float:
    """Largest Euclidean row norm."""
    return float(np.max(np.linalg.norm(np.atleast_2d(values), axis = 1)))


def path_variation(values: base.ArrayType) -> float:
    """Sum of chord lengths of a sampled path."""
    values = np.asarray(values, dtype = float).reshape(len(values), -1)
    return float(np.linalg.norm(np.diff(values, axis = 0), axis = 1).sum())


class ApproxReport(object):
    """Per-k records of the approximation errors, with one row per (k, tau)."""

    columns = ['k', 'tau', 'pointwise_err', 'l1_err', 'var_uk', 'sup_xk']

    def __init__(self, budget: float = None) -> None:
        """
        Initialise the report.

        :budget (float, default = None): Declared variation budget of the u_k.
        """
        self.budget = budget
        self.rows = []
        self.extras = OrderedDict()

    def add(self, k: int, tau: float, pointwise_err: float, l1_err: float, var_uk: float, sup_xk: float) -> None:
        self.rows.append(OrderedDict(zip(self.columns, [k, tau, pointwise_err, l1_err, var_uk, sup_xk])))

    def record(self, name: str, k: int, value: float) -> None:
        """Keep an additional per-k quantity, e.g. a cost value."""
        self.extras.setdefault(name, OrderedDict())[k] = value

    @property
    def ks(self) -> base.List[int]:
        return sorted({row['k'] for row in self.rows})

    @property
    def taus(self) -> base.List[float]:
        return sorted({row['tau'] for row in self.rows})

    def errors(self, tau: float) -> base.List[float]:
        """Total error pointwise + L1 at tau, in k order."""
        rows = sorted((r for r in self.rows if r['tau'] == tau), key = lambda r: r['k'])
        return [r['pointwise_err'] + r['l1_err'] for r in rows]

    def variations(self) -> base.Dict[int, float]:
        return OrderedDict((row['k'], row['var_uk']) for row in sorted(self.rows, key = lambda r: r['k']))

    @property
    def max_error(self) -> float:
        return max((r['pointwise_err'] + r['l1_err'] for r in self.rows), default = 0.0)

    def summary(self, k: int) -> base.Dict[str, float]:
        """Worst errors for one k, for progress bars and tracking."""
        rows = [r for r in self.rows if r['k'] == k]
        return {'k': k, 'max_pointwise_err': max(r['pointwise_err'] for r in rows),
                'l1_err': rows[0]['l1_err'], 'var_uk': rows[0]['var_uk'], 'sup_xk': rows[0]['sup_xk']}

    def __len__(self) -> int:
        return len(self.rows)
