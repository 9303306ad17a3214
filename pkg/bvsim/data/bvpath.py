import numpy as np
from functools import cached_property
from scipy.optimize import linprog
from bvsim import base
from bvsim.base import ComputationError, ConfigurationError, DomainError
from bvsim.modeling import expr as ex


class ControlSet(object):
    """Compact control set U: an axis-aligned box or the convex hull of listed vertices."""

    def __init__(self, dim: int, lower: base.VectorType = None, upper: base.VectorType = None,
                 vertices: base.VectorType = None, whitney: float = 1.0, tol: float = 1e-9) -> None:
        """
        Initialise the control set.

        :dim (int): Dimension m of the control space.
        :lower (base.VectorType, default = None): Lower box bounds, finite. Required unless vertices are given.
        :upper (base.VectorType, default = None): Upper box bounds, finite. Required unless vertices are given.
        :vertices (base.VectorType, default = None): Vertices of a convex hull, shape (p, dim).
        :whitney (float, default = 1.0): Whitney constant M >= 1.
        :tol (float, default = 1e-9): Membership tolerance.
        """
        if dim < 1:
            raise ConfigurationError(f"Control dimension must be positive, got {dim}")
        if whitney < 1:
            raise ConfigurationError(f"Whitney constant must be >= 1, got {whitney}")
        self.dim = int(dim)
        self.whitney = float(whitney)
        self.tol = tol

        if vertices is not None:
            self.kind = 'hull'
            self.vertices = np.atleast_2d(np.asarray(vertices, dtype = float))
            if self.vertices.shape[1] != dim or self.vertices.shape[0] < 1:
                raise ConfigurationError(f"Hull vertices must have shape (p, {dim}), got {self.vertices.shape}")
            if not np.all(np.isfinite(self.vertices)):
                raise ConfigurationError("Hull vertices must be finite")
            self.lower, self.upper = self.vertices.min(axis = 0), self.vertices.max(axis = 0)
        else:
            self.kind = 'box'
            self.vertices = None
            if lower is None or upper is None:
                raise ConfigurationError("A box control set needs both lower and upper bounds")
            self.lower = np.asarray(lower, dtype = float).reshape(dim)
            self.upper = np.asarray(upper, dtype = float).reshape(dim)
            if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
                raise ConfigurationError("Box bounds must be finite, U is compact")
            if np.any(self.lower > self.upper):
                raise ConfigurationError("Box lower bounds exceed upper bounds, the set is empty")

    @classmethod
    def enclosing(cls, points: base.ArrayType, whitney: float = 1.0) -> 'ControlSet':
        """Smallest box containing the given points, for inputs without a declared control set."""
        points = np.atleast_2d(np.asarray(points, dtype = float))
        return cls(points.shape[1], points.min(axis = 0), points.max(axis = 0), whitney = whitney)

    def contains(self, point: base.VectorType) -> bool:
        """
        Membership test.

        :point (base.VectorType): Point of dimension m.
        :returns (bool): True if the point lies in U up to the tolerance.
        """
        p = np.asarray(point, dtype = float).reshape(self.dim)
        if np.any(p < self.lower - self.tol) or np.any(p > self.upper + self.tol):
            return False
        if self.kind == 'box':
            return True

        # Feasibility of p = sum_j lambda_j V_j with lambda in the simplex.
        p_count = self.vertices.shape[0]
        a_eq = np.vstack([self.vertices.T, np.ones((1, p_count))])
        b_eq = np.concatenate([p, [1.0]])
        result = linprog(np.zeros(p_count), A_eq = a_eq, b_eq = b_eq, bounds = [(0, None)] * p_count,
                         method = 'highs')
        return result.status == 0

    def contains_all(self, points: base.ArrayType) -> bool:
        """Membership of every row of points."""
        points = np.asarray(points, dtype = float).reshape(-1, self.dim)
        if self.kind == 'box':
            return bool(np.all(points >= self.lower - self.tol) and np.all(points <= self.upper + self.tol))
        return all(self.contains(p) for p in points)

    def check(self, point: base.VectorType, what: str = 'value') -> None:
        """Raise a DomainError when the point is outside U."""
        if not self.contains(point):
            raise DomainError(f"{what} {np.asarray(point).tolist()} lies outside the control set")

    def __repr__(self) -> str:
        if self.kind == 'box':
            return f"ControlSet(box, lower={self.lower.tolist()}, upper={self.upper.tolist()}, M={self.whitney})"
        return f"ControlSet(hull of {len(self.vertices)} vertices, M={self.whitney})"


class TableSegment(object):
    """Piecewise-linear segment given by a sample table."""

    kind = 'table'

    def __init__(self, times: base.VectorType, values: base.VectorType) -> None:
        """
        Initialise the segment.

        :times (base.VectorType): Strictly increasing knots, first and last are the segment ends.
        :values (base.VectorType): Values at the knots, shape (len(times), m).
        """
        self.times = np.asarray(times, dtype = float)
        values = np.asarray(values, dtype = float)
        self.values = values.reshape(len(self.times), -1)
        if len(self.times) < 2 or np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("Table segment knots must be strictly increasing with at least two entries")
        self.dim = self.values.shape[1]
        self.t0, self.t1 = self.times[0], self.times[-1]
        self.cumulative = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(self.values, axis = 0), axis = 1))])

    def value(self, t: float) -> base.ArrayType:
        return np.array([np.interp(t, self.times, self.values[:, j]) for j in range(self.dim)])

    def values_at(self, ts: base.ArrayType) -> base.ArrayType:
        ts = np.asarray(ts, dtype = float)
        return np.column_stack([np.interp(ts, self.times, self.values[:, j]) for j in range(self.dim)])

    def derivative(self, t: float) -> base.ArrayType:
        """Chord slope of the table interval containing t, taken from the right except at the end."""
        j = int(np.clip(np.searchsorted(self.times, t, side = 'right') - 1, 0, len(self.times) - 2))
        return (self.values[j + 1] - self.values[j]) / (self.times[j + 1] - self.times[j])

    @property
    def knots(self) -> base.ArrayType:
        return self.times

    @property
    def total_variation(self) -> float:
        return float(self.cumulative[-1])

    def variation_profile(self) -> base.Tuple[base.ArrayType, base.ArrayType]:
        """Knots and the variation accumulated from t0 up to each knot."""
        return self.times, self.cumulative

    def partial_variation(self, t: float) -> float:
        """Exact variation on [t0, t]."""
        j = int(np.clip(np.searchsorted(self.times, t, side = 'right') - 1, 0, len(self.times) - 1))
        return float(self.cumulative[j] + np.linalg.norm(self.value(t) - self.values[j]))

    def reversed(self, a: float, b: float) -> 'TableSegment':
        return TableSegment((a + b - self.times)[::-1], self.values[::-1])

    def __repr__(self) -> str:
        return f"TableSegment([{self.t0}, {self.t1}], {len(self.times)} knots)"


class ExprSegment(object):
    """Segment given by one expression in t (and k) per control component."""

    kind = 'expr'

    def __init__(self, exprs: base.List[ex.Expr], t0: float, t1: float, k: float = 0.0,
                 tol: float = base.VARIATION_TOL, max_level: int = base.VARIATION_MAX_LEVEL) -> None:
        """
        Initialise the segment.

        :exprs (base.List[ex.Expr]): One tree per component, over the variables t and k.
        :t0 (float): Start of the segment.
        :t1 (float): End of the segment.
        :k (float, default = 0.0): Value of the family parameter k.
        :tol (float, default = base.VARIATION_TOL): Relative tolerance of the variation refinement.
        :max_level (int, default = base.VARIATION_MAX_LEVEL): Finest dyadic level tried.
        """
        for e in exprs:
            extra = ex.variables(e) - {'t', 'k'}
            if extra:
                raise ConfigurationError(f"Input segment '{e}' may only depend on t and k, found {sorted(extra)}")
        if not t0 < t1:
            raise ConfigurationError(f"Segment ends must satisfy t0 < t1, got [{t0}, {t1}]")
        self.exprs = list(exprs)
        self.dim = len(self.exprs)
        self.t0, self.t1, self.k = float(t0), float(t1), float(k)
        self.tol, self.max_level = tol, max_level
        self._scalar = ex.compile_exprs(self.exprs, 'math')
        self._vector = ex.compile_exprs(self.exprs, 'numpy')

    def value(self, t: float) -> base.ArrayType:
        return np.array(self._scalar(t, k = self.k), dtype = float)

    def values_at(self, ts: base.ArrayType) -> base.ArrayType:
        ts = np.asarray(ts, dtype = float)
        comps = self._vector(ts, k = self.k)
        return np.column_stack([np.broadcast_to(np.asarray(c, dtype = float), ts.shape) for c in comps])

    @cached_property
    def _derivative(self) -> base.Callable:
        return ex.compile_exprs([ex.differentiate(e, 't') for e in self.exprs], 'math')

    def derivative(self, t: float) -> base.ArrayType:
        """Symbolic d/dt, evaluated at t."""
        return np.array(self._derivative(t, k = self.k), dtype = float)

    @cached_property
    def _variation_table(self) -> base.Tuple[base.ArrayType, base.ArrayType]:
        """
        Cumulative chord lengths on the dyadic grid where the total has converged.

        Chord sums of smooth pieces converge at second order, so successive levels are combined by
        Richardson extrapolation and the profile is rescaled to the extrapolated total.
        """
        chords, estimate = None, None
        for level in range(4, self.max_level + 1):
            grid = np.linspace(self.t0, self.t1, 2 ** level + 1)
            steps = np.linalg.norm(np.diff(self.values_at(grid), axis = 0), axis = 1)
            total = steps.sum()
            if not np.isfinite(total):
                raise ComputationError(f"Non-finite variation estimate for segment {self}")
            if chords is not None:
                extrapolated = max(total, (4 * total - chords) / 3)
                if estimate is not None and abs(extrapolated - estimate) <= self.tol * max(extrapolated, 1.0):
                    cumulative = np.concatenate([[0.0], np.cumsum(steps)])
                    if total > 0:
                        cumulative *= extrapolated / total
                    return grid, cumulative
                estimate = extrapolated
            chords = total
        raise ComputationError(f"Variation refinement of segment {self} did not converge by level {self.max_level}")

    @property
    def knots(self) -> base.ArrayType:
        return np.array([self.t0, self.t1])

    @property
    def total_variation(self) -> float:
        return float(self._variation_table[1][-1])

    def variation_profile(self) -> base.Tuple[base.ArrayType, base.ArrayType]:
        return self._variation_table

    def partial_variation(self, t: float) -> float:
        grid, cumulative = self._variation_table
        j = int(np.clip(np.searchsorted(grid, t, side = 'right') - 1, 0, len(grid) - 1))
        return float(cumulative[j] + np.linalg.norm(self.value(t) - self.value(grid[j])))

    def reversed(self, a: float, b: float) -> 'ExprSegment':
        mirror = ex.Binary('-', ex.Num(a + b), ex.Var('t'))
        return ExprSegment([ex.substitute(e, 't', mirror) for e in self.exprs], a + b - self.t1, a + b - self.t0,
                           k = self.k, tol = self.tol, max_level = self.max_level)

    def __repr__(self) -> str:
        return f"ExprSegment([{self.t0}, {self.t1}], {[str(e) for e in self.exprs]})"


Segment = base.Union[TableSegment, ExprSegment]


class BVPath(object):
    """Pointwise-defined bounded-variation path u: [a, b] -> U with explicit jump triples."""

    def __init__(self, breakpoints: base.VectorType, segments: base.List[Segment],
                 jumps: base.List[base.Tuple[base.VectorType, base.VectorType, base.VectorType]],
                 control_set: ControlSet = None, match_tol: float = 1e-9) -> None:
        """
        Initialise the path and validate it.

        :breakpoints (base.VectorType): a = t_0 < ... < t_N = b.
        :segments (base.List[Segment]): One segment per interval (t_i, t_{i+1}).
        :jumps (base.List[tuple]): Per breakpoint the triple (u(t-), u(t), u(t+)).
        :control_set (ControlSet, default = None): The set U. Defaults to the smallest box enclosing the path.
        :match_tol (float, default = 1e-9): Tolerance for segment ends against the jump triples.
        """
        self.breakpoints = np.asarray(breakpoints, dtype = float)
        if len(self.breakpoints) < 2 or np.any(np.diff(self.breakpoints) <= 0):
            raise ConfigurationError("Breakpoints must be strictly increasing and include both ends")
        self.a, self.b = float(self.breakpoints[0]), float(self.breakpoints[-1])
        if len(segments) != len(self.breakpoints) - 1:
            raise ConfigurationError(f"Expected {len(self.breakpoints) - 1} segments, got {len(segments)}")
        if len(jumps) != len(self.breakpoints):
            raise ConfigurationError(f"Expected {len(self.breakpoints)} jump triples, got {len(jumps)}")

        self.segments = list(segments)
        self.dim = self.segments[0].dim
        for i, segment in enumerate(self.segments):
            if segment.dim != self.dim:
                raise ConfigurationError(f"Segment {i + 1} has dimension {segment.dim}, expected {self.dim}")
        triples = []
        for i, triple in enumerate(jumps):
            left, at, right = (np.asarray(p, dtype = float).reshape(self.dim) for p in triple)
            if i == 0:
                left = at
            if i == len(jumps) - 1:
                right = at
            triples.append((left, at, right))
        self.jumps = triples
        if control_set is None:
            points = self._segment_samples() + [np.vstack(triple) for triple in triples]
            control_set = ControlSet.enclosing(np.vstack(points))
        if control_set.dim != self.dim:
            raise ConfigurationError(f"Control set dimension {control_set.dim} != path dimension {self.dim}")
        self.control_set = control_set
        self._validate(match_tol)
        self._prefix = self._prefix_variation()

    @classmethod
    def from_segments(cls, breakpoints: base.VectorType, segments: base.List[Segment],
                      at_values: base.Dict[int, base.VectorType] = None, control_set: ControlSet = None
                      ) -> 'BVPath':
        """
        Build a path whose one-sided limits are read off the segments.

        :breakpoints (base.VectorType): a = t_0 < ... < t_N = b.
        :segments (base.List[Segment]): One segment per interval.
        :at_values (base.Dict[int, base.VectorType], default = None): Value at breakpoint i. The right
                    limit is used where it is missing.
        :control_set (ControlSet, default = None): The set U.
        :returns (BVPath): The path.
        """
        at_values = at_values or {}
        jumps = []
        last = len(segments)
        for i in range(last + 1):
            left = segments[i - 1].value(breakpoints[i]) if i > 0 else segments[0].value(breakpoints[0])
            right = segments[i].value(breakpoints[i]) if i < last else segments[-1].value(breakpoints[-1])
            at = at_values.get(i, right if i < last else left)
            jumps.append((left, at, right))
        return cls(breakpoints, segments, jumps, control_set)

    @classmethod
    def constant(cls, a: float, b: float, value: base.VectorType, control_set: ControlSet = None) -> 'BVPath':
        value = np.atleast_1d(np.asarray(value, dtype = float))
        segment = TableSegment([a, b], [value, value])
        return cls([a, b], [segment], [(value, value, value)] * 2, control_set)

    @classmethod
    def step(cls, a: float, b: float, at: float, before: base.VectorType, after: base.VectorType,
             at_value: base.VectorType = None, control_set: ControlSet = None) -> 'BVPath':
        """Piecewise-constant path with one jump from `before` to `after` at time `at`."""
        before = np.atleast_1d(np.asarray(before, dtype = float))
        after = np.atleast_1d(np.asarray(after, dtype = float))
        at_value = after if at_value is None else np.atleast_1d(np.asarray(at_value, dtype = float))
        segments = [TableSegment([a, at], [before, before]), TableSegment([at, b], [after, after])]
        return cls([a, at, b], segments, [(before, before, before), (before, at_value, after), (after, after, after)],
                   control_set)

    @classmethod
    def piecewise_linear(cls, times: base.VectorType, values: base.VectorType,
                         control_set: ControlSet = None) -> 'BVPath':
        """Continuous piecewise-linear path through the given knots."""
        times = np.asarray(times, dtype = float)
        segment = TableSegment(times, values)
        first, last = segment.values[0], segment.values[-1]
        return cls([times[0], times[-1]], [segment], [(first, first, first), (last, last, last)], control_set)

    def _segment_samples(self) -> base.List[base.ArrayType]:
        """Segment values on 65 uniform points plus the segment knots, one array per segment."""
        return [segment.values_at(np.union1d(np.linspace(t0, t1, 65), segment.knots))
                for segment, t0, t1 in zip(self.segments, self.breakpoints[:-1], self.breakpoints[1:])]

    def _validate(self, match_tol: float) -> None:
        samples = self._segment_samples()
        for i, segment in enumerate(self.segments):
            t0, t1 = self.breakpoints[i], self.breakpoints[i + 1]
            if abs(segment.t0 - t0) > match_tol or abs(segment.t1 - t1) > match_tol:
                raise ConfigurationError(f"Segment {i + 1} covers [{segment.t0}, {segment.t1}], expected [{t0}, {t1}]")
            start, end = segment.value(t0), segment.value(t1)
            if np.linalg.norm(start - self.jumps[i][2]) > match_tol:
                raise ConfigurationError(f"Segment {i + 1} starts at {start.tolist()} but u(t+) at t={t0} is "
                                         f"{self.jumps[i][2].tolist()}")
            if np.linalg.norm(end - self.jumps[i + 1][0]) > match_tol:
                raise ConfigurationError(f"Segment {i + 1} ends at {end.tolist()} but u(t-) at t={t1} is "
                                         f"{self.jumps[i + 1][0].tolist()}")
            if not self.control_set.contains_all(samples[i]):
                raise DomainError(f"Segment {i + 1} leaves the control set")
        for t, triple in zip(self.breakpoints, self.jumps):
            for point in triple:
                self.control_set.check(point, f"Jump value at t={t}")

    def _prefix_variation(self) -> base.ArrayType:
        """variation(t_i) for every breakpoint: left jump at t_i counted, right jump not."""
        prefix = np.zeros(len(self.breakpoints))
        for i, segment in enumerate(self.segments):
            _, at, right = self.jumps[i]
            left_next, at_next, _ = self.jumps[i + 1]
            prefix[i + 1] = (prefix[i] + np.linalg.norm(right - at) + segment.total_variation
                             + np.linalg.norm(at_next - left_next))
        return prefix

    def _check_domain(self, t: float) -> None:
        if not (self.a <= t <= self.b):
            raise DomainError(f"t={t} lies outside [{self.a}, {self.b}]")

    def _locate(self, t: float) -> base.Tuple[int, bool]:
        """Index i with t_i <= t < t_{i+1} and whether t is the breakpoint itself."""
        i = int(np.searchsorted(self.breakpoints, t, side = 'right') - 1)
        i = min(i, len(self.segments))
        return i, t == self.breakpoints[i]

    def eval(self, t: float) -> base.ArrayType:
        """
        Value u(t).

        :t (float): Time in [a, b].
        :returns (base.ArrayType): The stored value at breakpoints, the segment value elsewhere.
        """
        self._check_domain(t)
        i, at_break = self._locate(t)
        if at_break:
            return self.jumps[i][1].copy()
        return self.segments[i].value(t)

    __call__ = eval

    def one_sided_limits(self, t: float) -> base.Tuple[base.ArrayType, base.ArrayType]:
        """
        Limits u(t-) and u(t+).

        :t (float): Time in [a, b].
        :returns (tuple): (left, right).
        """
        self._check_domain(t)
        i, at_break = self._locate(t)
        if at_break:
            return self.jumps[i][0].copy(), self.jumps[i][2].copy()
        value = self.segments[i].value(t)
        return value, value.copy()

    def variation(self, t: float = None) -> float:
        """
        Total variation on [a, t].

        The jump |u(t) - u(t-)| at t is counted, the jump |u(t+) - u(t)| is not.

        :t (float, default = None): Time in [a, b], defaults to b.
        :returns (float): The variation.
        """
        if t is None:
            return float(self._prefix[-1])
        self._check_domain(t)
        i, at_break = self._locate(t)
        if at_break:
            return float(self._prefix[i])
        _, at, right = self.jumps[i]
        return float(self._prefix[i] + np.linalg.norm(right - at) + self.segments[i].partial_variation(t))

    @property
    def total_variation(self) -> float:
        return float(self._prefix[-1])

    @property
    def prefix_variation(self) -> base.ArrayType:
        """variation(t_i) at every breakpoint."""
        return self._prefix.copy()

    def sample(self, times: base.VectorType) -> base.ArrayType:
        """
        Vectorised eval.

        :times (base.VectorType): Times in [a, b].
        :returns (base.ArrayType): Values, shape (len(times), m).
        """
        times = np.asarray(times, dtype = float)
        if times.size and (times.min() < self.a or times.max() > self.b):
            raise DomainError(f"Sample times leave [{self.a}, {self.b}]")
        out = np.empty((len(times), self.dim))
        ix = np.minimum(np.searchsorted(self.breakpoints, times, side = 'right') - 1, len(self.segments))
        for i in np.unique(ix):
            mask = ix == i
            if i < len(self.segments):
                out[mask] = self.segments[i].values_at(times[mask])
            on_break = mask & (times == self.breakpoints[i])
            out[on_break] = self.jumps[i][1]
        return out

    def reverse(self) -> 'BVPath':
        """The path t -> u(a + b - t). Left and right limits swap."""
        a, b = self.a, self.b
        breakpoints = (a + b - self.breakpoints)[::-1]
        segments = [segment.reversed(a, b) for segment in reversed(self.segments)]
        jumps = [(right, at, left) for left, at, right in reversed(self.jumps)]
        return BVPath(breakpoints, segments, jumps, self.control_set)

    @property
    def jump_indices(self) -> base.List[int]:
        """Breakpoint indices where the triple is not constant."""
        return [i for i, (left, at, right) in enumerate(self.jumps)
                if np.linalg.norm(at - left) > 0 or np.linalg.norm(right - at) > 0]

    @property
    def jump_times(self) -> base.ArrayType:
        return self.breakpoints[self.jump_indices]

    def is_absolutely_continuous(self) -> bool:
        """True when the jump set is empty."""
        return len(self.jump_indices) == 0

    @property
    def knots(self) -> base.ArrayType:
        """Breakpoints together with every table knot."""
        return np.unique(np.concatenate([self.breakpoints] + [s.knots for s in self.segments]))

    def __repr__(self) -> str:
        return (f"BVPath([{self.a}, {self.b}], dim={self.dim}, breakpoints={len(self.breakpoints)}, "
                f"jumps={len(self.jump_indices)})")


class SampledControl(object):
    """Measurable control v: [a, b] -> V, piecewise constant on a uniform grid and left-continuous."""

    def __init__(self, a: float, b: float, values: base.VectorType, lower: base.VectorType = None,
                 upper: base.VectorType = None) -> None:
        """
        Initialise the sample table.

        :a (float): Start of the interval.
        :b (float): End of the interval.
        :values (base.VectorType): One row per cell, shape (cells, l).
        :lower (base.VectorType, default = None): Lower bounds of the box V, the smallest values when missing.
        :upper (base.VectorType, default = None): Upper bounds of the box V, the largest values when missing.
        """
        if not a < b:
            raise ConfigurationError(f"Control interval must satisfy a < b, got [{a}, {b}]")
        self.a, self.b = float(a), float(b)
        self.values = np.atleast_2d(np.asarray(values, dtype = float))
        self.cells, self.dim = self.values.shape
        if self.cells < 1:
            raise ConfigurationError("A sampled control needs at least one cell")
        self.box = None
        if self.dim:
            lower = self.values.min(axis = 0) if lower is None else lower
            upper = self.values.max(axis = 0) if upper is None else upper
            self.box = ControlSet(self.dim, lower, upper)
        if self.box is not None and not self.box.contains_all(self.values):
            raise DomainError("Sampled control leaves the box V")
        self.h = (self.b - self.a) / self.cells

    @classmethod
    def empty(cls, a: float, b: float) -> 'SampledControl':
        """The l = 0 control."""
        return cls(a, b, np.zeros((1, 0)))

    @classmethod
    def constant(cls, a: float, b: float, value: base.VectorType, **kwargs) -> 'SampledControl':
        return cls(a, b, np.atleast_2d(np.asarray(value, dtype = float)), **kwargs)

    @classmethod
    def from_expression(cls, exprs: base.List[ex.Expr], a: float, b: float, cells: int = 1024, k: float = 0.0,
                        lower: base.VectorType = None, upper: base.VectorType = None) -> 'SampledControl':
        """
        Sample expressions in t at the left end of each cell.

        :exprs (base.List[ex.Expr]): One tree per component of v.
        :a (float): Start of the interval.
        :b (float): End of the interval.
        :cells (int, default = 1024): Number of cells.
        :k (float, default = 0.0): Value of the family parameter.
        :returns (SampledControl): The table.
        """
        times = a + (b - a) * np.arange(cells) / cells
        comps = ex.compile_exprs(exprs, 'numpy')(times, k = k)
        values = np.column_stack([np.broadcast_to(np.asarray(c, dtype = float), times.shape) for c in comps])
        return cls(a, b, values, lower, upper)

    def value(self, t: float) -> base.ArrayType:
        """v(t); cell j covers (a + j h, a + (j + 1) h] and cell 0 also covers a."""
        if self.dim == 0:
            return self.values[0]
        j = int(np.clip(np.ceil((t - self.a) / self.h) - 1, 0, self.cells - 1))
        return self.values[j]

    def __repr__(self) -> str:
        return f"SampledControl([{self.a}, {self.b}], cells={self.cells}, dim={self.dim})"
