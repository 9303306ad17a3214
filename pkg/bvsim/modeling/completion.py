"""
Graph completions of BV inputs.

A completion is a Lipschitz curve s -> (phi0(s), phi(s)) on [0, 1] whose image contains the graph of u.
Jumps are bridged by arcs, and the curve is parameterised by normalised arclength. A clock sigma maps
real time back to the pseudo-time s with (phi0, phi)(sigma(t)) = (t, u(t)).
"""
import hashlib
import numpy as np
from tqdm import tqdm
from dataclasses import dataclass
from bvsim import base
from bvsim.base import ConfigurationError, DomainError
from bvsim.data.bvpath import BVPath, ControlSet


class Bridge(object):
    """Polyline in U joining the two sides of a jump, evaluated by arclength fraction."""

    def __init__(self, points: base.VectorType) -> None:
        """
        Initialise the bridge.

        :points (base.VectorType): Vertices in order, shape (p, m). Repeated consecutive vertices are dropped.
        """
        points = np.atleast_2d(np.asarray(points, dtype = float))
        keep = [0] + [j for j in range(1, len(points)) if not np.array_equal(points[j], points[j - 1])]
        self.points = points[keep]
        self.edges = np.linalg.norm(np.diff(self.points, axis = 0), axis = 1)
        self.cumulative = np.concatenate([[0.0], np.cumsum(self.edges)])
        self.length = float(self.cumulative[-1])

    @classmethod
    def straight(cls, start: base.VectorType, end: base.VectorType) -> 'Bridge':
        return cls([start, end])

    @property
    def start(self) -> base.ArrayType:
        return self.points[0]

    @property
    def end(self) -> base.ArrayType:
        return self.points[-1]

    @property
    def displacement(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    @property
    def variation(self) -> float:
        return self.length

    @property
    def is_loop(self) -> bool:
        return self.displacement == 0 and self.length > 0

    def evaluate(self, theta: float) -> base.ArrayType:
        """
        Point at arclength fraction theta in [0, 1].

        :theta (float): Fraction of the length travelled.
        :returns (base.ArrayType): The point.
        """
        if self.length == 0:
            return self.start.copy()
        target = np.clip(theta, 0.0, 1.0) * self.length
        return np.array([np.interp(target, self.cumulative, self.points[:, j]) for j in range(self.points.shape[1])])

    def satisfies_whitney(self, whitney: float, tol: float = 1e-12) -> bool:
        """Var <= M |end - start|."""
        return self.length <= whitney * self.displacement + tol

    def subdivided(self, pieces: int) -> base.ArrayType:
        """Vertices with each edge split uniformly, about `pieces` parts over the whole bridge."""
        if self.length == 0:
            return self.points[:1]
        out = [self.points[:1]]
        for j, edge in enumerate(self.edges):
            count = max(1, int(np.ceil(pieces * edge / self.length)))
            theta = np.linspace(0.0, 1.0, count + 1)[1:, None]
            out.append(self.points[j] + theta * (self.points[j + 1] - self.points[j]))
        return np.vstack(out)

    def __repr__(self) -> str:
        return f"Bridge({self.points.tolist()}, length={self.length:.6g})"


def bridge(u_minus: base.VectorType, u_at: base.VectorType, u_plus: base.VectorType,
           control_set: ControlSet) -> base.Tuple[Bridge, Bridge]:
    """
    Default bridging arcs of a jump: straight chords, valid for the built-in convex control sets.

    :u_minus (base.VectorType): u(t-).
    :u_at (base.VectorType): u(t).
    :u_plus (base.VectorType): u(t+).
    :control_set (ControlSet): The set U.
    :returns (tuple): (arc_minus joining u(t-) to u(t), arc_plus joining u(t) to u(t+)).
    """
    for name, point in (('u(t-)', u_minus), ('u(t)', u_at), ('u(t+)', u_plus)):
        control_set.check(point, name)
    return Bridge.straight(u_minus, u_at), Bridge.straight(u_at, u_plus)


class Clock(object):
    """Selection sigma: [a, b] -> [0, 1] with (phi0, phi)(sigma(t)) = (t, u(t))."""

    def __init__(self, path: BVPath, table: base.ArrayType, pieces: base.List[tuple], normalizer: float,
                 fingerprint: str = None) -> None:
        """
        Initialise the clock.

        :path (BVPath): The underlying input u.
        :table (base.ArrayType): Rows (t_i, sigma(t_i-), sigma(t_i), sigma(t_i+)) per breakpoint.
        :pieces (base.List[tuple]): Per segment of u the knots and clock values, linear in between.
        :normalizer (float): Denominator of the clock (b - a + Var u, or the arclength of the completion).
        :fingerprint (str, default = None): Grid digest of the completion the clock belongs to.
        """
        self.path = path
        self.table = np.asarray(table, dtype = float)
        self.pieces = pieces
        self.normalizer = float(normalizer)
        self.a, self.b = path.a, path.b
        self.fingerprint = fingerprint

    def _check(self, t: float) -> None:
        if not (self.a <= t <= self.b):
            raise DomainError(f"t={t} lies outside [{self.a}, {self.b}]")

    def _row(self, t: float) -> base.Optional[int]:
        i = int(np.searchsorted(self.table[:, 0], t))
        if i < len(self.table) and self.table[i, 0] == t:
            return i
        return None

    def _continuous(self, t: float) -> float:
        i = int(np.clip(np.searchsorted(self.table[:, 0], t, side = 'right') - 1, 0, len(self.pieces) - 1))
        times, values = self.pieces[i]
        return float(np.interp(t, times, values))

    def __call__(self, t: float) -> float:
        self._check(t)
        i = self._row(t)
        return float(self.table[i, 2]) if i is not None else self._continuous(t)

    def limits(self, t: float) -> base.Tuple[float, float]:
        """(sigma(t-), sigma(t+))."""
        self._check(t)
        i = self._row(t)
        if i is not None:
            return float(self.table[i, 1]), float(self.table[i, 3])
        value = self._continuous(t)
        return value, value

    def sample(self, times: base.VectorType, extend: bool = False) -> base.ArrayType:
        """
        Vectorised sigma.

        :times (base.VectorType): Times in [a, b].
        :extend (bool, default = False): Outside [a, b] use the odd reflections sigma(2a - t) = -sigma(t)
                                         and sigma(2b - t) = 2 - sigma(t).
        :returns (base.ArrayType): Clock values.
        """
        times = np.asarray(times, dtype = float)
        if extend:
            low, high = times < self.a, times > self.b
            out = np.empty_like(times)
            inside = ~(low | high)
            out[inside] = self.sample(times[inside])
            out[low] = -self.sample(2 * self.a - times[low])
            out[high] = 2.0 - self.sample(2 * self.b - times[high])
            return out
        if times.size and (times.min() < self.a or times.max() > self.b):
            raise DomainError(f"Clock sample times leave [{self.a}, {self.b}]")

        breaks = self.table[:, 0]
        ix = np.clip(np.searchsorted(breaks, times, side = 'right') - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(times)
        for i in np.unique(ix):
            mask = ix == i
            out[mask] = np.interp(times[mask], *self.pieces[i])
        on_break = np.searchsorted(breaks, times)
        hit = on_break < len(breaks)
        hit[hit] = breaks[on_break[hit]] == times[hit]
        out[hit] = self.table[on_break[hit], 2]
        return out

    @property
    def jump_table(self) -> base.ArrayType:
        """Rows of the table where sigma jumps."""
        return self.table[(self.table[:, 3] - self.table[:, 1]) > 0]

    def __repr__(self) -> str:
        return f"Clock([{self.a}, {self.b}], normalizer={self.normalizer:.6g}, jumps={len(self.jump_table)})"


def canonical_clock(u: BVPath) -> Clock:
    """
    sigma(t) = (t - a + Var_[a,t](u)) / (b - a + Var_[a,b](u)).

    :u (BVPath): Input of finite variation.
    :returns (Clock): The clock.
    """
    normalizer = (u.b - u.a) + u.total_variation
    prefix = u.prefix_variation
    rows, pieces = [], []
    for i, (t, (left, at, right)) in enumerate(zip(u.breakpoints, u.jumps)):
        value = (t - u.a + prefix[i]) / normalizer
        rows.append((t, value - np.linalg.norm(at - left) / normalizer, value,
                     value + np.linalg.norm(right - at) / normalizer))
        if i < len(u.segments):
            knots, cumulative = u.segments[i].variation_profile()
            offset = prefix[i] + np.linalg.norm(right - at)
            pieces.append((knots, (knots - u.a + offset + cumulative) / normalizer))
    return Clock(u, np.array(rows), pieces, normalizer)


def grid_fingerprint(s_grid: base.ArrayType) -> str:
    """Digest identifying a pseudo-time grid."""
    return hashlib.sha1(np.ascontiguousarray(s_grid, dtype = float).tobytes()).hexdigest()


class SpaceTimeControl(object):
    """Sampled Lipschitz pair (phi0, phi) on a grid of [0, 1], piecewise linear in between."""

    def __init__(self, s_grid: base.VectorType, phi0: base.VectorType, phi: base.VectorType) -> None:
        """
        Initialise the control.

        :s_grid (base.VectorType): Strictly increasing grid with s_grid[0] = 0 and s_grid[-1] = 1.
        :phi0 (base.VectorType): Nondecreasing time component on the grid.
        :phi (base.VectorType): Control component on the grid, shape (len(s_grid), m).
        """
        self.s_grid = np.asarray(s_grid, dtype = float)
        self.phi0 = np.asarray(phi0, dtype = float)
        self.phi = np.asarray(phi, dtype = float).reshape(len(self.s_grid), -1)
        if np.any(np.diff(self.s_grid) <= 0):
            raise ConfigurationError("Pseudo-time grid must be strictly increasing")
        if self.s_grid[0] != 0.0 or self.s_grid[-1] != 1.0:
            raise ConfigurationError("Pseudo-time grid must span [0, 1]")
        if np.any(np.diff(self.phi0) < 0):
            raise ConfigurationError("phi0 must be nondecreasing")
        self.a, self.b = float(self.phi0[0]), float(self.phi0[-1])
        self.dim = self.phi.shape[1]
        self.fingerprint = grid_fingerprint(self.s_grid)

        ds = np.diff(self.s_grid)
        self.slope0 = np.diff(self.phi0) / ds
        self.slopes = np.diff(self.phi, axis = 0) / ds[:, None]
        chords = np.sqrt(np.diff(self.phi0) ** 2 + np.sum(np.diff(self.phi, axis = 0) ** 2, axis = 1))
        self.chord_speeds = chords / ds
        self.variation = float(chords.sum())
        self.lipschitz = float(self.chord_speeds.max())

    def interval(self, s: float) -> int:
        """Index j of the grid interval [s_j, s_{j+1}] holding s."""
        return int(np.clip(np.searchsorted(self.s_grid, s, side = 'right') - 1, 0, len(self.s_grid) - 2))

    def evaluate(self, s: float) -> base.Tuple[float, base.ArrayType]:
        """
        Linear interpolation of (phi0, phi) at s.

        :s (float): Pseudo-time in [0, 1].
        :returns (tuple): (phi0(s), phi(s)).
        """
        if not (0.0 <= s <= 1.0):
            raise DomainError(f"s={s} lies outside [0, 1]")
        t = float(np.interp(s, self.s_grid, self.phi0))
        return t, np.array([np.interp(s, self.s_grid, self.phi[:, j]) for j in range(self.dim)])

    def __repr__(self) -> str:
        return f"SpaceTimeControl(points={len(self.s_grid)}, L={self.lipschitz:.6g}, Var={self.variation:.6g})"


@dataclass(frozen = True)
class Piece:
    """A stretch of the completion grid: a continuous segment of u or one bridging arc."""

    kind: str  # 'segment', 'minus' or 'plus'
    index: int  # segment index or breakpoint index
    start: int  # grid index of the first point
    stop: int  # grid index of the last point


class GraphCompletion(SpaceTimeControl):
    """Graph completion of a BV input, parameterised by normalised arclength."""

    def __init__(self, s_grid: base.VectorType, phi0: base.VectorType, phi: base.VectorType, path: BVPath,
                 control_set: ControlSet, pieces: base.List[Piece], bridges: base.Dict[int, tuple]) -> None:
        """
        Initialise the completion. Use `build_completion` rather than calling this directly.

        :path (BVPath): The completed input.
        :control_set (ControlSet): The set U.
        :pieces (base.List[Piece]): Grid stretches in order of s.
        :bridges (base.Dict[int, tuple]): Per breakpoint index the pair (arc_minus, arc_plus).
        """
        super(GraphCompletion, self).__init__(s_grid, phi0, phi)
        self.path = path
        self.control_set = control_set
        self.pieces = list(pieces)
        self.bridges = bridges
        self.lipschitz_L = self.lipschitz
        self._piece_starts = np.array([self.s_grid[p.start] for p in self.pieces])
        self.jump_arcs = {}
        for p in self.pieces:
            if p.kind != 'segment':
                self.jump_arcs.setdefault(p.index, {})[p.kind] = (float(self.s_grid[p.start]),
                                                                 float(self.s_grid[p.stop]))
        self.clock = self._build_clock()

    def _build_clock(self) -> Clock:
        rows = []
        for i, t in enumerate(self.path.breakpoints):
            arcs = self.jump_arcs[i]
            minus, plus = arcs.get('minus'), arcs.get('plus')
            start = minus[0] if minus else plus[0]
            middle = minus[1] if minus else plus[0]
            end = plus[1] if plus else minus[1]
            rows.append((t, start, middle, end))
        pieces = [(self.phi0[p.start:p.stop + 1], self.s_grid[p.start:p.stop + 1])
                  for p in self.pieces if p.kind == 'segment']
        return Clock(self.path, np.array(rows), pieces, self.variation, self.fingerprint)

    def evaluate(self, s: float) -> base.Tuple[float, base.ArrayType]:
        """
        Exact lift: on continuous stretches phi(s) = u(phi0(s)), on arcs the sampled arc.

        :s (float): Pseudo-time in [0, 1].
        :returns (tuple): (phi0(s), phi(s)).
        """
        t, value = super(GraphCompletion, self).evaluate(s)
        p = self.pieces[int(np.searchsorted(self._piece_starts, s, side = 'right') - 1)]
        if p.kind == 'segment':
            segment = self.path.segments[p.index]
            t = float(np.clip(t, segment.t0, segment.t1))
            return t, segment.value(t)
        return float(self.path.breakpoints[p.index]), value

    def reparameterized(self, h: base.Callable) -> 'GraphCompletion':
        """
        Same curve with the pseudo-time grid mapped through an increasing bijection h of [0, 1].

        :h (base.Callable): Vectorised increasing map with h(0) = 0 and h(1) = 1.
        :returns (GraphCompletion): The reparameterised completion.
        """
        s_grid = np.asarray(h(self.s_grid), dtype = float)
        s_grid[0], s_grid[-1] = 0.0, 1.0
        return GraphCompletion(s_grid, self.phi0, self.phi, self.path, self.control_set, self.pieces, self.bridges)

    def __repr__(self) -> str:
        return (f"GraphCompletion([{self.a}, {self.b}], points={len(self.s_grid)}, L={self.lipschitz_L:.6g}, "
                f"jumps={len(self.path.jump_indices)})")


def _resolve_bridges(u: BVPath, control_set: ControlSet, overrides: base.List[tuple] = None
                     ) -> base.Dict[int, tuple]:
    """Default chords, replaced by user polylines where given."""
    if overrides is not None and len(overrides) != len(u.breakpoints):
        raise ConfigurationError(f"Got {len(overrides)} bridge overrides for {len(u.breakpoints)} breakpoints")
    resolved = {}
    for i, (left, at, right) in enumerate(u.jumps):
        arc_minus, arc_plus = bridge(left, at, right, control_set)
        given = overrides[i] if overrides is not None and overrides[i] is not None else (None, None)
        arcs = []
        for side, default, custom, start, end in (('minus', arc_minus, given[0], left, at),
                                                  ('plus', arc_plus, given[1], at, right)):
            if custom is None:
                arcs.append(default)
                continue
            custom = custom if isinstance(custom, Bridge) else Bridge(custom)
            if not (np.allclose(custom.start, start, atol = 1e-12) and np.allclose(custom.end, end, atol = 1e-12)):
                raise ConfigurationError(f"Bridge {side} at t={u.breakpoints[i]} must join {start.tolist()} "
                                         f"to {end.tolist()}")
            if not control_set.contains_all(custom.points):
                raise DomainError(f"Bridge {side} at t={u.breakpoints[i]} leaves the control set")
            if custom.is_loop:
                tqdm.write(f"Bridge {side} at t={u.breakpoints[i]} is a loop of length {custom.length:.6g}")
            elif not custom.satisfies_whitney(control_set.whitney):
                raise ConfigurationError(f"Bridge {side} at t={u.breakpoints[i]} has length {custom.length:.6g} "
                                         f"> M |jump| = {control_set.whitney * custom.displacement:.6g}")
            arcs.append(custom)
        resolved[i] = tuple(arcs)
    return resolved


def build_completion(u: BVPath, control_set: ControlSet = None, bridges: base.List[tuple] = None,
                     grid: int = base.DEFAULT_GRID) -> GraphCompletion:
    """
    Build the arclength-parameterised graph completion of u.

    :u (BVPath): Input of finite variation.
    :control_set (ControlSet, default = None): The set U, defaults to the path's own.
    :bridges (base.List[tuple], default = None): Per breakpoint None or (arc_minus, arc_plus); None entries
                                                  in a pair fall back to the straight chord.
    :grid (int, default = base.DEFAULT_GRID): Approximate number of grid intervals.
    :returns (GraphCompletion): The completion.
    """
    control_set = control_set if control_set is not None else u.control_set
    arcs = _resolve_bridges(u, control_set, bridges)

    lengths = [(s.t1 - s.t0) + s.total_variation for s in u.segments]
    budget = sum(lengths) + sum(arc.length for pair in arcs.values() for arc in pair)

    points = [np.concatenate([[u.a], u.jumps[0][1]])]
    pieces = []
    # Points closer than this are merged, so that the arclength grid stays strictly increasing.
    merge_tol = 1e-12 * max(1.0, budget)

    def extend(block: base.ArrayType, kind: str, index: int) -> None:
        start = len(points) - 1
        for row in block:
            if np.linalg.norm(row - points[-1]) > merge_tol:
                points.append(row)
        pieces.append(Piece(kind, index, start, len(points) - 1))

    def arc_block(arc: Bridge, t: float) -> base.ArrayType:
        vertices = arc.subdivided(int(np.ceil(grid * arc.length / budget)))
        return np.column_stack([np.full(len(vertices), t), vertices])

    last = len(u.segments)
    for i, t in enumerate(u.breakpoints):
        arc_minus, arc_plus = arcs[i]
        if i > 0:
            extend(arc_block(arc_minus, t), 'minus', i)
        if i < last:
            extend(arc_block(arc_plus, t), 'plus', i)
            segment = u.segments[i]
            count = max(1, int(np.ceil(grid * lengths[i] / budget)))
            times = np.union1d(np.linspace(segment.t0, segment.t1, count + 1), segment.knots)
            times = times[(times >= segment.t0) & (times <= segment.t1)]
            extend(np.column_stack([times, segment.values_at(times)]), 'segment', i)

    points = np.vstack(points)
    chords = np.linalg.norm(np.diff(points, axis = 0), axis = 1)
    arclength = np.concatenate([[0.0], np.cumsum(chords)])
    s_grid = arclength / arclength[-1]
    s_grid[-1] = 1.0
    return GraphCompletion(s_grid, points[:, 0], points[:, 1:], u, control_set, pieces, arcs)


def preimage(gc: GraphCompletion, t: float) -> base.Tuple[float, float]:
    """
    Maximal parameter interval on which phi0 = t.

    :gc (GraphCompletion): The completion.
    :t (float): Time in [a, b].
    :returns (tuple): (s1, s2), degenerate where phi0 is not flat.
    """
    if not (gc.a <= t <= gc.b):
        raise DomainError(f"t={t} lies outside [{gc.a}, {gc.b}]")
    lo = int(np.searchsorted(gc.phi0, t, side = 'left'))
    hi = int(np.searchsorted(gc.phi0, t, side = 'right')) - 1
    if lo <= hi:
        return float(gc.s_grid[lo]), float(gc.s_grid[hi])
    s = gc.clock(t)
    return s, s


def variation_budget(gc: GraphCompletion) -> base.Tuple[float, float]:
    """
    Var(phi0, phi) against the bound (b - a) + (2M - 1) Var(u).

    :gc (GraphCompletion): The completion.
    :returns (tuple): (variation, bound).
    """
    bound = (gc.b - gc.a) + (2 * gc.control_set.whitney - 1) * gc.path.total_variation
    return gc.variation, bound
