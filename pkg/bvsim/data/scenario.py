"""
Scenario files.

A scenario is a line-oriented text file of "[section]" headers and "key = value" entries. '#' starts a comment.
Numbers are comma-separated, rows of a matrix are separated by ';' and expressions are double-quoted strings.

    [dynamics]   n, m, l, guard, f = "e1", ..., "en", g1 ... gm (n expressions each)
    [input]      breakpoints = t0, ..., tN
                 segment.i = "e1", ..., "em"        expressions in t (and k) on (t_{i-1}, t_i)
                 table.i = t: v1, ..., vm; t: ...   piecewise-linear table on the same interval
                 jump.i = at  or  left | at | right  values at breakpoint i (1-based)
                 control_set = box | hull, lower, upper, vertices = row; row; ..., whitney
                 a box without bounds is the smallest box enclosing the input
    [v]          v = "e1", ..., "el" with cells, or values = row; row; ...; lower, upper
    [initial]    x = x1, ..., xn
    [solver]     step, grid, support, jobs
    [sweep]      ks = k1, k2, ...; taus = tau1, tau2, ...
    [bridges]    minus.i / plus.i = row; row; ...  polyline overrides at breakpoint i
    [params]     k
    [limit]      u = "e1", ..., "em"; x = "e1", ..., "en" in t, the target pair of a family sweep
    [cost]       phi = "e"; times = t1, t2, ...
"""
import os
import re
import numpy as np
from dataclasses import dataclass, field
from bvsim import base
from bvsim.base import BVSimError, ScenarioError
from bvsim.data.bvpath import BVPath, ControlSet, ExprSegment, SampledControl, TableSegment
from bvsim.modeling import expr as ex
from bvsim.modeling.dynamics import Dynamics, VectorField
from bvsim.modeling.integrator import Trajectory, evaluate_cost_example
from bvsim.utils.metrics import StatePair

_SECTION = re.compile(r'^\[(\w+)\]$')
_ENTRY = re.compile(r'^([A-Za-z_][\w.]*)\s*=\s*(.*)$')
_QUOTED = re.compile(r'\s*"([^"]*)"\s*(?:,|$)')

_KEYS = {
    'dynamics': re.compile(r'^(n|m|l|guard|f|g\d+)$'),
    'input': re.compile(r'^(breakpoints|segment\.\d+|table\.\d+|jump\.\d+|control_set|lower|upper|vertices|whitney)$'),
    'v': re.compile(r'^(v|values|cells|lower|upper)$'),
    'initial': re.compile(r'^x$'),
    'solver': re.compile(r'^(step|grid|support|jobs)$'),
    'sweep': re.compile(r'^(ks|taus)$'),
    'bridges': re.compile(r'^(minus|plus)\.\d+$'),
    'params': re.compile(r'^k$'),
    'limit': re.compile(r'^(u|x)$'),
    'cost': re.compile(r'^(phi|times)$'),
}


class _Block(object):
    """Entries of one section, with the line each came from."""

    def __init__(self, name: str, line: int) -> None:
        self.name = name
        self.line = line
        self.entries = {}

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def line_of(self, key: str) -> int:
        return self.entries[key][1] if key in self.entries else self.line

    def error(self, key: str, message: str) -> ScenarioError:
        return ScenarioError(message, self.line_of(key), f"{self.name}.{key}")

    def raw(self, key: str, default: str = None) -> str:
        if key in self.entries:
            return self.entries[key][0]
        if default is None:
            raise self.error(key, "required entry is missing")
        return default

    def number(self, key: str, default: float = None, kind: type = float) -> float:
        if key not in self.entries and default is not None:
            return default
        value = self.raw(key)
        try:
            number = float(value)
        except ValueError:
            raise self.error(key, f"expected a number, got '{value}'")
        if kind is int:
            if number != int(number):
                raise self.error(key, f"expected an integer, got '{value}'")
            return int(number)
        return number

    def numbers(self, key: str, default: base.List[float] = None) -> base.List[float]:
        if key not in self.entries and default is not None:
            return list(default)
        value = self.raw(key)
        try:
            return [float(item) for item in value.split(',') if item.strip()]
        except ValueError:
            raise self.error(key, f"expected comma-separated numbers, got '{value}'")

    def rows(self, key: str) -> base.List[base.List[float]]:
        value = self.raw(key)
        try:
            return [[float(item) for item in row.split(',')] for row in value.split(';') if row.strip()]
        except ValueError:
            raise self.error(key, f"expected rows of comma-separated numbers separated by ';', got '{value}'")

    def expressions(self, key: str, count: int = None) -> base.List[str]:
        value = self.raw(key).strip()
        items, pos = [], 0
        while pos < len(value):
            match = _QUOTED.match(value, pos)
            if match is None or match.end() == pos:
                raise self.error(key, "expected a comma-separated list of double-quoted expressions")
            items.append(match.group(1))
            pos = match.end()
        if count is not None and len(items) != count:
            raise self.error(key, f"expected {count} expressions, got {len(items)}")
        return items


def _read_blocks(lines: base.List[str]) -> base.Dict[str, _Block]:
    blocks, current = {}, None
    for number, text in enumerate(lines, start = 1):
        text = text.split('#', 1)[0].strip()
        if not text:
            continue
        header = _SECTION.match(text)
        if header:
            name = header.group(1)
            if name not in _KEYS:
                raise ScenarioError(f"unknown section '[{name}]'", number, name)
            if name in blocks:
                raise ScenarioError(f"section '[{name}]' appears twice", number, name)
            current = blocks[name] = _Block(name, number)
            continue
        entry = _ENTRY.match(text)
        if entry is None:
            raise ScenarioError(f"expected '[section]' or 'key = value', got '{text}'", number, '-')
        key, value = entry.group(1), entry.group(2).strip()
        if current is None:
            raise ScenarioError("entry before the first section", number, key)
        if not _KEYS[current.name].match(key):
            raise ScenarioError(f"unknown key in section '[{current.name}]'", number, f"{current.name}.{key}")
        if key in current.entries:
            raise ScenarioError("duplicate key", number, f"{current.name}.{key}")
        current.entries[key] = (value, number)
    return blocks


@dataclass
class Scenario:
    """A validated run description: dynamics, input, controls, solver and sweep settings."""

    name: str
    dynamics: Dynamics
    x0: base.ArrayType
    v: SampledControl
    control_set: base.Optional[ControlSet]
    path: base.Optional[BVPath] = None
    family: base.Optional[base.Callable] = None
    bridges: base.Optional[base.List[tuple]] = None
    step: float = base.DEFAULT_STEP
    grid: int = base.DEFAULT_GRID
    support: base.Optional[float] = None
    jobs: int = 1
    ks: base.List[int] = field(default_factory = lambda: [8, 32, 128])
    taus: base.List[float] = field(default_factory = list)
    k: base.Optional[float] = None
    limit: base.Optional[base.Tuple[base.List[ex.Expr], base.List[ex.Expr]]] = None
    cost_phi: base.Optional[ex.Expr] = None
    cost_times: base.List[float] = field(default_factory = list)

    @property
    def a(self) -> float:
        return self.v.a

    @property
    def b(self) -> float:
        return self.v.b

    @property
    def is_family(self) -> bool:
        """True when the input expressions depend on the family parameter k."""
        return self.family is not None

    def build(self, k: float) -> base.Tuple[BVPath, Dynamics]:
        """Input and dynamics at parameter k."""
        if self.family is None:
            return self.path, self.dynamics
        return self.family(k), self.dynamics.with_k(k)

    def limit_pair(self) -> StatePair:
        """The target (u, x) of a family sweep, from the [limit] block."""
        if self.limit is None:
            raise ScenarioError("the scenario has no [limit] block", 0, 'limit')
        u_exprs, x_exprs = self.limit
        u_fn, x_fn = ex.compile_exprs(u_exprs, 'numpy'), ex.compile_exprs(x_exprs, 'numpy')

        def columns(fn: base.Callable) -> base.Callable:
            def sampler(times: base.VectorType) -> base.ArrayType:
                times = np.atleast_1d(np.asarray(times, dtype = float))
                return np.column_stack([np.broadcast_to(np.asarray(c, dtype = float), times.shape)
                                        for c in fn(times, k = self.k or 0.0)])
            return sampler

        return StatePair(self.a, self.b, columns(u_fn), columns(x_fn))

    def cost(self, x: Trajectory) -> float:
        """Cost of a trajectory from the [cost] block."""
        if self.cost_phi is None:
            raise ScenarioError("the scenario has no [cost] block", 0, 'cost')
        phi = ex.compile_exprs([self.cost_phi], 'math')
        return evaluate_cost_example(x, lambda t: phi(t, k = self.k or 0.0)[0], self.cost_times)


def _wrap(block: _Block, key: str, func: base.Callable, *args, **kwargs):
    """Run a constructor and attach the entry's line and field to any failure."""
    try:
        return func(*args, **kwargs)
    except ScenarioError:
        raise
    except BVSimError as e:
        raise block.error(key, str(e))


def _dynamics(block: _Block, k: float) -> Dynamics:
    n, m, l = block.number('n', kind = int), block.number('m', kind = int), block.number('l', 0, kind = int)
    dims = {'x': n, 'u': m, 'v': l}
    f = [_wrap(block, 'f', ex.parse, s, dims) for s in block.expressions('f', n)]
    g = []
    for alpha in range(1, m + 1):
        key = f'g{alpha}'
        column = [_wrap(block, key, ex.parse, s, dims) for s in block.expressions(key, n)]
        extra = sorted({name for e in column for name in ex.variables(e) if name[0] != 'x'})
        if extra:
            raise block.error(key, f"input fields may only depend on x, found {extra}")
        g.append(column)
    for key in block.entries:
        if key.startswith('g') and key != 'guard' and not 1 <= int(key[1:]) <= m:
            raise block.error(key, f"there are only m={m} input fields")

    fields = [VectorField(column, f'g{alpha + 1}') for alpha, column in enumerate(g)]
    return _wrap(block, 'n', Dynamics, n, m, l, VectorField(f, 'f'), fields,
                 block.number('guard', base.DEFAULT_GUARD), k if k is not None else 0.0)


def _control_set(block: _Block, m: int) -> base.Optional[ControlSet]:
    kind = block.raw('control_set', 'box')
    whitney = block.number('whitney', 1.0)
    if kind == 'hull':
        return _wrap(block, 'vertices', ControlSet, m, vertices = block.rows('vertices'), whitney = whitney)
    if kind != 'box':
        raise block.error('control_set', f"expected 'box' or 'hull', got '{kind}'")
    lower = block.numbers('lower') if 'lower' in block else None
    upper = block.numbers('upper') if 'upper' in block else None
    if lower is None and upper is None:
        if 'whitney' in block:
            raise block.error('whitney', "a box with a Whitney constant needs lower and upper")
        return None
    if lower is None or upper is None:
        raise block.error('lower' if upper is None else 'upper', "a box needs both lower and upper")
    for key, bounds in (('lower', lower), ('upper', upper)):
        if len(bounds) != m:
            raise block.error(key, f"expected {m} bounds, got {len(bounds)}")
        if not np.all(np.isfinite(bounds)):
            raise block.error(key, "bounds must be finite")
    return _wrap(block, 'whitney', ControlSet, m, lower, upper, whitney = whitney)


def _input(block: _Block, m: int, control_set: ControlSet) -> base.Tuple[base.Callable, bool, base.List[float]]:
    """A constructor k -> BVPath, whether any segment depends on k, and the breakpoints."""
    breakpoints = block.numbers('breakpoints')
    if len(breakpoints) < 2 or np.any(np.diff(breakpoints) <= 0):
        raise block.error('breakpoints', "breakpoints must be strictly increasing with at least two entries")
    count = len(breakpoints) - 1
    for key in block.entries:
        if '.' in key:
            index = int(key.split('.')[1])
            limit = count + 1 if key.startswith('jump') else count
            if not 1 <= index <= limit:
                raise block.error(key, f"index {index} is out of range 1..{limit}")

    specs, uses_k = [], False
    for i in range(1, count + 1):
        t0, t1 = breakpoints[i - 1], breakpoints[i]
        seg_key, table_key = f'segment.{i}', f'table.{i}'
        if (seg_key in block) == (table_key in block):
            raise block.error(seg_key, f"interval {i} needs exactly one of '{seg_key}' and '{table_key}'")
        if seg_key in block:
            exprs = [_wrap(block, seg_key, ex.parse, s, {'x': 0, 'u': 0, 'v': 0})
                     for s in block.expressions(seg_key, m)]
            uses_k = uses_k or any('k' in ex.variables(e) for e in exprs)
            specs.append(('expr', seg_key, exprs, t0, t1))
        else:
            rows = []
            for row in block.raw(table_key).split(';'):
                if not row.strip():
                    continue
                if ':' not in row:
                    raise block.error(table_key, f"table rows read 't: v1, ..., vm', got '{row.strip()}'")
                time, values = row.split(':', 1)
                try:
                    rows.append([float(time)] + [float(v) for v in values.split(',')])
                except ValueError:
                    raise block.error(table_key, f"non-numeric table row '{row.strip()}'")
            table = np.array(rows, dtype = float) if rows else np.zeros((0, m + 1))
            if table.shape[1] != m + 1:
                raise block.error(table_key, f"table rows need one time and {m} values")
            if len(table) < 2 or table[0, 0] != t0 or table[-1, 0] != t1:
                raise block.error(table_key, f"table must start at t={t0} and end at t={t1}")
            specs.append(('table', table_key, table, t0, t1))

    jumps = {}
    for i in range(1, count + 2):
        key = f'jump.{i}'
        if key not in block:
            continue
        parts = block.raw(key).split('|')
        if len(parts) not in (1, 3):
            raise block.error(key, "expected 'at' or 'left | at | right'")
        try:
            values = [np.array([float(v) for v in part.split(',')]) for part in parts]
        except ValueError:
            raise block.error(key, f"non-numeric jump values '{block.raw(key)}'")
        if any(len(v) != m for v in values):
            raise block.error(key, f"jump values need {m} components")
        jumps[i - 1] = (key, values)

    def build(k: float) -> BVPath:
        segments = []
        for kind, key, data, t0, t1 in specs:
            if kind == 'expr':
                segments.append(_wrap(block, key, ExprSegment, data, t0, t1, k if k is not None else 0.0))
            else:
                segments.append(_wrap(block, key, TableSegment, data[:, 0], data[:, 1:]))
        triples = []
        for i in range(count + 1):
            left = segments[i - 1].value(breakpoints[i]) if i > 0 else segments[0].value(breakpoints[0])
            right = segments[i].value(breakpoints[i]) if i < count else segments[-1].value(breakpoints[-1])
            at = right if i < count else left
            if i in jumps:
                values = jumps[i][1]
                if len(values) == 3:
                    left, at, right = values
                else:
                    at = values[0]
            triples.append((left, at, right))
        key = next((jumps[i][0] for i in sorted(jumps)), 'breakpoints')
        return _wrap(block, key, BVPath, breakpoints, segments, triples, control_set)

    return build, uses_k, breakpoints


def _sampled_control(block: base.Optional[_Block], l: int, a: float, b: float, k: float) -> SampledControl:
    if l == 0:
        if block is not None and ('v' in block or 'values' in block):
            raise block.error('v', "the dynamics declare l=0, there is no ordinary control")
        return SampledControl.empty(a, b)
    if block is None:
        raise ScenarioError(f"the dynamics declare l={l} but the [v] section is missing", 0, 'v')
    lower = block.numbers('lower') if 'lower' in block else None
    upper = block.numbers('upper') if 'upper' in block else None
    if 'values' in block:
        values = block.rows('values')
        if any(len(row) != l for row in values):
            raise block.error('values', f"rows need {l} components")
        return _wrap(block, 'values', SampledControl, a, b, values, lower, upper)
    exprs = [_wrap(block, 'v', ex.parse, s, {'x': 0, 'u': 0, 'v': 0}) for s in block.expressions('v', l)]
    cells = block.number('cells', 1024, kind = int)
    return _wrap(block, 'v', SampledControl.from_expression, exprs, a, b, cells, k if k is not None else 0.0,
                 lower, upper)


def _bridges(block: base.Optional[_Block], path: BVPath) -> base.Optional[base.List[tuple]]:
    if block is None or not block.entries:
        return None
    overrides = [[None, None] for _ in path.breakpoints]
    for key in block.entries:
        side, index = key.split('.')
        i = int(index) - 1
        if not 0 <= i < len(path.breakpoints):
            raise block.error(key, f"breakpoint index {i + 1} is out of range 1..{len(path.breakpoints)}")
        rows = block.rows(key)
        if any(len(row) != path.dim for row in rows):
            raise block.error(key, f"bridge vertices need {path.dim} components")
        overrides[i][0 if side == 'minus' else 1] = rows
    return [tuple(pair) for pair in overrides]


def parse_scenario(text: str, name: str = 'scenario') -> Scenario:
    """
    Parse and validate a scenario.

    :text (str): Scenario source.
    :name (str, default = 'scenario'): Name used in reports.
    :returns (Scenario): The validated scenario.
    """
    blocks = _read_blocks(text.splitlines())
    last = len(text.splitlines())
    for required in ('dynamics', 'input', 'initial'):
        if required not in blocks:
            raise ScenarioError(f"section '[{required}]' is missing", last, required)

    params = blocks.get('params')
    k = params.number('k') if params is not None and 'k' in params else None
    dynamics = _dynamics(blocks['dynamics'], k)

    block = blocks['input']
    control_set = _control_set(block, dynamics.m)
    build, uses_k, breakpoints = _input(block, dynamics.m, control_set)
    path = build(k) if (not uses_k or k is not None) else None
    a, b = breakpoints[0], breakpoints[-1]

    initial = blocks['initial']
    x0 = np.array(initial.numbers('x'))
    if len(x0) != dynamics.n:
        raise initial.error('x', f"initial state needs n={dynamics.n} components, got {len(x0)}")

    scenario = Scenario(name, dynamics, x0, _sampled_control(blocks.get('v'), dynamics.l, a, b, k),
                        control_set if path is None else path.control_set,
                        path = path, family = build if uses_k else None, k = k)
    if path is not None:
        scenario.bridges = _bridges(blocks.get('bridges'), path)

    solver = blocks.get('solver')
    if solver is not None:
        scenario.step = solver.number('step', base.DEFAULT_STEP)
        scenario.grid = solver.number('grid', base.DEFAULT_GRID, kind = int)
        scenario.jobs = solver.number('jobs', 1, kind = int)
        if 'support' in solver:
            scenario.support = solver.number('support')
            if not 0 < scenario.support <= b - a:
                raise solver.error('support', f"kernel support must lie in (0, {b - a}]")
        if scenario.step <= 0:
            raise solver.error('step', "step must be positive")
        if scenario.grid < 1:
            raise solver.error('grid', "grid must be positive")

    sweep = blocks.get('sweep')
    scenario.taus = [a, (a + b) / 2, b]
    if sweep is not None:
        scenario.ks = sweep.numbers('ks', scenario.ks)
        scenario.taus = sweep.numbers('taus', scenario.taus)
        if any(not a <= tau <= b for tau in scenario.taus):
            raise sweep.error('taus', f"probe times must lie in [{a}, {b}]")
        if any(k2 <= k1 for k1, k2 in zip(scenario.ks, scenario.ks[1:])) or any(kk <= 0 for kk in scenario.ks):
            raise sweep.error('ks', "ks must be positive and strictly increasing")
    if not scenario.is_family:
        if sweep is not None and any(kk != int(kk) for kk in scenario.ks):
            raise sweep.error('ks', "ks of a fixed input must be integers")
        scenario.ks = [int(kk) for kk in scenario.ks]

    limit = blocks.get('limit')
    if limit is not None:
        dims = {'x': 0, 'u': 0, 'v': 0}
        scenario.limit = ([_wrap(limit, 'u', ex.parse, s, dims) for s in limit.expressions('u', dynamics.m)],
                          [_wrap(limit, 'x', ex.parse, s, dims) for s in limit.expressions('x', dynamics.n)])

    cost = blocks.get('cost')
    if cost is not None:
        if dynamics.n < 6:
            raise cost.error('phi', f"the cost needs at least 6 state components, got n={dynamics.n}")
        scenario.cost_phi = _wrap(cost, 'phi', ex.parse, cost.expressions('phi', 1)[0], {'x': 0, 'u': 0, 'v': 0})
        scenario.cost_times = cost.numbers('times')
        if any(not a <= t <= b for t in scenario.cost_times):
            raise cost.error('times', f"cost times must lie in [{a}, {b}]")
    return scenario


def load_scenario(path: str) -> Scenario:
    """
    Read a scenario file, or build a built-in scenario by name.

    :path (str): File path or one of the built-in names (see bvsim.data.loaders.BUILTINS).
    :returns (Scenario): The validated scenario.
    """
    from bvsim.data import loaders

    if not os.path.exists(path) and path in loaders.BUILTINS:
        return loaders.BUILTINS[path]()
    if not os.path.isfile(path):
        raise ScenarioError(f"no scenario file or built-in scenario named '{path}'", 0, 'scenario')
    with open(path, 'r', encoding = 'utf-8') as inf:
        return parse_scenario(inf.read(), os.path.splitext(os.path.basename(path))[0])
