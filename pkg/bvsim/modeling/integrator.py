import numpy as np
from tqdm import tqdm
from bvsim import base
from bvsim.base import BlowUpError, NumericError, PreconditionError, UsageError
from bvsim.data.bvpath import BVPath, SampledControl
from bvsim.modeling.dynamics import Dynamics
from bvsim.modeling.completion import Clock, GraphCompletion, SpaceTimeControl, preimage


def _check_state(y: base.ArrayType, guard: float, where: float) -> None:
    if not np.all(np.isfinite(y)):
        raise NumericError(f"Non-finite state at {where}")
    if np.linalg.norm(y) > guard:
        raise BlowUpError(f"|x| = {np.linalg.norm(y):.6g} exceeds the guard {guard:.6g} at {where}")


def _rk4_step(rhs: base.Callable, s: float, y: base.ArrayType, h: float) -> base.ArrayType:
    k1 = rhs(s, y)
    k2 = rhs(s + h / 2, y + h / 2 * k1)
    k3 = rhs(s + h / 2, y + h / 2 * k2)
    k4 = rhs(s + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


class SpaceTimePath(object):
    """Solution (y0, y) of the space-time system sampled on the completion grid."""

    def __init__(self, s_grid: base.ArrayType, y0: base.ArrayType, y: base.ArrayType, fingerprint: str,
                 step: float, steps: int) -> None:
        """
        Initialise the path.

        :s_grid (base.ArrayType): Grid of the space-time control.
        :y0 (base.ArrayType): Time component on the grid.
        :y (base.ArrayType): State on the grid, shape (len(s_grid), n).
        :fingerprint (str): Digest of the grid, checked when composing with a clock.
        :step (float): Requested RK4 step.
        :steps (int): Number of RK4 steps taken.
        """
        self.s_grid, self.y0, self.y = s_grid, y0, y
        self.fingerprint = fingerprint
        self.step, self.steps = step, steps
        self.n = y.shape[1]

    def evaluate(self, s: float) -> base.ArrayType:
        """Piecewise-linear state at pseudo-time s."""
        return np.array([np.interp(s, self.s_grid, self.y[:, j]) for j in range(self.n)])

    __call__ = evaluate

    def evaluate_many(self, s: base.VectorType) -> base.ArrayType:
        s = np.asarray(s, dtype = float)
        return np.column_stack([np.interp(s, self.s_grid, self.y[:, j]) for j in range(self.n)])

    @property
    def final(self) -> base.ArrayType:
        return self.y[-1].copy()

    def __repr__(self) -> str:
        return f"SpaceTimePath(points={len(self.s_grid)}, n={self.n}, steps={self.steps}, step={self.step})"


def integrate_spacetime(control: SpaceTimeControl, dyn: Dynamics, v: SampledControl, x0: base.VectorType,
                        step: float = base.DEFAULT_STEP) -> SpaceTimePath:
    """
    Fixed-step RK4 for y' = f(y0, y, phi, psi) phi0' + sum_alpha g_alpha(y) phi_alpha' on [0, 1].

    Steps never straddle a grid knot, so the chord slopes phi0', phi' are constant within each step.

    :control (SpaceTimeControl): The pair (phi0, phi), e.g. a GraphCompletion.
    :dyn (Dynamics): The system.
    :v (SampledControl): Ordinary control, composed as psi = v o phi0.
    :x0 (base.VectorType): Initial state.
    :step (float, default = base.DEFAULT_STEP): Largest RK4 step.
    :returns (SpaceTimePath): The solution on the grid.
    """
    x0 = np.asarray(x0, dtype = float).reshape(dyn.n)
    _check_state(x0, dyn.guard, 's=0')
    s_grid = control.s_grid
    y = np.empty((len(s_grid), dyn.n))
    y0 = np.empty(len(s_grid))
    y[0], y0[0] = x0, control.phi0[0]
    state = np.concatenate([[control.phi0[0]], x0])
    steps = 0

    for j in range(len(s_grid) - 1):
        s_start, ds = s_grid[j], s_grid[j + 1] - s_grid[j]
        d0, dphi = control.slope0[j], control.slopes[j]
        t_start, u_start = control.phi0[j], control.phi[j]
        moving = bool(np.any(dphi != 0))

        def rhs(s: float, z: base.ArrayType) -> base.ArrayType:
            out = np.zeros_like(z)
            out[0] = d0
            x = z[1:]
            if d0 != 0:
                t = t_start + d0 * (s - s_start)
                out[1:] += d0 * dyn.drift(t, x, u_start + dphi * (s - s_start), v.value(t))
            if moving:
                out[1:] += dyn.input_matrix(x) @ dphi
            return out

        nsub = max(1, int(np.ceil(ds / step - 1e-9)))
        h = ds / nsub
        for i in range(nsub):
            state = _rk4_step(rhs, s_start + i * h, state, h)
        steps += nsub
        _check_state(state[1:], dyn.guard, f"s={s_grid[j + 1]:.6g}")
        y0[j + 1], y[j + 1] = state[0], state[1:]

    return SpaceTimePath(s_grid, y0, y, control.fingerprint, step, steps)


class Trajectory(object):
    """State trajectory t -> x(t) on [a, b] with one-sided limits at the jump times."""

    def __init__(self, a: float, b: float, evaluator: base.Callable, n: int,
                 jumps: base.Dict[float, base.Tuple[base.ArrayType, base.ArrayType]] = None,
                 envelope: base.Callable = None, sampler: base.Callable = None) -> None:
        """
        Initialise the trajectory.

        :a (float): Start time.
        :b (float): End time.
        :evaluator (base.Callable): t -> x(t).
        :n (int): State dimension.
        :jumps (base.Dict[float, tuple], default = None): Jump time -> (x(t-), x(t+)).
        :envelope (base.Callable, default = None): t -> (y(s1), y(s2)) over the pre-image of t.
        :sampler (base.Callable, default = None): Vectorised evaluator, times -> array of shape (len, n).
        """
        self.a, self.b, self.n = a, b, n
        self.evaluator = evaluator
        self.jumps = jumps or {}
        self._envelope = envelope
        self._sampler = sampler

    def __call__(self, t: float) -> base.ArrayType:
        return self.evaluator(t)

    def sample(self, times: base.VectorType) -> base.ArrayType:
        """x at each time, shape (len(times), n)."""
        if self._sampler is not None:
            return self._sampler(np.asarray(times, dtype = float))
        return np.array([self.evaluator(t) for t in np.asarray(times, dtype = float)]).reshape(-1, self.n)

    def limits(self, t: float) -> base.Tuple[base.ArrayType, base.ArrayType]:
        """(x(t-), x(t+))."""
        if t in self.jumps:
            return self.jumps[t]
        value = self.evaluator(t)
        return value, value

    def envelope(self, t: float) -> base.Tuple[base.ArrayType, base.ArrayType]:
        """Set-valued solution at t: the states at both ends of the pre-image of t."""
        if self._envelope is None:
            value = self.evaluator(t)
            return value, value
        return self._envelope(t)

    @property
    def jump_times(self) -> base.List[float]:
        return sorted(self.jumps)

    def __repr__(self) -> str:
        return f"Trajectory([{self.a}, {self.b}], n={self.n}, jumps={len(self.jumps)})"


def gc_solution(y: SpaceTimePath, clock: Clock, gc: GraphCompletion = None) -> Trajectory:
    """
    Graph-completion solution x(t) = y(sigma(t)).

    :y (SpaceTimePath): Space-time solution.
    :clock (Clock): Clock of the completion y was integrated on.
    :gc (GraphCompletion, default = None): The completion, enabling the set-valued envelope.
    :returns (Trajectory): The trajectory.
    """
    if getattr(clock, 'fingerprint', None) != y.fingerprint:
        raise UsageError("Clock and space-time path come from different completion parameterisations")

    jumps = {}
    for t, minus, _, plus in clock.jump_table:
        jumps[float(t)] = (y.evaluate(minus), y.evaluate(plus))

    envelope = None
    if gc is not None:
        def envelope(t: float) -> base.Tuple[base.ArrayType, base.ArrayType]:
            s1, s2 = preimage(gc, t)
            return y.evaluate(s1), y.evaluate(s2)

    return Trajectory(clock.a, clock.b, lambda t: y.evaluate(clock(t)), y.n, jumps, envelope,
                      lambda times: y.evaluate_many(clock.sample(times)))


def integrate_caratheodory(dyn: Dynamics, u: BVPath, v: SampledControl, x0: base.VectorType,
                           step: float = base.DEFAULT_STEP) -> Trajectory:
    """
    Fixed-step RK4 for x' = f(t, x, u, v) + G(x) u' with an absolutely continuous input.

    :dyn (Dynamics): The system.
    :u (BVPath): Input without jumps.
    :v (SampledControl): Ordinary control.
    :x0 (base.VectorType): Initial state.
    :step (float, default = base.DEFAULT_STEP): Largest RK4 step.
    :returns (Trajectory): Piecewise-linear interpolant of the RK4 states.
    """
    if not u.is_absolutely_continuous():
        raise PreconditionError(f"Input jumps at t = {u.jump_times.tolist()}, the Caratheodory solver needs AC input")
    x = np.asarray(x0, dtype = float).reshape(dyn.n)
    _check_state(x, dyn.guard, f"t={u.a}")
    times, states = [u.a], [x]

    for segment in u.segments:
        knots = segment.knots
        for left, right in zip(knots[:-1], knots[1:]):
            slope = segment.derivative((left + right) / 2) if segment.kind == 'table' else None

            def rhs(t: float, z: base.ArrayType) -> base.ArrayType:
                out = dyn.drift(t, z, segment.value(t), v.value(t))
                return out + dyn.input_matrix(z) @ (slope if slope is not None else segment.derivative(t))

            nsub = max(1, int(np.ceil((right - left) / step - 1e-9)))
            grid = np.linspace(left, right, nsub + 1)
            for t0, t1 in zip(grid[:-1], grid[1:]):
                x = _rk4_step(rhs, t0, x, t1 - t0)
                _check_state(x, dyn.guard, f"t={t1:.6g}")
                times.append(t1)
                states.append(x)

    times, states = np.array(times), np.vstack(states)

    def sampler(ts: base.ArrayType) -> base.ArrayType:
        return np.column_stack([np.interp(ts, times, states[:, j]) for j in range(dyn.n)])

    return Trajectory(u.a, u.b, lambda t: sampler(np.atleast_1d(t))[0], dyn.n, sampler = sampler)


def evaluate_cost_example(x: Trajectory, phi: base.Callable, times: base.VectorType) -> float:
    """
    Cost x_6(b) + max over the given times of (x_4(t) - exp(phi(t)))^2.

    :x (Trajectory): Trajectory with at least six components.
    :phi (base.Callable): Scalar path, a BVPath or any t -> value callable.
    :times (base.VectorType): Finite set of times in [a, b].
    :returns (float): The cost.
    """
    if x.n < 6:
        raise UsageError(f"The cost needs at least 6 state components, got {x.n}")
    sup = max((x(t)[3] - np.exp(float(np.ravel(phi(t))[0]))) ** 2 for t in times)
    return float(x(x.b)[5] + sup)


def ex21_analytic(k: float, t: float, phi: base.Callable = None) -> base.ArrayType:
    """
    Closed-form state of the six-dimensional non-commutative example along its control family u_k.

    :k (float): Family parameter.
    :t (float): Time in [0, 1].
    :phi (base.Callable, default = None): Third control component, identity when None.
    :returns (base.ArrayType): The state.
    """
    phi = phi if phi is not None else (lambda s: s)
    rk = np.sqrt(k)
    a_k = (1 / (2 * k ** 2) + 2 / k) * t - np.sin(2 * k * t) / (4 * k ** 3) - 2 * np.sin(k * t) / k ** 2
    return np.array([(np.cos(k * t) - 1) / rk, np.sin(k * t) / rk, 1 - t + np.sin(k * t) / k,
                     np.exp(phi(t) - phi(0.0)), 1 - t, a_k])


def ex21_limit(t: float, phi: base.Callable = None) -> base.ArrayType:
    """Limit state (0, 0, 1 - t, exp(phi(t) - phi(0)), 1 - t, 0) of the same family."""
    phi = phi if phi is not None else (lambda s: s)
    return np.array([0.0, 0.0, 1 - t, np.exp(phi(t) - phi(0.0)), 1 - t, 0.0])


def solve(gc: GraphCompletion, dyn: Dynamics, v: SampledControl, x0: base.VectorType,
          step: float = base.DEFAULT_STEP, verbose: bool = False) -> base.Tuple[SpaceTimePath, Trajectory]:
    """Integrate on a completion and compose with its clock."""
    if verbose:
        tqdm.write(f"Integrating {dyn} on {gc}")
    path = integrate_spacetime(gc, dyn, v, x0, step)
    return path, gc_solution(path, gc.clock, gc)
