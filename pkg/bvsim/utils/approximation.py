"""
Approximating sequences of absolutely continuous inputs.

A clock sigma of a completion is smoothed by convolution with a scaled bump kernel, repaired at the jumps,
and inverted. Composing the completion with the smoothed clocks gives AC inputs u_k = phi o sigma_k and their
trajectories x_k = y_k o sigma_k.
"""
import os
import numpy as np
from tqdm import tqdm
from dataclasses import dataclass, field
from scipy.integrate import quad, trapezoid
from bvsim import base
from bvsim.base import ComputationError, ConfigurationError, PreconditionError
from bvsim.data.bvpath import BVPath, ControlSet, SampledControl
from bvsim.modeling.dynamics import Dynamics
from bvsim.modeling.completion import Clock, GraphCompletion, SpaceTimeControl, build_completion, canonical_clock
from bvsim.modeling.integrator import (SpaceTimePath, Trajectory, integrate_caratheodory, integrate_spacetime,
                                       solve)
from bvsim.utils.lie import commutativity_report, sample_points
from bvsim.utils.metrics import ApproxReport, StatePair, l1_distance, path_variation, pointwise_error, sup_norm
from bvsim.utils.pipeline import parallel_map

# Kernel nodes handled per vectorised block.
_CHUNK = 256


def _bump(theta: base.ArrayType) -> base.ArrayType:
    theta = np.atleast_1d(np.asarray(theta, dtype = float))
    out = np.zeros_like(theta)
    inside = np.abs(theta) < 1
    out[inside] = np.exp(-1.0 / (1.0 - theta[inside] ** 2))
    return out


def _spread(points: base.ArrayType, tol: float) -> base.ArrayType:
    """Sorted points with consecutive gaps above tol. The first and last point are kept."""
    points = np.unique(points)
    keep = np.concatenate([[True], np.diff(points) > tol])
    out = points[keep]
    out[-1] = points[-1]
    return out


class MollifierKernel(object):
    """Even bump kernel with unit mass and support [-M, M]."""

    def __init__(self, support: float, cells: int = base.MOLLIFIER_CELLS) -> None:
        """
        Initialise the kernel.

        :support (float): Support half-width M > 0 of the unscaled kernel.
        :cells (int, default = base.MOLLIFIER_CELLS): Quadrature cells across the support, an even number.
        """
        if not support > 0:
            raise ConfigurationError(f"Kernel support must be positive, got {support}")
        if cells < 2 or cells % 2:
            raise ConfigurationError(f"Kernel quadrature needs an even number of cells, got {cells}")
        self.support = float(support)
        self.cells = cells
        self.constant = 1.0 / quad(lambda r: _bump(r)[0], -1, 1, epsabs = 1e-14, epsrel = 1e-13)[0]

        # Trapezoid nodes of [-1, 1], mirrored so that the rule is exactly symmetric.
        half = np.arange(cells // 2 + 1) * (2.0 / cells)
        self.nodes = np.concatenate([-half[:0:-1], half])
        density = _bump(self.nodes)
        weights = density * (2.0 / cells)
        weights[[0, -1]] /= 2
        self.weights = weights / trapezoid(density, self.nodes)

    def __call__(self, r: base.ScalarOrArray) -> base.ArrayType:
        """rho(r) = C exp(-1 / (1 - (r / M)^2)) / M inside the support, 0 outside."""
        return self.constant * _bump(np.asarray(r, dtype = float) / self.support) / self.support

    def scaled(self, k: int, r: base.ScalarOrArray) -> base.ArrayType:
        """rho_k(r) = 2k rho(2k r)."""
        return 2 * k * self(2 * k * np.asarray(r, dtype = float))

    def mass(self) -> float:
        """Integral of rho by adaptive quadrature."""
        return quad(lambda r: self(r)[0], -self.support, self.support, epsabs = 1e-14, epsrel = 1e-13)[0]

    def halfwidth(self, k: int) -> float:
        """Support half-width of rho_k."""
        return self.support / (2 * k)

    def __repr__(self) -> str:
        return f"MollifierKernel(support={self.support:.6g}, cells={self.cells})"


class SampledClock(object):
    """Continuous strictly increasing clock [a, b] -> [0, 1], linear between samples."""

    def __init__(self, times: base.VectorType, values: base.VectorType, normalizer: float,
                 surgery: base.List[float] = None) -> None:
        """
        Initialise the clock.

        :times (base.VectorType): Strictly increasing sample times from a to b.
        :values (base.VectorType): Strictly increasing clock values from 0 to 1.
        :normalizer (float): Lipschitz bound L of the inverse map.
        :surgery (base.List[float], default = None): Jump times where the values were repaired.
        """
        self.times = np.asarray(times, dtype = float)
        self.values = np.asarray(values, dtype = float)
        self.a, self.b = float(self.times[0]), float(self.times[-1])
        self.normalizer = float(normalizer)
        self.surgery = list(surgery or [])

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def sample(self, times: base.VectorType) -> base.ArrayType:
        return np.interp(np.asarray(times, dtype = float), self.times, self.values)

    def inverse(self, s: base.ScalarOrArray) -> base.ScalarOrArray:
        """phi_{0,k}(s), the inverse clock."""
        return np.interp(s, self.values, self.times)

    @property
    def slopes(self) -> base.ArrayType:
        return np.diff(self.values) / np.diff(self.times)

    @property
    def inverse_lipschitz(self) -> float:
        """Largest chord slope of the inverse clock."""
        return float(np.max(np.diff(self.times) / np.diff(self.values)))

    def __repr__(self) -> str:
        return f"SampledClock([{self.a}, {self.b}], points={len(self.times)}, surgery={self.surgery})"


def _clock_grid(clock: Clock, halfwidth: float, cells: int = base.MOLLIFIER_CELLS) -> base.ArrayType:
    """Uniform grid of [a, b], refined to halfwidth / 8 around every breakpoint."""
    a, b = clock.a, clock.b
    fine = halfwidth / 8
    parts = [np.linspace(a, b, cells + 1), clock.table[:, 0]]
    for t in clock.table[:, 0]:
        parts.append(np.arange(t - 2 * halfwidth, t + 2 * halfwidth + fine / 2, fine))
    times = np.concatenate(parts)
    times = times[(times >= a) & (times <= b)]
    return _spread(times, 1e-12 * (b - a))


def mollify_clock(clock: Clock, k: int, kernel: MollifierKernel = None) -> SampledClock:
    """
    Convolve the odd extension of sigma with rho_k.

    Outside [a, b] the clock is extended by sigma(2a - t) = -sigma(t) and sigma(2b - t) = 2 - sigma(t).

    :clock (Clock): Clock with sigma(t2) - sigma(t1) >= (t2 - t1) / L, L = clock.normalizer.
    :k (int): Sequence index, k >= 1.
    :kernel (MollifierKernel, default = None): Kernel, defaults to support b - a.
    :returns (SampledClock): The smoothed clock.
    """
    if k < 1:
        raise ConfigurationError(f"k must be at least 1, got {k}")
    a, b = clock.a, clock.b
    kernel = kernel if kernel is not None else MollifierKernel(b - a)
    if kernel.support > (b - a) * (1 + 1e-12):
        raise ConfigurationError(f"Kernel support {kernel.support:.6g} exceeds b - a = {b - a:.6g}")

    L = clock.normalizer
    halfwidth = kernel.halfwidth(k)
    times = _clock_grid(clock, halfwidth)

    slopes = np.diff(clock.sample(times)) / np.diff(times)
    j = int(np.argmin(slopes))
    if slopes[j] < (1 - 1e-9) / L:
        raise PreconditionError(f"Clock slope {slopes[j]:.6g} on [{times[j]:.6g}, {times[j + 1]:.6g}] "
                                f"is below 1/L = {1 / L:.6g}")

    values = np.zeros_like(times)
    for start in range(0, len(kernel.nodes), _CHUNK):
        nodes = kernel.nodes[start:start + _CHUNK]
        shifted = times[:, None] - halfwidth * nodes[None, :]
        sampled = clock.sample(shifted.ravel(), extend = True).reshape(shifted.shape)
        values += sampled @ kernel.weights[start:start + _CHUNK]

    if abs(values[0]) > 1e-8 or abs(values[-1] - 1.0) > 1e-8:
        raise ComputationError(f"Smoothed clock ends at ({values[0]:.3e}, {values[-1]:.12f}), expected (0, 1)")
    values[0], values[-1] = 0.0, 1.0
    if np.min(np.diff(values) / np.diff(times)) < 1 / L - 1e-9:
        raise ComputationError(f"Smoothed clock lost the slope bound 1/L at k={k}")
    return SampledClock(times, values, L)


def fixup_clock(smoothed: SampledClock, clock: Clock, k: int = None, verbose: bool = True) -> SampledClock:
    """
    Repair a smoothed clock at the interior jumps of sigma.

    On [tau1, tau2], the pre-image of [sigma(t_i-), sigma(t_i+)], the smoothed clock is replaced by the polyline
    through (tau1, sigma(t_i-)), (t_i, m) and (tau2, sigma(t_i+)). m = sigma(t_i) when that value is interior;
    otherwise m lies a slope 1/L away from the end it coincides with. A jump is left alone while the smoothed
    value at t_i is not strictly inside the jump, or while the polyline would break the inverse Lipschitz bound.

    :smoothed (SampledClock): Output of mollify_clock.
    :clock (Clock): The original clock.
    :k (int, default = None): Sequence index, for messages.
    :verbose (bool, default = True): Report skipped jumps through tqdm.write.
    :returns (SampledClock): sigma_k.
    """
    L = smoothed.normalizer
    times, values = smoothed.times.copy(), smoothed.values.copy()
    gap = 1e-12 * (smoothed.b - smoothed.a)
    applied = []

    for t_i, s1, s_mid, s2 in clock.jump_table:
        if not (smoothed.a < t_i < smoothed.b) or not s1 < s2:
            continue
        current = smoothed(t_i)
        if not (s1 < current < s2):
            if verbose:
                tqdm.write(f"Surgery skipped at t={t_i:.6g} for k={k}: smoothed value {current:.6g} is not inside "
                           f"({s1:.6g}, {s2:.6g})")
            continue

        tau1, tau2 = float(smoothed.inverse(s1)), float(smoothed.inverse(s2))
        if s_mid <= s1:
            middle = s1 + (t_i - tau1) / L
        elif s_mid >= s2:
            middle = s2 - (tau2 - t_i) / L
        else:
            middle = s_mid
        knots, levels = np.array([tau1, t_i, tau2]), np.array([s1, middle, s2])
        steps = np.diff(levels)
        if np.any(steps <= 0) or np.any(np.diff(knots) <= 0) or np.max(np.diff(knots) / steps) > L * (1 + 1e-6):
            if verbose:
                tqdm.write(f"Surgery skipped at t={t_i:.6g} for k={k}: the inverse slope bound would fail")
            continue

        outside = (times < tau1 - gap) | (times > tau2 + gap)
        times = np.concatenate([times[outside], knots])
        values = np.concatenate([values[outside], levels])
        order = np.argsort(times)
        times, values = times[order], values[order]
        applied.append(float(t_i))

    return SampledClock(times, values, L, applied)


def _perturbed_control(gc: GraphCompletion, k: int, kernel: MollifierKernel
                       ) -> base.Tuple[SpaceTimeControl, SampledClock]:
    """The space-time control (phi_{0,k}, phi) with phi_{0,k} the inverse of sigma_k."""
    clock = fixup_clock(mollify_clock(gc.clock, k, kernel), gc.clock, k)
    s_grid = _spread(np.concatenate([gc.s_grid, clock.values]), 1e-14)
    phi0 = clock.inverse(s_grid)
    phi0[0], phi0[-1] = gc.a, gc.b
    phi = np.column_stack([np.interp(s_grid, gc.s_grid, gc.phi[:, j]) for j in range(gc.dim)])
    return SpaceTimeControl(s_grid, phi0, phi), clock


class Approximant(object):
    """Member (u_k, x_k) of an approximating sequence: u_k = phi o sigma_k and x_k = y_k o sigma_k."""

    def __init__(self, k: int, clock: SampledClock, control: SpaceTimeControl, y: SpaceTimePath = None) -> None:
        """
        Initialise the member.

        :k (int): Sequence index.
        :clock (SampledClock): sigma_k.
        :control (SpaceTimeControl): (phi_{0,k}, phi).
        :y (SpaceTimePath, default = None): Space-time solution on the control, if integrated.
        """
        self.k = k
        self.clock = clock
        self.control = control
        self.y = y
        self.a, self.b = clock.a, clock.b

    def u(self, times: base.VectorType) -> base.ArrayType:
        s = self.clock.sample(times)
        return np.column_stack([np.interp(s, self.control.s_grid, self.control.phi[:, j])
                                for j in range(self.control.dim)])

    def x(self, times: base.VectorType) -> base.ArrayType:
        if self.y is None:
            raise ConfigurationError(f"Member k={self.k} was built without a trajectory")
        return self.y.evaluate_many(self.clock.sample(times))

    @property
    def variation(self) -> float:
        """Var(u_k), the chord variation of u_k sampled at its knots, where it is linear in between."""
        knots = self.knots
        return path_variation(self.u(knots))

    @property
    def knots(self) -> base.ArrayType:
        """Times where u_k may bend."""
        return _spread(np.concatenate([self.clock.times, self.control.phi0]), 1e-12 * (self.b - self.a))

    def pair(self) -> StatePair:
        return StatePair(self.a, self.b, self.u, self.x)

    def trajectory(self) -> Trajectory:
        return Trajectory(self.a, self.b, lambda t: self.x(np.atleast_1d(t))[0], self.y.n, sampler = self.x)

    def as_path(self, control_set: ControlSet = None) -> BVPath:
        """u_k as a continuous piecewise-linear BVPath."""
        knots = self.knots
        return BVPath.piecewise_linear(knots, self.u(knots), control_set)

    def __repr__(self) -> str:
        return f"Approximant(k={self.k}, Var={self.variation:.6g}, surgery={self.clock.surgery})"


def _check_ks(ks: base.Sequence[int]) -> base.List[int]:
    ks = [int(k) for k in ks]
    if not ks or any(k < 1 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
        raise ConfigurationError(f"ks must be a strictly increasing list of positive integers, got {ks}")
    return ks


def approximating_sequence(gc: GraphCompletion, dyn: Dynamics, v: SampledControl, x0: base.VectorType,
                           ks: base.Sequence[int], kernel: MollifierKernel = None, step: float = base.DEFAULT_STEP,
                           n_jobs: int = 1) -> base.List[Approximant]:
    """
    Build (u_k, x_k) for every k by integrating the space-time system over (phi_{0,k}, phi).

    :gc (GraphCompletion): Completion of the input.
    :dyn (Dynamics): The system.
    :v (SampledControl): Ordinary control.
    :x0 (base.VectorType): Initial state.
    :ks (base.Sequence[int]): Strictly increasing sequence indices.
    :kernel (MollifierKernel, default = None): Kernel, defaults to support b - a.
    :step (float, default = base.DEFAULT_STEP): RK4 step in pseudo-time.
    :n_jobs (int, default = 1): joblib workers, one k per task.
    :returns (base.List[Approximant]): Members in k order.
    """
    ks = _check_ks(ks)
    kernel = kernel if kernel is not None else MollifierKernel(gc.b - gc.a)

    def member(k: int) -> Approximant:
        control, clock = _perturbed_control(gc, k, kernel)
        return Approximant(k, clock, control, integrate_spacetime(control, dyn, v, x0, step))

    return parallel_map(member, ks, n_jobs, desc = 'Approximating sequence')


def density_sequence(u: BVPath, ks: base.Sequence[int], kernel: MollifierKernel = None,
                     grid: int = base.DEFAULT_GRID) -> base.List[BVPath]:
    """
    AC paths u_k = phi o sigma_k converging to u pointwise, U-valued and of equibounded variation.

    :u (BVPath): Input of finite variation.
    :ks (base.Sequence[int]): Strictly increasing sequence indices.
    :kernel (MollifierKernel, default = None): Kernel, defaults to support b - a.
    :grid (int, default = base.DEFAULT_GRID): Completion grid size.
    :returns (base.List[BVPath]): The paths in k order.
    """
    ks = _check_ks(ks)
    gc = build_completion(u, grid = grid)
    kernel = kernel if kernel is not None else MollifierKernel(u.b - u.a)
    paths = []
    for k in ks:
        control, clock = _perturbed_control(gc, k, kernel)
        paths.append(Approximant(k, clock, control).as_path(u.control_set))
    return paths


def variation_clock(u_k: BVPath) -> Clock:
    """sigma_k(t) = (t - a + Var_[a,t](u_k)) / (b - a + Var_[a,b](u_k))."""
    return canonical_clock(u_k)


def variation_clock_controls(u_k: BVPath, grid: int = 1024) -> SpaceTimeControl:
    """
    Space-time control (phi_{0,k}, u_k o phi_{0,k}) with phi_{0,k} the inverse of the variation clock.

    Its Lipschitz constant is at most b - a + Var(u_k).

    :u_k (BVPath): AC input.
    :grid (int, default = 1024): Uniform time intervals, merged with the knots of u_k.
    :returns (SpaceTimeControl): The control.
    """
    if not u_k.is_absolutely_continuous():
        raise PreconditionError("The variation clock of a jumping input is not invertible")
    clock = variation_clock(u_k)
    times = _spread(np.concatenate([np.linspace(u_k.a, u_k.b, grid + 1), u_k.knots]), 1e-12 * (u_k.b - u_k.a))
    s_grid = clock.sample(times)
    s_grid[0], s_grid[-1] = 0.0, 1.0
    return SpaceTimeControl(s_grid, times, u_k.sample(times))


def tau_sequence(phi: base.Callable, tau: float, k: int, a: float = 0.0, b: float = 1.0) -> BVPath:
    """
    Piecewise-linear interpolant of a scalar map on a uniform 1/k grid that has tau as a knot.

    :phi (base.Callable): Scalar map of t.
    :tau (float): Time in [a, b] where the interpolant must be exact.
    :k (int): Number of uniform cells.
    :returns (BVPath): The interpolant.
    """
    if not (a <= tau <= b):
        raise ConfigurationError(f"tau={tau} lies outside [{a}, {b}]")
    knots = _spread(np.concatenate([np.linspace(a, b, int(k) + 1), [tau]]), 0.0)
    return BVPath.piecewise_linear(knots, [float(np.ravel(phi(t))[0]) for t in knots])


@dataclass
class FamilyMember:
    """Member of a parameter family: the input at k and its Caratheodory trajectory."""

    k: float
    path: BVPath
    trajectory: Trajectory

    @property
    def variation(self) -> float:
        return self.path.total_variation

    def pair(self) -> StatePair:
        return StatePair.from_objects(self.path, self.trajectory)


def family_sequence(build: base.Callable, v: SampledControl, x0: base.VectorType, ks: base.Sequence[float],
                    step: float = base.DEFAULT_STEP, n_jobs: int = 1) -> base.List[FamilyMember]:
    """
    Integrate an AC input family directly, one k at a time.

    :build (base.Callable): k -> (BVPath, Dynamics).
    :v (SampledControl): Ordinary control.
    :x0 (base.VectorType): Initial state.
    :ks (base.Sequence[float]): Family parameters.
    :step (float, default = base.DEFAULT_STEP): RK4 step.
    :n_jobs (int, default = 1): joblib workers.
    :returns (base.List[FamilyMember]): Members in k order.
    """
    def member(k: float) -> FamilyMember:
        path, dyn = build(k)
        return FamilyMember(k, path, integrate_caratheodory(dyn, path, v, x0, step))

    return parallel_map(member, list(ks), n_jobs, desc = 'Family sweep')


def build_report(target: StatePair, members: base.Sequence, taus: base.Sequence[float], budget: float = None,
                 points: int = base.L1_POINTS) -> ApproxReport:
    """
    Error rows for every member and tau.

    :target (StatePair): The limit pair (u, x).
    :members (base.Sequence): Approximant or FamilyMember objects.
    :taus (base.Sequence[float]): Probe times.
    :budget (float, default = None): Declared variation budget.
    :points (int, default = base.L1_POINTS): L1 grid size.
    :returns (ApproxReport): The report.
    """
    report = ApproxReport(budget)
    grid = np.linspace(target.a, target.b, points)
    for member in members:
        candidate = member.pair()
        l1 = l1_distance(target.stacked, candidate.stacked, target.a, target.b, points)
        sup = sup_norm(candidate.x(grid))
        for tau in taus:
            report.add(member.k, float(tau), pointwise_error(target, candidate, tau), l1, member.variation, sup)
    return report


@dataclass
class ProbeResult:
    """Empirical stability ratios of the dependence probe."""

    ratio: float
    ratios: base.List[float] = field(default_factory = list)


def dependence_probe(dyn: Dynamics, pairs: base.Sequence[base.Tuple[BVPath, BVPath]], v: SampledControl,
                     x1: base.VectorType, x2: base.VectorType, probe_times: base.VectorType = None,
                     grid: int = 2 ** 10, step: float = 1e-3, seed: int = base.DEFAULT_SEED,
                     points: int = 2001) -> ProbeResult:
    """
    Ratio of output to input distance over pairs of inputs, for commuting dynamics.

    Output: |x_1(t) - x_2(t)| + ||x_1 - x_2||_1. Input: |x1 - x2| + |u_1(a) - u_2(a)| + |u_1(t) - u_2(t)|
    + ||u_1 - u_2||_1. Both trajectories are g.c. solutions on canonical completions.

    :dyn (Dynamics): Commuting system.
    :pairs (base.Sequence[tuple]): Input pairs (u_1, u_2) on a common interval.
    :v (SampledControl): Ordinary control.
    :x1 (base.VectorType): Initial state for u_1.
    :x2 (base.VectorType): Initial state for u_2.
    :probe_times (base.VectorType, default = None): Times t, defaults to 11 uniform points.
    :grid (int, default = 2 ** 10): Completion grid size.
    :step (float, default = 1e-3): RK4 step.
    :seed (int, default = base.DEFAULT_SEED): Seed of the commutativity sample.
    :points (int, default = 2001): L1 grid size.
    :returns (ProbeResult): Largest ratio and all ratios. Zero input distance gives ratio 0.
    """
    report = commutativity_report(dyn, sample_points(dyn.n, seed = seed))
    if not report.commuting:
        raise PreconditionError(f"Dependence estimates need commuting fields: {report.verdict}")

    offset = float(np.linalg.norm(np.asarray(x1, dtype = float) - np.asarray(x2, dtype = float)))
    ratios = []
    for u1, u2 in tqdm(pairs, desc = 'Dependence probe', leave = False,
                       disable = os.environ.get('TQDM_DISABLE', False)):
        a, b = u1.a, u1.b
        times = np.linspace(a, b, 11) if probe_times is None else np.asarray(probe_times, dtype = float)
        first = solve(build_completion(u1, grid = grid), dyn, v, x1, step)[1]
        second = solve(build_completion(u2, grid = grid), dyn, v, x2, step)[1]
        input_l1 = l1_distance(u1.sample, u2.sample, a, b, points)
        output_l1 = l1_distance(first.sample, second.sample, a, b, points)
        start = float(np.linalg.norm(u1(a) - u2(a)))
        for t in times:
            denominator = offset + start + float(np.linalg.norm(u1(t) - u2(t))) + input_l1
            numerator = float(np.linalg.norm(first(t) - second(t))) + output_l1
            ratios.append(numerator / denominator if denominator > 0 else 0.0)
    return ProbeResult(max(ratios, default = 0.0), ratios)
