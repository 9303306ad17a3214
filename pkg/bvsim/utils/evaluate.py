"""Executable acceptance checks, run by `bvsim verify`."""
import os
import time
import numpy as np
from tqdm import tqdm
from functools import lru_cache
from collections import OrderedDict
from dataclasses import dataclass, field
from bvsim import base
from bvsim.base import BVSimError, ConfigurationError
from bvsim.data import loaders
from bvsim.data.bvpath import BVPath, TableSegment
from bvsim.data.scenario import Scenario
from bvsim.modeling import expr as ex
from bvsim.modeling.dynamics import Dynamics
from bvsim.modeling.completion import build_completion, canonical_clock, variation_budget
from bvsim.modeling.integrator import (Trajectory, evaluate_cost_example, ex21_analytic, ex21_limit,
                                       integrate_caratheodory, solve)
from bvsim.utils.approximation import (MollifierKernel, approximating_sequence, build_report, density_sequence,
                                       dependence_probe, fixup_clock, mollify_clock)
from bvsim.utils.convergence import ConvergenceMonitor, certificate
from bvsim.utils.lie import commutativity_report, lie_bracket, sample_points
from bvsim.utils.metrics import StatePair, path_variation
from bvsim.utils.pipeline import hyperparam_space


@dataclass
class CriterionResult:
    """Outcome of one acceptance check, with the numbers it measured."""

    name: str
    passed: bool
    message: str
    measured: base.Dict[str, float] = field(default_factory = dict)
    seconds: float = 0.0

    def __str__(self) -> str:
        status = 'PASS' if self.passed else 'FAIL'
        numbers = ', '.join(f'{key}={value:.3e}' for key, value in self.measured.items())
        return f"[{status}] {self.name}: {self.message}" + (f" ({numbers})" if numbers else '')


CLOSED_FORM_SECONDS = 2.0
VERIFY_SECONDS = 60.0


@lru_cache(maxsize = None)
def _ex21_member(k: int, step: float = 1e-4) -> base.Tuple[Trajectory, float]:
    """Numerical x_k of the oscillating family with its wall-clock time."""
    scenario = loaders.ex21()
    start = time.perf_counter()
    path, dyn = scenario.build(k)
    trajectory = integrate_caratheodory(dyn, path, scenario.v, scenario.x0, step)
    return trajectory, time.perf_counter() - start


def closed_form(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """Numerical x_k of the oscillating family against its closed form, each within CLOSED_FORM_SECONDS."""
    grid = np.linspace(0.0, 1.0, 101)
    measured, passed = OrderedDict(), True
    for k in (5, 20, 100):
        trajectory, seconds = _ex21_member(k)
        err = float(np.max(np.abs(trajectory.sample(grid) - ex21_analytic(k, grid).T)))
        measured[f'err_k{k}'] = err
        measured[f'seconds_k{k}'] = seconds
        passed = passed and err <= 1e-6 and seconds <= CLOSED_FORM_SECONDS
    return CriterionResult('closed_form', passed, f"max |x_num - x_analytic| <= 1e-6 in <= {CLOSED_FORM_SECONDS:g} s "
                           "for k in (5, 20, 100)", measured)


def limit_rate(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """Sup-grid distance to the limit trajectory must shrink by 0.6 when k is multiplied by 4."""
    grid = np.linspace(0.0, 1.0, 101)
    target = np.array([ex21_limit(t) for t in grid])
    errors = OrderedDict()
    for k in (25, 100, 400):
        trajectory, _ = _ex21_member(k)
        errors[k] = float(np.max(np.linalg.norm(trajectory.sample(grid) - target, axis = 1)))
    ks = list(errors)
    passed = all(errors[k2] <= 0.6 * errors[k1] for k1, k2 in zip(ks, ks[1:]))
    return CriterionResult('limit_rate', passed, "err(4k) <= 0.6 err(k) for k in (25, 100, 400)",
                           OrderedDict((f'err_k{k}', e) for k, e in errors.items()))


def cost(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """Cost of x_100 below 0.03 and exactly zero on the limit trajectory."""
    times = np.linspace(0.0, 1.0, 5)
    trajectory, _ = _ex21_member(100)
    numeric = evaluate_cost_example(trajectory, lambda t: t, times)
    limit = evaluate_cost_example(Trajectory(0.0, 1.0, ex21_limit, 6), lambda t: t, times)
    passed = numeric <= 0.03 and limit == 0.0
    return CriterionResult('cost', passed, "cost(x_100) <= 0.03 and cost(limit) == 0",
                           {'cost_k100': numeric, 'analytic_k100': float(ex21_analytic(100, 1.0)[5]),
                            'cost_limit': limit})


def _gc_trajectory(scenario: Scenario) -> Trajectory:
    gc = build_completion(scenario.path, bridges = scenario.bridges, grid = scenario.grid)
    return solve(gc, scenario.dynamics, scenario.v, scenario.x0, scenario.step)[1]


def bridge_dependence(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """For non-commuting fields the state after the jump depends on the bridge."""
    expected = {'u1_first': (1.0, 1.0), 'u2_first': (1.0, 0.0), 'diagonal': (1.0, 0.5)}
    measured, passed = OrderedDict(), True
    for bridge, target in expected.items():
        err = float(np.max(np.abs(_gc_trajectory(loaders.step_noncomm(bridge))(1.0) - np.array(target))))
        measured[f'err_{bridge}'] = err
        passed = passed and err <= 1e-8
    return CriterionResult('bridge_dependence', passed, "x(1) = (1, 1) / (1, 0) / (1, 0.5) within 1e-8", measured)


def bridge_independence(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """For commuting fields the trajectory does not depend on the bridge."""
    grid = np.linspace(0.0, 1.0, 1001)
    bridges = ('u1_first', 'u2_first', 'diagonal')
    samples = [_gc_trajectory(loaders.step_comm(bridge)).sample(grid) for bridge in bridges]
    spread = max(float(np.max(np.abs(first - second))) for first in samples for second in samples)
    return CriterionResult('bridge_independence', spread <= 1e-7, "trajectories of three bridges agree within 1e-7",
                           {'max_difference': spread})


def consistency(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """On an AC input the g.c. solution coincides with the Caratheodory solution."""
    scenario = loaders.ac_loop()
    grid = np.linspace(scenario.a, scenario.b, 1001)
    gc_x = _gc_trajectory(scenario)
    direct = integrate_caratheodory(scenario.dynamics, scenario.path, scenario.v, scenario.x0, scenario.step)
    err = float(np.max(np.abs(gc_x.sample(grid) - direct.sample(grid))))
    return CriterionResult('consistency', err <= 1e-7, "|gc_solution - caratheodory| <= 1e-7", {'max_difference': err})


def clock(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """Canonical clock hand values, the clock identity and the slope bound."""
    step = BVPath.step(0.0, 1.0, 0.5, [0.0], [1.0])
    sigma = canonical_clock(step)
    values = [sigma(t) for t in (0.25, 0.5, 0.75)]
    hand = values == [0.125, 0.75, 0.875]

    scenario = loaders.step_noncomm('u1_first')
    gc = build_completion(scenario.path, bridges = scenario.bridges, grid = scenario.grid)
    times = np.union1d(np.linspace(gc.a, gc.b, 1000), gc.path.breakpoints)
    identity = 0.0
    for t in times:
        s_t, u_t = gc.evaluate(gc.clock(t))
        identity = max(identity, abs(s_t - t), float(np.max(np.abs(u_t - gc.path(t)))))

    clock_values = gc.clock.sample(times)
    slack = float(np.min(np.diff(clock_values) - np.diff(times) / gc.clock.normalizer))
    passed = hand and identity <= 1e-9 and slack >= -1e-12
    return CriterionResult('clock', passed, "hand values exact, identity <= 1e-9, slope bound on all grid pairs",
                           {'identity_err': identity, 'slope_slack': slack})


def _kinked_jump() -> BVPath:
    """Jump at 0.5 with different slopes on each side."""
    segments = [TableSegment([0.0, 0.5], [[0.0], [0.5]]), TableSegment([0.5, 1.0], [[2.0], [3.5]])]
    return BVPath.from_segments([0.0, 0.5, 1.0], segments)


def mollifier(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """Smoothed clocks: identity preserved, midpoint law, fix-up accuracy and the inverse Lipschitz bound."""
    measured, passed = OrderedDict(), True

    identity = canonical_clock(BVPath.constant(0.0, 1.0, [0.0]))
    smoothed = mollify_clock(identity, 8)
    measured['identity_err'] = float(np.max(np.abs(smoothed.values - smoothed.times)))
    passed = passed and measured['identity_err'] <= 1e-12

    sigma = canonical_clock(_kinked_jump())
    _, s1, _, s2 = sigma.jump_table[0]
    monitor = ConvergenceMonitor(slack = 1e-12)
    for k in (8, 32, 128):
        smoothed = mollify_clock(sigma, k)
        err = abs(smoothed(0.5) - (s1 + s2) / 2)
        measured[f'midpoint_err_k{k}'] = err
        monitor(err, k)
        lipschitz = fixup_clock(smoothed, sigma, k, verbose = False).inverse_lipschitz
        passed = passed and lipschitz <= sigma.normalizer * (1 + 1e-6)
    passed = passed and monitor.monotone

    interior = canonical_clock(BVPath.step(0.0, 1.0, 0.5, [0.0], [1.0], at_value = [0.5]))
    for k in (8, 32, 128):
        fixed = fixup_clock(mollify_clock(interior, k), interior, k, verbose = False)
        passed = passed and fixed.inverse_lipschitz <= interior.normalizer * (1 + 1e-6)
    measured['fixup_err_k128'] = abs(fixed(0.5) - interior(0.5))
    passed = passed and measured['fixup_err_k128'] <= 1e-3
    return CriterionResult('mollifier', passed, "identity exact, midpoint law monotone, fix-up <= 1e-3 at k=128, "
                           "inverse Lipschitz <= L(1 + 1e-6)", measured)


def budget(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """Completion variation budget and Var(u_k) <= Var(phi)."""
    measured, passed = OrderedDict(), True
    scenarios = [loaders.step_noncomm(b) for b in ('u1_first', 'u2_first', 'diagonal')]
    scenarios += [loaders.step_comm(), loaders.ac_loop(), loaders.step_linear(), loaders.ex21(k = 10)]
    for scenario in scenarios:
        gc = build_completion(scenario.path, bridges = scenario.bridges, grid = 2 ** 12)
        variation, bound = variation_budget(gc)
        measured[f'margin_{scenario.name}'] = bound - variation
        passed = passed and variation <= bound + 1e-6

    scenario = loaders.step_linear()
    grid = 2 ** 12
    phi_variation = path_variation(build_completion(scenario.path, grid = grid).phi)
    for k, path in zip((8, 32), density_sequence(scenario.path, (8, 32), grid = grid)):
        measured[f'var_u_k{k}'] = path.total_variation
        passed = passed and path.total_variation <= phi_variation * (1 + 1e-9) + 1e-12
    return CriterionResult('budget', passed, "Var(phi0, phi) <= (b - a) + (2M - 1) Var(u) + 1e-6 and "
                           "Var(u_k) <= Var(phi)", measured)


def rk4_order(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """Halving the step must cut the endpoint error of x' = x u' by at least 12, on steps coarse enough to see it."""
    dyn = Dynamics.from_sources(1, 1, 0, ["0"], [["x1"]])
    u = BVPath.piecewise_linear([0.0, 1.0], [[0.0], [1.0]])
    v = loaders.step_linear().v
    errors = [abs(integrate_caratheodory(dyn, u, v, [1.0], params['step'])(1.0)[0] - np.e)
              for params in hyperparam_space([{}], [('step', (0.1, 0.05))])]
    ratio = errors[0] / errors[1]
    return CriterionResult('rk4_order', ratio >= 12, "error ratio >= 12 when halving the step",
                           {'err_0.1': errors[0], 'err_0.05': errors[1], 'ratio': ratio})


_DSL_SOURCES = ["sin(x1)*exp(x2) + x1^3/(1 + x2^2)", "log(1 + x1^2)*cos(x2) - sqrt(4 + x1*x2)",
                "(x1 - x2)^2 / (2 + sin(x1))", "exp(-x1^2) * x2^3 - 2.5*x1"]


def dsl(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """Symbolic derivatives against central differences, and the exact bracket of the 6-d example."""
    rng = np.random.default_rng(seed)
    points = rng.uniform(-1.0, 1.0, size = (100, 2))
    h, worst = 1e-6, 0.0
    for source in _DSL_SOURCES:
        e = ex.parse(source, {'x': 2})
        for var in ('x1', 'x2'):
            derivative = ex.differentiate(e, var)
            for x1, x2 in points:
                exact = ex.evaluate(derivative, {'x1': x1, 'x2': x2})
                shift = {'x1': (h, 0.0), 'x2': (0.0, h)}[var]
                upper = ex.evaluate(e, {'x1': x1 + shift[0], 'x2': x2 + shift[1]})
                lower = ex.evaluate(e, {'x1': x1 - shift[0], 'x2': x2 - shift[1]})
                worst = max(worst, abs(exact - (upper - lower) / (2 * h)) / max(1.0, abs(exact)))

    dyn = loaders.ex21(k = 10).dynamics
    brackets = [lie_bracket(dyn.g[0], dyn.g[1], x) for x in sample_points(6, 8, seed)]
    exact = all(np.array_equal(b, [0.0, 0.0, -2.0, 0.0, 0.0, 0.0]) for b in brackets)
    return CriterionResult('dsl', worst <= 1e-6 and exact, "derivatives within 1e-6 relative, [g1, g2] exact",
                           {'max_relative_err': worst})


def bv_certificate(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """BV-simple certificate of the g.c. solution of the scalar step."""
    scenario = loaders.step_linear()
    gc = build_completion(scenario.path, grid = scenario.grid)
    _, x = solve(gc, scenario.dynamics, scenario.v, scenario.x0, scenario.step)
    members = approximating_sequence(gc, scenario.dynamics, scenario.v, scenario.x0, scenario.ks,
                                     MollifierKernel(scenario.support), scenario.step, scenario.jobs)
    report = build_report(StatePair.from_objects(scenario.path, x), members, scenario.taus, path_variation(gc.phi))
    verdict = certificate(report)
    measured = OrderedDict((f'final_err_tau{tau:g}', err) for tau, err in verdict.final_errors.items())
    return CriterionResult('certificate', verdict.passed, verdict.verdict, measured)


def dependence(seed: int = base.DEFAULT_SEED) -> CriterionResult:
    """Stability ratio of the dependence probe for g(x) = x under shrinking perturbations of a step."""
    scenario = loaders.step_linear()
    ratios = OrderedDict()
    for delta in (1e-2, 1e-3):
        pairs = [(BVPath.step(0.0, 1.0, 0.5, [0.0], [1.0]), BVPath.step(0.0, 1.0, 0.5, [0.0], [1.0 + delta]))]
        ratios[f'ratio_{delta:g}'] = dependence_probe(scenario.dynamics, pairs, scenario.v, scenario.x0,
                                                      scenario.x0, seed = seed).ratio
    values = list(ratios.values())
    passed = all(np.isfinite(values)) and max(values) <= 2 * min(values) and min(values) > 0
    return CriterionResult('dependence', passed, "probe ratio stable within a factor 2", ratios)


CRITERIA: base.Dict[str, base.Callable] = OrderedDict([
    ('closed_form', closed_form),
    ('limit_rate', limit_rate),
    ('cost', cost),
    ('bridge_dependence', bridge_dependence),
    ('bridge_independence', bridge_independence),
    ('consistency', consistency),
    ('clock', clock),
    ('mollifier', mollifier),
    ('budget', budget),
    ('rk4_order', rk4_order),
    ('dsl', dsl),
    ('certificate', bv_certificate),
    ('dependence', dependence),
])


def _run(name: str, check: base.Callable, seed: int) -> CriterionResult:
    start = time.perf_counter()
    try:
        result = check(seed)
    except BVSimError as e:
        result = CriterionResult(name, False, f"raised {type(e).__name__}: {e}")
    result.seconds = time.perf_counter() - start
    return result


def wall_clock(results: base.List[CriterionResult], limit: float = VERIFY_SECONDS) -> CriterionResult:
    """The whole suite must finish within the limit."""
    total = sum(result.seconds for result in results)
    return CriterionResult('wall_clock', total <= limit, f"all checks in <= {limit:g} s", {'seconds': total}, total)


def run_criteria(names: base.List[str] = None, seed: int = base.DEFAULT_SEED) -> base.List[CriterionResult]:
    """
    Run acceptance checks by name.

    :names (base.List[str], default = None): Subset of CRITERIA, all when None.
    :seed (int, default = base.DEFAULT_SEED): Seed for randomised checks.
    :returns (base.List[CriterionResult]): Results in the order of CRITERIA, followed by the total
                                          wall_clock check when all of them ran.
    """
    run_all = names is None
    names = list(CRITERIA) if run_all else names
    unknown = [name for name in names if name not in CRITERIA]
    if unknown:
        raise ConfigurationError(f"Unknown criteria {unknown}, expected some of {list(CRITERIA)}")
    results = []
    for name in tqdm(names, desc = 'Verifying', leave = False, disable = os.environ.get('TQDM_DISABLE', False)):
        results.append(_run(name, CRITERIA[name], seed))
    if run_all:
        results.append(wall_clock(results))
    return results


def verify_scenario(scenario: Scenario, seed: int = base.DEFAULT_SEED) -> base.List[CriterionResult]:
    """
    Checks that apply to a single scenario: variation budget, clock identity, consistency on AC inputs and
    the BV-simple certificate of its approximating sequence.

    :scenario (Scenario): A scenario with a fixed input.
    :seed (int, default = base.DEFAULT_SEED): Seed of the commutativity sample.
    :returns (base.List[CriterionResult]): One result per applicable check.
    """
    if scenario.path is None:
        raise ConfigurationError("A family scenario needs [params] k to be verified")

    def checks() -> base.Iterator:
        gc = build_completion(scenario.path, bridges = scenario.bridges, grid = scenario.grid)
        variation, bound = variation_budget(gc)
        yield CriterionResult('budget', variation <= bound + 1e-6, "Var(phi0, phi) within the bound",
                              {'variation': variation, 'bound': bound})

        times = np.union1d(np.linspace(gc.a, gc.b, 1000), gc.path.breakpoints)
        identity = 0.0
        for t in times:
            s_t, u_t = gc.evaluate(gc.clock(t))
            identity = max(identity, abs(s_t - t), float(np.max(np.abs(u_t - gc.path(t)))))
        yield CriterionResult('clock', identity <= 1e-9, "clock identity <= 1e-9", {'identity_err': identity})

        report = commutativity_report(scenario.dynamics, sample_points(scenario.dynamics.n, seed = seed))
        yield CriterionResult('commutativity', True, report.verdict,
                              {f'bracket_{a}{b}': norm for (a, b), norm in report.max_norms.items()})

        _, x = solve(gc, scenario.dynamics, scenario.v, scenario.x0, scenario.step)
        if scenario.path.is_absolutely_continuous():
            grid = np.linspace(gc.a, gc.b, 1001)
            direct = integrate_caratheodory(scenario.dynamics, scenario.path, scenario.v, scenario.x0, scenario.step)
            err = float(np.max(np.abs(x.sample(grid) - direct.sample(grid))))
            yield CriterionResult('consistency', err <= 1e-7, "|gc_solution - caratheodory| <= 1e-7",
                                  {'max_difference': err})

        kernel = MollifierKernel(scenario.support if scenario.support is not None else gc.b - gc.a)
        members = approximating_sequence(gc, scenario.dynamics, scenario.v, scenario.x0, scenario.ks, kernel,
                                         scenario.step, scenario.jobs)
        report = build_report(StatePair.from_objects(scenario.path, x), members, scenario.taus,
                              path_variation(gc.phi))
        verdict = certificate(report)
        yield CriterionResult('certificate', verdict.passed, verdict.verdict,
                              OrderedDict((f'final_err_tau{tau:g}', e) for tau, e in verdict.final_errors.items()))

    results = []
    iterator = checks()
    while True:
        start = time.perf_counter()
        try:
            result = next(iterator)
        except StopIteration:
            break
        except BVSimError as e:
            results.append(CriterionResult('scenario', False, f"raised {type(e).__name__}: {e}"))
            break
        result.seconds = time.perf_counter() - start
        results.append(result)
    return results
