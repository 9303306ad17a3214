import unittest
import numpy as np
from bvsim.base import BlowUpError, PreconditionError, UsageError
from bvsim.data import loaders
from bvsim.data.bvpath import BVPath, SampledControl
from bvsim.modeling.dynamics import Dynamics
from bvsim.modeling.completion import SpaceTimeControl, build_completion
from bvsim.modeling.integrator import (Trajectory, evaluate_cost_example, ex21_analytic, ex21_limit, gc_solution,
                                       integrate_caratheodory, integrate_spacetime, solve)


class TestSpaceTime(unittest.TestCase):
    """Test integrate_spacetime() and gc_solution()."""

    @classmethod
    def setUp(cls):
        """Set up a constant input and the scalar step."""
        cls.v = SampledControl.empty(0.0, 1.0)
        cls.constant = build_completion(BVPath.constant(0.0, 1.0, [0.0]), grid = 1000)
        cls.step = loaders.step_linear()
        cls.step_gc = build_completion(cls.step.path, grid = 1024)

    def test_zero_fields(self):
        """Test the state stays put when every field vanishes."""
        dyn = Dynamics.from_sources(2, 1, 0, ["0", "0"], [["0", "0"]])
        gc = build_completion(BVPath.step(0.0, 1.0, 0.5, [0.0], [1.0]), grid = 256)
        _, x = solve(gc, dyn, self.v, [1.0, 2.0], 1e-3)
        np.testing.assert_array_equal(x.sample(np.linspace(0.0, 1.0, 11)), np.tile([1.0, 2.0], (11, 1)))

    def test_exponential(self):
        """Test x' = x reaches e with a step of 1e-3."""
        dyn = Dynamics.from_sources(1, 1, 0, ["x1"], [["0"]])
        y = integrate_spacetime(self.constant, dyn, self.v, [1.0], 1e-3)
        self.assertAlmostEqual(y.final[0], np.e, places = 10, msg = "RK4 endpoint is wrong.")
        self.assertAlmostEqual(y.y0[-1], 1.0, places = 12, msg = "Time component does not reach b.")

    def test_step_jump(self):
        """Test x = exp(u) across the jump of the scalar step."""
        _, x = solve(self.step_gc, self.step.dynamics, self.step.v, self.step.x0, self.step.step)
        self.assertAlmostEqual(x(0.25)[0], 1.0, places = 12, msg = "State moved before the jump.")
        self.assertAlmostEqual(x(1.0)[0], np.e, places = 9, msg = "State after the jump is wrong.")
        left, right = x.limits(0.5)
        self.assertAlmostEqual(left[0], 1.0, places = 12, msg = "x(t-) is wrong.")
        self.assertAlmostEqual(right[0], np.e, places = 9, msg = "x(t+) is wrong.")
        low, high = x.envelope(0.5)
        self.assertAlmostEqual(high[0] - low[0], np.e - 1.0, places = 9, msg = "Envelope does not span the jump.")
        self.assertListEqual(x.jump_times, [0.5], msg = "Jump times are wrong.")

    def test_fingerprint(self):
        """Test gc_solution() rejects a clock of another parameterisation."""
        y = integrate_spacetime(self.step_gc, self.step.dynamics, self.step.v, self.step.x0, 1e-3)
        other = self.step_gc.reparameterized(lambda s: s ** 2)
        with self.assertRaises(UsageError, msg = "Mismatched clock accepted."):
            gc_solution(y, other.clock)

    def test_reparameterized(self):
        """Test x = y o sigma does not change when the completion is reparameterised."""
        grid = np.linspace(0.0, 1.0, 201)
        for scenario in (self.step, loaders.step_noncomm()):
            gc = build_completion(scenario.path, bridges = scenario.bridges, grid = 1024)
            _, x = solve(gc, scenario.dynamics, scenario.v, scenario.x0, 1e-3)
            _, other = solve(gc.reparameterized(lambda s: s ** 2), scenario.dynamics, scenario.v, scenario.x0, 1e-3)
            self.assertLessEqual(np.max(np.abs(x.sample(grid) - other.sample(grid))), 1e-5,
                                 msg = f"Trajectory of {scenario.name} depends on the parameterisation.")
            for t in x.jump_times:
                np.testing.assert_allclose(np.vstack(x.limits(t)), np.vstack(other.limits(t)), atol = 1e-5)

    def test_continuity(self):
        """Test the space-time solution moves proportionally to a perturbation of (phi0, phi)."""
        scenario = loaders.step_noncomm()
        gc = build_completion(scenario.path, grid = 1024)
        s = gc.s_grid
        y = integrate_spacetime(gc, scenario.dynamics, scenario.v, scenario.x0, 1e-3)
        ratios = []
        for delta in (1e-3, 1e-4):
            phi0 = (1 - delta) * gc.phi0 + delta * (gc.a + (gc.b - gc.a) * s)
            phi = gc.phi + delta * np.column_stack([np.sin(np.pi * s), np.sin(2 * np.pi * s)])
            moved = integrate_spacetime(SpaceTimeControl(s, phi0, phi), scenario.dynamics, scenario.v,
                                        scenario.x0, 1e-3)
            distance = max(np.max(np.abs(moved.y - y.y)), np.max(np.abs(moved.y0 - y.y0)))
            ratios.append(distance / delta)
        self.assertGreater(min(ratios), 0.0, msg = "The perturbation did not move the solution.")
        self.assertLessEqual(max(ratios), 2 * min(ratios), msg = f"Response ratios are not stable: {ratios}")

    def test_guard(self):
        """Test integrate_spacetime() stops when the state leaves the guard."""
        dyn = Dynamics.from_sources(1, 1, 0, ["x1"], [["0"]], guard = 10.0)
        gc = build_completion(BVPath.constant(0.0, 3.0, [0.0]), grid = 300)
        with self.assertRaises(BlowUpError, msg = "exp(3) > 10 not detected."):
            integrate_spacetime(gc, dyn, SampledControl.empty(0.0, 3.0), [1.0], 1e-2)


class TestBridges(unittest.TestCase):
    """Test the dependence of the solution on the bridging arcs."""

    def _final(self, scenario):
        gc = build_completion(scenario.path, bridges = scenario.bridges, grid = 1024)
        return solve(gc, scenario.dynamics, scenario.v, scenario.x0, scenario.step)[1](1.0)

    def test_noncommuting(self):
        """Test x(1) for each bridge of the non-commuting pair."""
        expected = {'u1_first': [1.0, 1.0], 'u2_first': [1.0, 0.0], 'diagonal': [1.0, 0.5]}
        for bridge, target in expected.items():
            np.testing.assert_allclose(self._final(loaders.step_noncomm(bridge)), target, atol = 1e-8,
                                       err_msg = f"x(1) is wrong for the {bridge} bridge.")

    def test_commuting(self):
        """Test x(1) is the same for every bridge of the commuting pair."""
        for bridge in ('u1_first', 'u2_first', 'diagonal'):
            np.testing.assert_allclose(self._final(loaders.step_comm(bridge)), [np.e, np.e], rtol = 1e-8,
                                       err_msg = f"x(1) is wrong for the {bridge} bridge.")


class TestCaratheodory(unittest.TestCase):
    """Test integrate_caratheodory()."""

    def test_rejects_jumps(self):
        """Test integrate_caratheodory() refuses a jumping input."""
        scenario = loaders.step_linear()
        with self.assertRaises(PreconditionError, msg = "Jumping input accepted."):
            integrate_caratheodory(scenario.dynamics, scenario.path, scenario.v, scenario.x0)

    def test_consistency(self):
        """Test the completion solution agrees with the direct one on an AC input."""
        scenario = loaders.ac_loop()
        gc = build_completion(scenario.path, grid = 2 ** 14)
        _, x = solve(gc, scenario.dynamics, scenario.v, scenario.x0, 1e-3)
        direct = integrate_caratheodory(scenario.dynamics, scenario.path, scenario.v, scenario.x0, 1e-3)
        grid = np.linspace(0.0, 1.0, 101)
        np.testing.assert_allclose(x.sample(grid), direct.sample(grid), atol = 1e-7)

    def test_closed_form(self):
        """Test the oscillating family at k = 10 against its closed form."""
        scenario = loaders.ex21()
        path, dyn = scenario.build(10)
        x = integrate_caratheodory(dyn, path, scenario.v, scenario.x0, 1e-4)
        grid = np.linspace(0.0, 1.0, 21)
        np.testing.assert_allclose(x.sample(grid), ex21_analytic(10, grid).T, atol = 1e-6)


class TestCost(unittest.TestCase):
    """Test evaluate_cost_example()."""

    def test_limit(self):
        """Test the cost of the limit trajectory is zero."""
        limit = Trajectory(0.0, 1.0, ex21_limit, 6)
        self.assertEqual(evaluate_cost_example(limit, lambda t: t, np.linspace(0.0, 1.0, 5)), 0.0,
                         msg = "Limit trajectory has a cost.")

    def test_analytic(self):
        """Test the cost of the closed form reduces to its last component at t = 1."""
        member = Trajectory(0.0, 1.0, lambda t: ex21_analytic(100, t), 6)
        self.assertAlmostEqual(evaluate_cost_example(member, lambda t: t, [0.0, 0.5, 1.0]),
                               ex21_analytic(100, 1.0)[5], places = 12, msg = "Cost of the closed form is wrong.")

    def test_dimension(self):
        """Test evaluate_cost_example() needs six components."""
        with self.assertRaises(UsageError, msg = "Two-dimensional state accepted."):
            evaluate_cost_example(Trajectory(0.0, 1.0, lambda t: np.zeros(2), 2), lambda t: t, [0.0])
