import unittest
import numpy as np
from bvsim.base import ConfigurationError, PreconditionError
from bvsim.data import loaders
from bvsim.data.bvpath import BVPath, ExprSegment, SampledControl, TableSegment
from bvsim.modeling import expr as ex
from bvsim.modeling.completion import build_completion, canonical_clock
from bvsim.modeling.integrator import ex21_limit, integrate_caratheodory
from bvsim.utils.approximation import (MollifierKernel, approximating_sequence, density_sequence, dependence_probe,
                                       fixup_clock, mollify_clock, tau_sequence, variation_clock_controls)
from bvsim.utils.metrics import StatePair, l1_error, limit_error


def _phi(t):
    return np.sin(3 * t)


def _limit_pair():
    """(u, x) = ((0, 0, phi), (0, 0, 1 - t, exp(phi - phi(0)), 1 - t, 0)) of the oscillating family."""
    def u(times):
        return np.column_stack([np.zeros(len(times)), np.zeros(len(times)), _phi(times)])

    def x(times):
        return np.array([ex21_limit(t, _phi) for t in times])

    return StatePair(0.0, 1.0, u, x)


def _tau_member(k, tau, step = 1e-3):
    """The oscillating input at k with third component phi_k^tau, and its Caratheodory solution."""
    scenario = loaders.ex21(k = k)
    phi_k = tau_sequence(_phi, tau, k)
    knots = phi_k.knots
    values = phi_k.sample(knots)[:, 0]
    oscillation = [ex.parse("(cos(k*t)-1)/sqrt(k)"), ex.parse("sin(k*t)/sqrt(k)")]
    segments = []
    for t0, t1, y0, y1 in zip(knots[:-1], knots[1:], values[:-1], values[1:]):
        slope = ex.Binary('*', ex.Num(float((y1 - y0) / (t1 - t0))), ex.Binary('-', ex.Var('t'), ex.Num(float(t0))))
        segments.append(ExprSegment(oscillation + [ex.Binary('+', ex.Num(float(y0)), slope)], t0, t1, k = k))
    starts = [segment.value(t0) for segment, t0 in zip(segments, knots[:-1])] + [segments[-1].value(knots[-1])]
    path = BVPath(knots, segments, [(value, value, value) for value in starts])
    return path, integrate_caratheodory(scenario.dynamics, path, scenario.v, scenario.x0, step)


class TestMollifier(unittest.TestCase):
    """Test MollifierKernel, mollify_clock() and fixup_clock()."""

    @classmethod
    def setUp(cls):
        """Set up the identity clock and two jumping clocks."""
        cls.kernel = MollifierKernel(1.0)
        cls.identity = canonical_clock(BVPath.constant(0.0, 1.0, [0.0]))
        segments = [TableSegment([0.0, 0.5], [[0.0], [0.5]]), TableSegment([0.5, 1.0], [[2.0], [3.5]])]
        cls.kinked = canonical_clock(BVPath.from_segments([0.0, 0.5, 1.0], segments))
        cls.interior = canonical_clock(BVPath.step(0.0, 1.0, 0.5, [0.0], [1.0], at_value = [0.5]))

    def test_kernel(self):
        """Test MollifierKernel mass, symmetry and support."""
        self.assertAlmostEqual(self.kernel.mass(), 1.0, places = 10, msg = "Kernel mass is not 1.")
        self.assertAlmostEqual(self.kernel.weights.sum(), 1.0, places = 14, msg = "Quadrature weights do not sum to 1.")
        np.testing.assert_array_equal(self.kernel.nodes, -self.kernel.nodes[::-1])
        self.assertEqual(self.kernel.scaled(4, 0.2)[0], 0.0, msg = "rho_k is not zero outside its support.")
        self.assertEqual(self.kernel.halfwidth(4), 0.125, msg = "Halfwidth of rho_k is wrong.")
        with self.assertRaises(ConfigurationError, msg = "Zero support accepted."):
            MollifierKernel(0.0)
        with self.assertRaises(ConfigurationError, msg = "Odd number of cells accepted."):
            MollifierKernel(1.0, cells = 7)

    def test_trapezoid(self):
        """Test MollifierKernel uses the trapezoid rule on the closed support."""
        kernel = MollifierKernel(1.0, cells = 8)
        np.testing.assert_allclose(kernel.nodes, np.linspace(-1.0, 1.0, 9), atol = 1e-15)
        self.assertIn(0.0, kernel.nodes, msg = "The centre is not a node.")
        self.assertEqual(kernel.weights[0], 0.0, msg = "The end node carries weight.")
        self.assertAlmostEqual(kernel.weights.sum(), 1.0, places = 14, msg = "Weights are not normalised.")
        density = np.exp(-1.0 / (1.0 - kernel.nodes[1:-1] ** 2))
        np.testing.assert_allclose(kernel.weights[1:-1] / density, kernel.weights[4] / density[3], rtol = 1e-12)

    def test_identity(self):
        """Test mollify_clock() keeps the identity clock."""
        smoothed = mollify_clock(self.identity, 8, self.kernel)
        np.testing.assert_allclose(smoothed.values, smoothed.times, atol = 1e-12)
        with self.assertRaises(ConfigurationError, msg = "k = 0 accepted."):
            mollify_clock(self.identity, 0)
        with self.assertRaises(ConfigurationError, msg = "Support wider than [a, b] accepted."):
            mollify_clock(self.identity, 8, MollifierKernel(2.0))

    def test_midpoint(self):
        """Test smoothed clocks approach the midpoint of the jump."""
        _, s1, _, s2 = self.kinked.jump_table[0]
        errors = [abs(mollify_clock(self.kinked, k, self.kernel)(0.5) - (s1 + s2) / 2) for k in (8, 32, 128)]
        self.assertLess(errors[1], errors[0], msg = "Midpoint error does not shrink from k = 8 to 32.")
        self.assertLess(errors[2], errors[1], msg = "Midpoint error does not shrink from k = 32 to 128.")

    def test_slope_bound(self):
        """Test smoothed clocks keep the slope bound 1/L."""
        smoothed = mollify_clock(self.kinked, 32, self.kernel)
        self.assertGreaterEqual(smoothed.slopes.min(), 1 / self.kinked.normalizer - 1e-9,
                                msg = "Smoothed clock is flatter than 1/L.")
        self.assertTupleEqual((smoothed(0.0), smoothed(1.0)), (0.0, 1.0), msg = "Smoothed clock ends moved.")

    def test_fixup(self):
        """Test fixup_clock() restores an interior at-value."""
        fixed = fixup_clock(mollify_clock(self.interior, 128, self.kernel), self.interior, 128, verbose = False)
        self.assertListEqual(fixed.surgery, [0.5], msg = "Surgery not applied at the jump.")
        self.assertAlmostEqual(fixed(0.5), self.interior(0.5), places = 12, msg = "sigma_k(t_i) != sigma(t_i).")
        self.assertLessEqual(fixed.inverse_lipschitz, self.interior.normalizer * (1 + 1e-6),
                             msg = "Inverse clock breaks the Lipschitz bound.")
        self.assertTrue(np.all(np.diff(fixed.values) > 0), msg = "Repaired clock is not increasing.")


class TestSequences(unittest.TestCase):
    """Test the approximating and density sequences."""

    @classmethod
    def setUp(cls):
        """Set up the scalar step scenario."""
        cls.scenario = loaders.step_linear()
        cls.kernel = MollifierKernel(cls.scenario.support)

    def test_density(self):
        """Test density_sequence() paths are AC, converge and keep the variation bound."""
        paths = density_sequence(self.scenario.path, (8, 32), self.kernel, grid = 2 ** 10)
        for path in paths:
            self.assertTrue(path.is_absolutely_continuous(), msg = "u_k jumps.")
            self.assertLessEqual(path.total_variation, 1.0 + 1e-9, msg = "Var(u_k) exceeds Var(phi).")
            self.assertEqual(path(0.25)[0], 0.0, msg = "u_k moved before the jump.")
            self.assertEqual(path(0.75)[0], 1.0, msg = "u_k has not reached the right limit.")
        with self.assertRaises(ConfigurationError, msg = "Decreasing ks accepted."):
            density_sequence(self.scenario.path, (8, 4))

    def test_approximating(self):
        """Test approximating_sequence() members of the scalar step."""
        gc = build_completion(self.scenario.path, grid = 2 ** 10)
        member, = approximating_sequence(gc, self.scenario.dynamics, self.scenario.v, self.scenario.x0, [8],
                                         self.kernel, 1e-3)
        self.assertEqual(member.k, 8, msg = "Member index is wrong.")
        self.assertEqual(member.u([0.25])[0, 0], 0.0, msg = "u_k moved before the jump.")
        self.assertAlmostEqual(member.x([1.0])[0, 0], np.e, places = 8, msg = "x_k(b) is not exp(u_k(b)).")
        self.assertLessEqual(member.variation, 1.0 + 1e-9, msg = "Var(u_k) exceeds Var(phi).")
        self.assertAlmostEqual(member.variation, 1.0, places = 9, msg = "Var(u_k) of a monotone u_k is not 1.")
        self.assertAlmostEqual(member.variation, member.as_path().total_variation, places = 12,
                               msg = "Var(u_k) is not the variation of u_k.")
        self.assertAlmostEqual(member.trajectory()(0.25)[0], 1.0, places = 12, msg = "Trajectory moved early.")

    def test_against_caratheodory(self):
        """Test x_k agrees with the Caratheodory solution driven by u_k, on the step and the oscillating input."""
        for scenario, kernel in ((self.scenario, self.kernel), (loaders.ex21(k = 4), None)):
            gc = build_completion(scenario.path, grid = 2 ** 10)
            member, = approximating_sequence(gc, scenario.dynamics, scenario.v, scenario.x0, [8], kernel, 1e-3)
            direct = integrate_caratheodory(scenario.dynamics, member.as_path(), scenario.v, scenario.x0, 1e-3)
            times = member.control.phi0
            error = np.max(np.abs(member.x(times) - direct.sample(times)))
            self.assertLessEqual(error, 1e-6, msg = f"x_k of {scenario.name} differs from the direct solution.")

    def test_variation_clock_controls(self):
        """Test variation_clock_controls() Lipschitz constant."""
        ramp = BVPath.piecewise_linear([0.0, 0.5, 1.0], [[0.0], [1.0], [0.0]])
        control = variation_clock_controls(ramp, grid = 256)
        self.assertLessEqual(control.lipschitz, 3.0 * (1 + 1e-9), msg = "L exceeds b - a + Var(u_k).")
        with self.assertRaises(PreconditionError, msg = "Jumping input accepted."):
            variation_clock_controls(self.scenario.path)

    def test_tau_sequence(self):
        """Test tau_sequence() is exact at tau."""
        path = tau_sequence(np.sin, 0.3, 4)
        self.assertEqual(path(0.3)[0], np.sin(0.3), msg = "Interpolant is not exact at tau.")
        self.assertEqual(len(path.knots), 6, msg = "tau was not added as a knot.")
        with self.assertRaises(ConfigurationError, msg = "tau outside [a, b] accepted."):
            tau_sequence(np.sin, 1.5, 4)

    def test_tau_limit(self):
        """Test the oscillating family with phi_k^tau converges to the limit pair at tau and in L1."""
        target = _limit_pair()
        for tau in (0.3, 1.0):
            errors, l1 = [], []
            for k in (25, 100, 400):
                path, x = _tau_member(k, tau)
                self.assertAlmostEqual(path(tau)[2], _phi(tau), places = 12, msg = "phi_k^tau is not exact at tau.")
                self.assertAlmostEqual(x(tau)[3], np.exp(_phi(tau) - _phi(0.0)), places = 6,
                                       msg = f"x_4 at tau={tau} is not exp(phi(tau) - phi(0)) for k={k}.")
                self.assertLessEqual(np.linalg.norm(x(tau) - ex21_limit(tau, _phi)), 3 / np.sqrt(k),
                                     msg = f"x_k(tau) is far from the limit state at tau={tau}, k={k}.")
                candidate = StatePair.from_objects(path, x)
                errors.append(limit_error(target, candidate, tau))
                l1.append(l1_error(target, candidate))
                self.assertLessEqual(errors[-1], 5 / np.sqrt(k), msg = f"Error at tau={tau}, k={k} is too large.")
            self.assertTrue(errors[0] > errors[1] > errors[2], msg = f"Errors at tau={tau} do not decrease: {errors}")
            self.assertTrue(l1[1] < l1[0] / 1.5 and l1[2] < l1[1] / 1.5, msg = f"L1 errors stall: {l1}")


class TestDependenceProbe(unittest.TestCase):
    """Test dependence_probe()."""

    def test_zero_distance(self):
        """Test identical inputs and states give ratio 0."""
        scenario = loaders.step_linear()
        step = BVPath.step(0.0, 1.0, 0.5, [0.0], [1.0])
        result = dependence_probe(scenario.dynamics, [(step, step)], scenario.v, [1.0], [1.0], grid = 256)
        self.assertEqual(result.ratio, 0.0, msg = "Zero input distance gives a nonzero ratio.")
        self.assertEqual(len(result.ratios), 11, msg = "Default probe times are not 11 points.")

    def test_noncommuting(self):
        """Test dependence_probe() refuses non-commuting fields."""
        scenario = loaders.step_noncomm()
        with self.assertRaises(PreconditionError, msg = "Non-commuting fields accepted."):
            dependence_probe(scenario.dynamics, [], SampledControl.empty(0.0, 1.0), [0.0, 0.0], [0.0, 0.0])
