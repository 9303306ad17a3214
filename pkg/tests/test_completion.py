import unittest
import numpy as np
from bvsim.base import ConfigurationError, DomainError
from bvsim.data.bvpath import BVPath, ControlSet, TableSegment
from bvsim.modeling.completion import (Bridge, SpaceTimeControl, bridge, build_completion, canonical_clock, preimage,
                                       variation_budget)


class TestBridge(unittest.TestCase):
    """Test Bridge and bridge()."""

    def test_default(self):
        """Test bridge() chords."""
        unit = ControlSet(2, [0, 0], [1, 1])
        arc_minus, arc_plus = bridge([0, 0], [0, 0], [0, 0], unit)
        self.assertEqual(arc_minus.variation + arc_plus.variation, 0.0, msg = "Constant triple has moving arcs.")

        arc_minus, arc_plus = bridge([0, 0], [1, 1], [1, 1], unit)
        self.assertAlmostEqual(arc_minus.variation, np.sqrt(2), places = 14, msg = "Chord length is wrong.")
        self.assertTrue(arc_minus.satisfies_whitney(1.0), msg = "Chord violates M = 1.")
        with self.assertRaises(DomainError, msg = "Jump value outside U accepted."):
            bridge([0, 0], [2, 2], [2, 2], unit)

    def test_polyline(self):
        """Test Bridge on a two-leg polyline."""
        legs = Bridge([[0, 0], [1, 0], [1, 1]])
        self.assertEqual(legs.variation, 2.0, msg = "Polyline length is wrong.")
        self.assertTrue(legs.satisfies_whitney(1.5), msg = "2 <= 1.5 sqrt(2) rejected.")
        self.assertFalse(legs.satisfies_whitney(1.4), msg = "2 > 1.4 sqrt(2) accepted.")
        np.testing.assert_allclose(legs.evaluate(0.25), [0.5, 0.0])
        np.testing.assert_allclose(legs.evaluate(0.75), [1.0, 0.5])
        self.assertTrue(Bridge([[0], [1], [0]]).is_loop, msg = "Closed polyline is not a loop.")


class TestClock(unittest.TestCase):
    """Test canonical_clock()."""

    @classmethod
    def setUp(cls):
        """Set up the step and a two-jump staircase."""
        cls.step = BVPath.step(0.0, 1.0, 0.5, [0.0], [1.0])
        segments = [TableSegment([0.0, 1 / 3], [[0.0], [0.0]]), TableSegment([1 / 3, 2 / 3], [[1.0], [1.0]]),
                    TableSegment([2 / 3, 1.0], [[2.0], [2.0]])]
        cls.stairs = BVPath.from_segments([0.0, 1 / 3, 2 / 3, 1.0], segments)

    def test_identity(self):
        """Test canonical_clock() of a constant path."""
        clock = canonical_clock(BVPath.constant(0.0, 1.0, [1.0]))
        for t in (0.0, 0.3, 1.0):
            self.assertAlmostEqual(clock(t), t, places = 15, msg = "Constant path clock is not the identity.")

    def test_step(self):
        """Test canonical_clock() hand values."""
        clock = canonical_clock(self.step)
        self.assertListEqual([clock(0.25), clock(0.5), clock(0.75)], [0.125, 0.75, 0.875],
                             msg = "Step clock values are wrong.")
        self.assertTupleEqual(clock.limits(0.5), (0.25, 0.75), msg = "Step clock limits are wrong.")
        self.assertEqual(clock.normalizer, 2.0, msg = "Normalizer is not b - a + Var u.")
        self.assertAlmostEqual(canonical_clock(self.stairs)(2 / 3), 8 / 9, places = 14,
                               msg = "Staircase clock value is wrong.")

    def test_sample(self):
        """Test Clock.sample() against pointwise calls and its odd extension."""
        clock = canonical_clock(self.step)
        times = np.linspace(0.0, 1.0, 21)
        np.testing.assert_array_equal(clock.sample(times), [clock(t) for t in times])

        identity = canonical_clock(BVPath.constant(0.0, 1.0, [0.0]))
        np.testing.assert_allclose(identity.sample([-0.2, 1.3], extend = True), [-0.2, 1.3], atol = 1e-15)
        with self.assertRaises(DomainError, msg = "Times outside [a, b] accepted without extension."):
            identity.sample([-0.2])

    def test_jump_table(self):
        """Test Clock.jump_table."""
        table = canonical_clock(self.stairs).jump_table
        self.assertEqual(len(table), 2, msg = "Number of clock jumps is wrong.")
        np.testing.assert_allclose(table[:, 0], [1 / 3, 2 / 3])


class TestCompletion(unittest.TestCase):
    """Test build_completion() and preimage()."""

    @classmethod
    def setUp(cls):
        """Set up the step and a two-dimensional jump."""
        cls.step = BVPath.step(0.0, 1.0, 0.5, [0.0], [1.0])
        cls.ramp = BVPath.piecewise_linear([0.0, 1.0], [[0.0], [1.0]])
        box = ControlSet(2, [0, 0], [1, 1], whitney = 1.5)
        cls.jump = BVPath.step(0.0, 1.0, 0.5, [0.0, 0.0], [1.0, 1.0], control_set = box)
        cls.legs = [None, ([[0, 0], [1, 0], [1, 1]], None), None]

    def _identity_error(self, gc):
        times = np.union1d(np.linspace(gc.a, gc.b, 1000), gc.path.breakpoints)
        worst = 0.0
        for t in times:
            s_t, u_t = gc.evaluate(gc.clock(t))
            worst = max(worst, abs(s_t - t), float(np.max(np.abs(u_t - gc.path(t)))))
        return worst

    def test_no_jump(self):
        """Test build_completion() of a continuous input is a bijection."""
        gc = build_completion(self.ramp, grid = 256)
        self.assertTrue(np.all(np.diff(gc.phi0) > 0), msg = "phi0 is flat without jumps.")
        s1, s2 = preimage(gc, 0.3)
        self.assertEqual(s1, s2, msg = "Pre-image of a continuity point is not degenerate.")
        self.assertAlmostEqual(s1, gc.clock(0.3), places = 14, msg = "Pre-image disagrees with the clock.")
        self.assertTupleEqual(preimage(gc, 0.0), (0.0, 0.0), msg = "Pre-image of a is not [0, 0].")
        self.assertLessEqual(self._identity_error(gc), 1e-9, msg = "Clock identity fails.")

    def test_step(self):
        """Test build_completion() of the scalar step."""
        gc = build_completion(self.step, grid = 256)
        s1, s2 = preimage(gc, 0.5)
        self.assertAlmostEqual(s1, 0.25, places = 12, msg = "Flat interval starts at the wrong place.")
        self.assertAlmostEqual(s2, 0.75, places = 12, msg = "Flat interval ends at the wrong place.")
        self.assertAlmostEqual(gc.variation, 2.0, places = 12, msg = "Completion length is wrong.")
        _, u_mid = gc.evaluate(0.5)
        self.assertAlmostEqual(u_mid[0], 0.5, places = 12, msg = "phi does not cross the jump.")
        self.assertLessEqual(self._identity_error(gc), 1e-9, msg = "Clock identity fails.")

    def test_lipschitz(self):
        """Test the arclength parameterisation has constant speed."""
        gc = build_completion(self.step, grid = 256)
        np.testing.assert_allclose(gc.chord_speeds, gc.variation, rtol = 1e-9)
        self.assertEqual(gc.clock.normalizer, gc.variation, msg = "Clock normalizer is not the completion length.")

    def test_override(self):
        """Test build_completion() with a polyline override."""
        gc = build_completion(self.jump, bridges = self.legs, grid = 512)
        self.assertAlmostEqual(gc.variation, 3.0, places = 12, msg = "Override length not used.")
        _, corner = gc.evaluate(np.mean(preimage(gc, 0.5)))
        np.testing.assert_allclose(corner, [1.0, 0.0], atol = 1e-12)
        self.assertLessEqual(self._identity_error(gc), 1e-9, msg = "Clock identity fails with an override.")
        variation, bound = variation_budget(gc)
        self.assertLessEqual(variation, bound, msg = "Completion exceeds the variation budget.")

    def test_override_errors(self):
        """Test build_completion() rejects invalid overrides."""
        with self.assertRaises(ConfigurationError, msg = "Override with wrong ends accepted."):
            build_completion(self.jump, bridges = [None, ([[0, 0], [1, 0]], None), None])
        with self.assertRaises(DomainError, msg = "Override leaving U accepted."):
            build_completion(self.jump, bridges = [None, ([[0, 0], [2, 0], [1, 1]], None), None])
        with self.assertRaises(ConfigurationError, msg = "Override breaking the Whitney bound accepted."):
            build_completion(self.jump, bridges = [None, ([[0, 0], [1, 0], [0, 1], [1, 1]], None), None])
        with self.assertRaises(ConfigurationError, msg = "Wrong number of overrides accepted."):
            build_completion(self.jump, bridges = [None])

    def test_loop(self):
        """Test build_completion() accepts an explicit loop."""
        gc = build_completion(BVPath.constant(0.0, 1.0, [0.0]), bridges = [(None, [[0], [1], [0]]), None], grid = 64)
        self.assertAlmostEqual(gc.variation, 3.0, places = 12, msg = "Loop length not included.")
        s1, s2 = preimage(gc, 0.0)
        self.assertAlmostEqual(s2 - s1, 2 / 3, places = 12, msg = "Loop does not sit over t = a.")

    def test_reparameterized(self):
        """Test GraphCompletion.reparameterized() keeps the clock identity."""
        gc = build_completion(self.step, grid = 256).reparameterized(lambda s: s ** 2)
        self.assertLessEqual(self._identity_error(gc), 1e-9, msg = "Clock identity fails after reparameterisation.")

    def test_space_time_control(self):
        """Test SpaceTimeControl validation."""
        with self.assertRaises(ConfigurationError, msg = "Grid not spanning [0, 1] accepted."):
            SpaceTimeControl([0.0, 0.5], [0.0, 1.0], [[0.0], [1.0]])
        with self.assertRaises(ConfigurationError, msg = "Decreasing phi0 accepted."):
            SpaceTimeControl([0.0, 1.0], [1.0, 0.0], [[0.0], [1.0]])
        control = SpaceTimeControl([0.0, 0.5, 1.0], [0.0, 0.5, 0.5], [[0.0], [0.0], [1.0]])
        self.assertEqual(control.variation, 1.5, msg = "Chord variation is wrong.")
        self.assertEqual(control.lipschitz, 2.0, msg = "Lipschitz constant is wrong.")
