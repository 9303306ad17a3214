import unittest
from unittest import mock
from bvsim.base import ConfigurationError
from bvsim.data import loaders
from bvsim.modeling.integrator import Trajectory, ex21_analytic
from bvsim.utils.evaluate import (CLOSED_FORM_SECONDS, CRITERIA, CriterionResult, closed_form, rk4_order, run_criteria,
                                  verify_scenario, wall_clock)


def _exact_member(k, seconds = 0.0):
    def sampler(ts):
        return ex21_analytic(k, ts).T

    return Trajectory(0.0, 1.0, lambda t: ex21_analytic(k, t), 6, sampler = sampler), seconds


def _slow_member(k):
    return _exact_member(k, seconds = CLOSED_FORM_SECONDS + 1.0 if k == 20 else 0.0)


class TestEvaluate(unittest.TestCase):
    """Test the acceptance suite runner."""

    def test_run_criteria(self):
        """Test run_criteria() on the cheap checks."""
        results = run_criteria(['dsl', 'clock'])
        self.assertListEqual([result.name for result in results], ['dsl', 'clock'], msg = "Order not kept.")
        for result in results:
            self.assertIsInstance(result, CriterionResult, msg = "Result has the wrong type.")
            self.assertTrue(result.passed, msg = str(result))
            self.assertGreaterEqual(result.seconds, 0.0, msg = "Timing not recorded.")
        self.assertTrue(str(results[0]).startswith('[PASS] dsl: '), msg = "Result formatting changed.")

    def test_unknown(self):
        """Test unknown names and family scenarios are rejected."""
        self.assertIn('certificate', CRITERIA, msg = "Certificate check not registered.")
        with self.assertRaises(ConfigurationError, msg = "Unknown criterion accepted."):
            run_criteria(['nope'])
        with self.assertRaises(ConfigurationError, msg = "Family scenario verified without k."):
            verify_scenario(loaders.ex21())

    def test_rk4_order(self):
        """Test the order check on x' = x u' sees fourth-order convergence above roundoff."""
        result = rk4_order()
        self.assertTrue(result.passed, msg = str(result))
        self.assertGreater(result.measured['err_0.05'], 1e-10, msg = "Error is at roundoff, the order is not visible.")
        self.assertTrue(12 <= result.measured['ratio'] <= 20, msg = f"Ratio {result.measured['ratio']} is not near 16.")

    def test_closed_form_timing(self):
        """Test closed_form() fails a k that takes longer than its time limit, even when exact."""
        with mock.patch('bvsim.utils.evaluate._ex21_member', _exact_member):
            result = closed_form()
        self.assertTrue(result.passed, msg = str(result))
        with mock.patch('bvsim.utils.evaluate._ex21_member', _slow_member):
            result = closed_form()
        self.assertFalse(result.passed, msg = "A slow k passed the closed-form check.")
        self.assertLessEqual(result.measured['err_k20'], 1e-12, msg = "Exact member reported with an error.")

    def test_wall_clock(self):
        """Test the suite-wide time limit."""
        results = [CriterionResult('a', True, '', seconds = 50.0), CriterionResult('b', True, '', seconds = 20.0)]
        self.assertFalse(wall_clock(results).passed, msg = "70 s accepted.")
        self.assertTrue(wall_clock(results[:1]).passed, msg = "50 s rejected.")
        self.assertEqual(wall_clock(results).measured['seconds'], 70.0, msg = "Total time is wrong.")
        self.assertEqual(wall_clock(results).name, 'wall_clock', msg = "Check is misnamed.")
