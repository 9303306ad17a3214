import unittest
import numpy as np
from bvsim.data import loaders
from bvsim.utils.approximation import build_report, family_sequence
from bvsim.utils.convergence import Certificate, ConvergenceMonitor, certificate
from bvsim.utils.lie import commutativity_report, sample_points
from bvsim.utils.metrics import ApproxReport


class TestConvergenceMonitor(unittest.TestCase):
    """Test ConvergenceMonitor."""

    @classmethod
    def setUp(cls):
        """Set up score sequences."""
        cls.scores = [0.4, 0.2, 0.3, 0.1]
        cls.initialised = {'slack': 1e-9, 'low_is_good': True, 'verbose': False, 'best_score': None,
                           'last_score': None, 'best_step': 0, 'step': 0, 'violations': []}

    def test_initialize(self):
        """Test ConvergenceMonitor.__init__()."""
        monitor = ConvergenceMonitor()
        self.assertDictEqual(monitor.__dict__, self.initialised, msg = "A variable is initialized incorrectly.")

    def test_low_is_good(self):
        """Test ConvergenceMonitor.__call__() on decreasing scores."""
        monitor = ConvergenceMonitor()
        broken = [monitor(score, k) for k, score in zip((8, 32, 128, 512), self.scores)]
        self.assertListEqual(broken, [False, False, True, False], msg = "Violations flagged at the wrong steps.")
        self.assertListEqual(monitor.violations, [(128, 0.2, 0.3)], msg = "Violation record is wrong.")
        self.assertFalse(monitor.monotone, msg = "Non-monotone sequence reported monotone.")
        self.assertEqual(monitor.best_score, 0.1, msg = "Best score is wrong.")
        self.assertEqual(monitor.best_step, 4, msg = "Best step is wrong.")

    def test_high_is_good(self):
        """Test ConvergenceMonitor.__call__() with low_is_good = False."""
        monitor = ConvergenceMonitor(low_is_good = False)
        for score in (0.1, 0.2, 0.2, 0.5):
            monitor(score)
        self.assertTrue(monitor.monotone, msg = "Increasing sequence reported non-monotone.")
        self.assertEqual(monitor.best_score, 0.5, msg = "Best score is wrong.")

    def test_slack(self):
        """Test ConvergenceMonitor.improves() honours the slack."""
        monitor = ConvergenceMonitor(slack = 1e-3)
        self.assertTrue(monitor.improves(0.1005, 0.1), msg = "Wiggle within the slack rejected.")
        self.assertFalse(monitor.improves(0.102, 0.1), msg = "Increase beyond the slack accepted.")


class TestCertificate(unittest.TestCase):
    """Test certificate()."""

    def _report(self, errors, variation = 1.0, budget = 1.0):
        report = ApproxReport(budget)
        for k, err in zip((8, 32, 128), errors):
            report.add(k, 0.5, err, 0.0, variation, 1.0)
        return report

    def test_passed(self):
        """Test certificate() of a decreasing sweep."""
        result = certificate(self._report([1e-2, 1e-3, 1e-4]))
        self.assertIsInstance(result, Certificate, msg = "certificate() does not return a Certificate.")
        self.assertTrue(result.passed, msg = "Decreasing sweep not certified.")
        self.assertDictEqual(result.final_errors, {0.5: 1e-4}, msg = "Final errors are wrong.")
        self.assertTrue(result.verdict.startswith("BV simple"), msg = "Verdict is wrong.")

    def test_failures(self):
        """Test certificate() reasons."""
        increasing = certificate(self._report([1e-4, 1e-3, 1e-5]))
        self.assertFalse(increasing.passed, msg = "Increasing sweep certified.")
        self.assertIn("increased", increasing.reasons[0], msg = "Increase not reported.")

        large = certificate(self._report([1.0, 0.5, 0.1]))
        self.assertFalse(large.passed, msg = "Final error above tol certified.")
        self.assertIn(">= 0.001", large.reasons[0], msg = "Threshold not reported.")

        expensive = certificate(self._report([1e-2, 1e-3, 1e-4], variation = 1.5))
        self.assertFalse(expensive.passed, msg = "Variation above the budget certified.")
        self.assertEqual(len(expensive.reasons), 3, msg = "Every k over budget must be reported.")
        self.assertTrue(expensive.verdict.startswith("not certified"), msg = "Verdict is wrong.")
        self.assertTrue(certificate(self._report([1e-2, 1e-3, 1e-4], 1.5, None)).passed,
                        msg = "Missing budget must not be checked.")

    def test_oscillating_family(self):
        """Test the oscillating family is not certified BV simple: Var(u_k) grows and [g1, g2] does not vanish."""
        scenario = loaders.ex21()
        members = family_sequence(scenario.build, scenario.v, scenario.x0, (25, 100), 1e-3)
        report = build_report(scenario.limit_pair(), members, [0.5, 1.0], budget = 1.0)
        for k, variation in report.variations().items():
            self.assertAlmostEqual(variation, np.sqrt(k + 1), delta = 1e-3 * np.sqrt(k + 1),
                                   msg = f"Var(u_k) is not sqrt(k + 1) at k={k}.")
        verdict = certificate(report)
        self.assertFalse(verdict.passed, msg = "Unbounded variation certified.")
        self.assertTrue(verdict.verdict.startswith("not certified"), msg = "Verdict is wrong.")
        self.assertTrue(any("exceeds the budget" in reason for reason in verdict.reasons),
                        msg = "Variation budget not named among the reasons.")
        fields = commutativity_report(scenario.dynamics, sample_points(scenario.dynamics.n, seed = 42))
        self.assertFalse(fields.commuting, msg = "The input fields are reported commuting.")
