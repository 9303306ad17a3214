import os
import csv
import shutil
import unittest
import numpy as np
from bvsim.data import fileio as io
from bvsim.modeling.completion import SpaceTimeControl
from bvsim.modeling.integrator import Trajectory
from bvsim.utils.metrics import ApproxReport


def _read(path):
    with open(path, 'r', encoding = 'utf-8', newline = '') as inf:
        return list(csv.reader(inf))


class TestFileIO(unittest.TestCase):
    """Test fileio.py."""

    @classmethod
    def setUp(cls):
        """Set up the output directory and a small report."""
        cls.out = 'tests/out'
        cls.report = ApproxReport(budget = 1.0)
        cls.report.add(32, 1.0, 0.01, 0.02, 1.0, 2.0)
        cls.report.add(8, 1.0, 0.1, 0.2, 1.0, 2.0)
        cls.report.add(8, 0.5, 0.3, 0.2, 1.0, 2.0)

    @classmethod
    def tearDown(cls):
        """Remove written files."""
        if os.path.exists(cls.out):
            shutil.rmtree(cls.out)

    def test_headers(self):
        """Test the CSV headers."""
        self.assertListEqual(io.trajectory_header(2), ['t', 'x_1', 'x_2', 'side'], msg = "Trajectory header changed.")
        self.assertListEqual(io.completion_header(1), ['s', 'phi0', 'phi_1'], msg = "Completion header changed.")
        self.assertListEqual(ApproxReport.columns, ['k', 'tau', 'pointwise_err', 'l1_err', 'var_uk', 'sup_xk'],
                             msg = "Report header changed.")

    def test_write_trajectory(self):
        """Test fileio.write_trajectory() frames the jumps with envelope rows."""
        jumps = {0.5: (np.array([1.0]), np.array([3.0]))}
        x = Trajectory(0.0, 1.0, lambda t: np.array([1.0 if t < 0.5 else 3.0]), 1, jumps)
        path = os.path.join(self.out, 'trajectory.csv')
        with io.csv_writer(path) as writer:
            rows = io.write_trajectory(writer, x, [0.0, 1.0])
        self.assertEqual(rows, 5, msg = "A jump must add three rows.")
        lines = _read(path)
        self.assertListEqual(lines[0], ['t', 'x_1', 'side'], msg = "Header not written.")
        sides = [line[-1] for line in lines[1:]]
        self.assertSetEqual(set(sides), {'', 'left', 'right'}, msg = "Unexpected side flags.")
        self.assertListEqual(sides, ['', 'left', '', 'right', ''], msg = "Sides are wrong.")
        self.assertListEqual([float(line[1]) for line in lines[1:]], [1.0, 1.0, 3.0, 3.0, 3.0],
                             msg = "Values are wrong.")

        with io.csv_writer(path) as writer:
            self.assertEqual(io.write_trajectory(writer, x, [0.0, 1.0], envelope = False), 3,
                             msg = "Envelope rows written when disabled.")
        self.assertListEqual([line[-1] for line in _read(path)[1:]], ['', '', ''], msg = "Plain rows are flagged.")

    def test_write_completion(self):
        """Test fileio.write_completion()."""
        control = SpaceTimeControl([0.0, 0.5, 1.0], [0.0, 0.5, 0.5], [[0.0], [0.0], [1.0]])
        path = os.path.join(self.out, 'completion.csv')
        with io.csv_writer(path) as writer:
            self.assertEqual(io.write_completion(writer, control), 3, msg = "Row count is wrong.")
        self.assertListEqual(_read(path)[-1], ['1.0', '0.5', '1.0'], msg = "Last row is wrong.")

    def test_write_report(self):
        """Test fileio.write_report() sorts by k, then tau."""
        path = os.path.join(self.out, 'report.csv')
        with io.csv_writer(path) as writer:
            io.write_report(writer, self.report)
        lines = _read(path)
        self.assertListEqual([(line[0], line[1]) for line in lines[1:]], [('8', '0.5'), ('8', '1.0'), ('32', '1.0')],
                             msg = "Rows are not ordered.")

    def test_write_cost(self):
        """Test fileio.write_cost()."""
        path = os.path.join(self.out, 'cost.csv')
        with io.csv_writer(path) as writer:
            self.assertEqual(io.write_cost(writer, {100: 0.02, 25: 0.1}), 2, msg = "Row count is wrong.")
        self.assertListEqual(_read(path), [['k', 'cost'], ['25', '0.1'], ['100', '0.02']], msg = "Cost table is wrong.")

    def test_store_report(self):
        """Test fileio.store_report() and fileio.load_report()."""
        self.report.record('cost', 8, 0.5)
        os.makedirs(self.out, exist_ok = True)
        path = io.store_report(self.report, os.path.join(self.out, 'report'))
        self.assertTrue(path.endswith('.rpt'), msg = "Stored report has the wrong extension.")
        loaded = io.load_report(os.path.join(self.out, 'report'))
        self.assertEqual(loaded.budget, 1.0, msg = "Budget not restored.")
        self.assertListEqual(loaded.rows, self.report.rows, msg = "Rows not restored.")
        self.assertEqual(loaded.extras['cost'][8], 0.5, msg = "Extras not restored.")
