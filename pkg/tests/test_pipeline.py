import re
import unittest
from bvsim.utils.pipeline import _get_datestr, hyperparam_space, parallel_map


class TestPipeline(unittest.TestCase):
    """Test pipeline helpers."""

    def test_hyperparam_space(self):
        """Test hyperparam_space()."""
        expected = [{'grid': 1024, 'step': 1e-3}, {'grid': 1024, 'step': 5e-4},
                    {'grid': 4096, 'step': 1e-3}, {'grid': 4096, 'step': 5e-4}]
        result = hyperparam_space([{}], [('grid', (1024, 4096)), ('step', (1e-3, 5e-4))])
        self.assertListEqual(result, expected, msg = "Search space is not the cartesian product.")
        self.assertListEqual(hyperparam_space([{'k': 8}], []), [{'k': 8}], msg = "Fixed values are lost.")

    def test_parallel_map(self):
        """Test parallel_map() keeps the input order."""
        items = list(range(20))
        expected = [item ** 2 for item in items]
        self.assertListEqual(parallel_map(lambda item: item ** 2, items), expected, msg = "Sequential map is wrong.")
        self.assertListEqual(parallel_map(lambda item: item ** 2, items, n_jobs = 4), expected,
                             msg = "Threaded map lost the order.")

    def test_datestr(self):
        """Test _get_datestr() format."""
        self.assertRegex(_get_datestr(), re.compile(r'^\d{4}(\.\d{2}){5}$'), msg = "Date string format changed.")
