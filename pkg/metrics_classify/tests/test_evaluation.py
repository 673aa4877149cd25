import unittest

import numpy as np

from dynamics import attractors
from library import generation
from library.tests.test_generation import FAST_LABELING, fast_setup
from metrics_classify import evaluation, metrics


class SimulationOracle:
    """Predicts by simulating the query, i.e. reproduces the ground truth."""
    name = 'oracle'

    def __init__(self, library):
        self.system = library.system
        self.catalog = library.attractors

    def predict(self, query):
        return attractors.classify_attractor(
            np.array(query.values), self.system, self.catalog, t_max=FAST_LABELING.t_max)


class TestMetricSpecs(unittest.TestCase):
    def test_parse(self):
        self.assertEqual(evaluation.parse_metric_spec('l2'), ('l2', None))
        self.assertEqual(evaluation.parse_metric_spec('sparse:0.9'), ('sparse', 0.9))
        self.assertEqual(evaluation.parse_metric_spec('atoms:-0.72|0.72'), ('atoms', [-0.72, 0.72]))

    def test_rejects_bad_specs(self):
        for spec in ('l1', 'dense:1.0', 'dense:x', 'atoms:', 'l2:3'):
            with self.assertRaises(evaluation.MetricSpecError):
                evaluation.parse_metric_spec(spec)

    def test_build_learned_metrics(self):
        system, catalog, spec = fast_setup()
        library = generation.build_library(system, catalog, spec, 4, seed=2,
                                           labeling=FAST_LABELING)
        dense = evaluation.build_metric('dense:0', library)
        sparse = evaluation.build_metric('sparse:0.9', library)
        intrinsic = evaluation.build_metric('intrinsic', library)
        self.assertEqual(dense.kind, metrics.DENSE)
        self.assertEqual(dense.density.lam, 0.0)
        self.assertEqual(sparse.kind, metrics.ATOMS)
        self.assertGreaterEqual(len(sparse.sensors), 1)
        self.assertEqual(intrinsic.kind, metrics.INTRINSIC)


class TestEvaluateError(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.system, cls.catalog, cls.spec = fast_setup()

    def evaluate(self, metric_list):
        return evaluation.evaluate_error(
            self.system, self.catalog, self.spec, [2, 3], metric_list, n_test=8, seed=4,
            labeling=FAST_LABELING)

    def test_oracle_has_zero_error(self):
        table = self.evaluate([SimulationOracle, 'l2', 'atoms:-0.5|0.5'])
        self.assertEqual(list(table.columns), evaluation.ERROR_COLUMNS)
        self.assertEqual(len(table), 6)
        oracle_rows = table[table['metric'] == 'oracle']
        self.assertTrue((oracle_rows['error'] == 0.0).all())
        self.assertTrue(((table['error'] >= 0) & (table['error'] <= 1)).all())
        self.assertTrue((table['n_test'] <= 8).all())
        self.assertEqual(list(table['n_labels_per_attractor'].unique()), [2, 3])

    def test_deterministic(self):
        first = self.evaluate(['l2'])
        second = self.evaluate(['l2'])
        self.assertTrue(first.equals(second))

    def test_draw_budget_reaches_library_generation(self):
        with self.assertRaises(generation.GenerationError):
            evaluation.evaluate_error(
                self.system, self.catalog, self.spec, [2], ['l2'], n_test=8, seed=4,
                labeling=FAST_LABELING, draw_budget_factor=0)


if __name__ == '__main__':
    unittest.main()
