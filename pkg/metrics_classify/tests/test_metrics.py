import unittest

import numpy as np

from common.grid_quadrature import Density, Field, Grid
from dynamics import attractors, systems
from library.generation import LabeledLibrary, LabeledState
from metrics_classify import metrics, sensors


def random_library(grid, n_states=30, seed=0):
    system = systems.RDSystem.build(grid)
    catalog = attractors.constant_attractor_catalog(system)
    rng = np.random.default_rng(seed)
    states = [LabeledState(Field(grid, rng.uniform(0.0, 1.0, grid.n_points)), None,
                           int(rng.integers(0, 2)), i) for i in range(n_states)]
    return LabeledLibrary(system, catalog, states)


class TestDistance(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(201)
        self.rng = np.random.default_rng(4)
        self.sensor_set = sensors.SensorSet.from_locations(self.grid, [-0.72, 0.72])
        self.all_metrics = [
            metrics.Metric.l2(self.grid),
            metrics.Metric.intrinsic(systems.rd_weight(self.grid)),
            metrics.Metric.dense(Density(self.grid, self.rng.uniform(0.0, 1.0, 201))),
            metrics.Metric.atoms(self.sensor_set),
        ]

    def test_identical_operands(self):
        u = Field(self.grid, self.rng.standard_normal(201))
        for metric in self.all_metrics:
            self.assertEqual(metrics.distance_sq(u, u, metric), 0.0)

    def test_two_point_metric(self):
        self.assertEqual(metrics.distance_sq(Field.constant(self.grid, 1.0),
                                             Field.constant(self.grid, 0.0),
                                             metrics.Metric.atoms(self.sensor_set)), 2.0)

    def test_one_point_metric(self):
        grid = Grid(51)
        metric = metrics.Metric.atoms(sensors.SensorSet.from_locations(grid, [0.0]))
        a = sensors.Measurement(metric.sensors, [0.3])
        b = Field.constant(grid, 0.1)
        self.assertAlmostEqual(metrics.distance_sq(a, b, metric), 0.04, delta=1e-15)

    def test_symmetric(self):
        u, v = (Field(self.grid, self.rng.standard_normal(201)) for _ in range(2))
        for metric in self.all_metrics:
            self.assertEqual(metrics.distance_sq(u, v, metric), metrics.distance_sq(v, u, metric))

    def test_dense_matches_weighted_norm(self):
        phi = Density(self.grid, self.rng.uniform(0.0, 1.0, 201))
        u, v = (Field(self.grid, self.rng.standard_normal(201)) for _ in range(2))
        expected = np.sum((u.values - v.values) ** 2 * phi.values * self.grid.quad_weights)
        self.assertAlmostEqual(metrics.distance_sq(u, v, metrics.Metric.dense(phi)), expected,
                               delta=1e-12)

    def test_atoms_see_only_sensor_values(self):
        metric = metrics.Metric.atoms(self.sensor_set)
        u = Field(self.grid, self.rng.standard_normal(201))
        values = np.array(u.values)
        values[self.sensor_set.indices + 1] += 5.0
        self.assertEqual(metrics.distance_sq(u, Field(self.grid, values), metric), 0.0)

    def test_measurements_need_atoms(self):
        measurement = sensors.Measurement(self.sensor_set, [0.0, 1.0])
        with self.assertRaises(sensors.MeasurementMismatchError):
            metrics.distance_sq(measurement, Field.constant(self.grid, 0.0), self.all_metrics[0])

    def test_measurement_sensor_mismatch(self):
        other = sensors.SensorSet.from_locations(self.grid, [-0.5, 0.5])
        with self.assertRaises(sensors.MeasurementMismatchError):
            metrics.distance_sq(sensors.Measurement(other, [0.0, 1.0]),
                                Field.constant(self.grid, 0.0),
                                metrics.Metric.atoms(self.sensor_set))


class TestNearestNeighbor(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(51)
        self.library = random_library(self.grid)
        self.rng = np.random.default_rng(8)
        self.sensor_set = sensors.SensorSet.from_locations(self.grid, [-0.72, 0.72])
        self.all_metrics = [
            metrics.Metric.l2(self.grid),
            metrics.Metric.dense(Density(self.grid, self.rng.uniform(0.0, 1.0, 51))),
            metrics.Metric.atoms(self.sensor_set),
        ]

    def test_library_member(self):
        for metric in self.all_metrics:
            label, index, distance = metrics.nearest_neighbor_classify(
                self.library.states[7].u0, self.library, metric)
            self.assertEqual(index, 7)
            self.assertEqual(label, self.library.states[7].label)
            self.assertEqual(distance, 0.0)

    def test_matches_exhaustive_scan(self):
        for metric in self.all_metrics:
            for _ in range(10):
                query = Field(self.grid, self.rng.uniform(0.0, 1.0, 51))
                distances = [metrics.distance_sq(query, state.u0, metric)
                             for state in self.library.states]
                best = int(np.argmin(distances))
                label, index, distance = metrics.nearest_neighbor_classify(
                    query, self.library, metric)
                self.assertEqual(index, best)
                self.assertEqual(label, self.library.states[best].label)
                self.assertAlmostEqual(distance, distances[best], delta=1e-12)

    def test_ties_go_to_lowest_index(self):
        states = list(self.library.states)
        states.append(states[3])
        library = LabeledLibrary(self.library.system, self.library.attractors, states)
        _, index, _ = metrics.nearest_neighbor_classify(states[3].u0, library,
                                                        self.all_metrics[0])
        self.assertEqual(index, 3)

    def test_scaling_never_changes_prediction(self):
        for metric in self.all_metrics:
            classifiers = [metrics.NearestNeighborClassifier(self.library, metric.scaled(factor))
                           for factor in (1.0, 4.0, 0.5)]
            for _ in range(10):
                query = Field(self.grid, self.rng.uniform(0.0, 1.0, 51))
                predictions = {classifier.nearest(query)[:2] for classifier in classifiers}
                self.assertEqual(len(predictions), 1)

    def test_measurement_query(self):
        metric = self.all_metrics[2]
        state = self.library.states[4]
        measurement = sensors.Measurement(self.sensor_set, self.sensor_set.sample(state.u0))
        label, _, distance = metrics.nearest_neighbor_classify(measurement, self.library, metric)
        self.assertEqual(label, state.label)
        self.assertEqual(distance, 0.0)


if __name__ == '__main__':
    unittest.main()
