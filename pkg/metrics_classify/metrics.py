"""Pseudo-metrics on observed states and nearest-neighbor classification under them.

Every metric is a nonnegative weight per observed grid point:

    dense      phi_k q_k     (learned density)
    intrinsic  w_k q_k       (weight of the reaction-diffusion equation)
    l2         q_k
    atoms      weight_j at the sensor points only

so distance_sq(a, b) = sum_j weight_j (a_j - b_j)^2 over the metric's points. Only u is observed.
"""
import dataclasses

import numpy as np

from common.grid_quadrature import Density, Field, Grid, check_same_grid
from metrics_classify.sensors import Measurement, MeasurementMismatchError, SensorSet

DENSE = 'dense'
ATOMS = 'atoms'
INTRINSIC = 'intrinsic'
L2 = 'l2'


@dataclasses.dataclass(frozen=True, eq=False)
class Metric:
    kind: str
    grid: Grid
    indices: np.ndarray
    weights: np.ndarray
    sensors: SensorSet = None
    density: Density = None
    name: str = ''

    @classmethod
    def dense(cls, phi, name=None):
        return cls(DENSE, phi.grid, np.arange(phi.grid.n_points), phi.values * phi.grid.quad_weights,
                   density=phi, name=name or DENSE)

    @classmethod
    def atoms(cls, sensors, name=None):
        return cls(ATOMS, sensors.grid, sensors.indices, sensors.weights, sensors=sensors,
                   name=name or 'atoms:' + '|'.join('%g' % x for x in sensors.locations))

    @classmethod
    def intrinsic(cls, w, name=None):
        if np.any(w.values <= 0):
            raise ValueError('Intrinsic weight must be strictly positive')
        return cls(INTRINSIC, w.grid, np.arange(w.grid.n_points), w.values * w.grid.quad_weights,
                   name=name or INTRINSIC)

    @classmethod
    def l2(cls, grid, name=None):
        return cls(L2, grid, np.arange(grid.n_points), np.array(grid.quad_weights), name=name or L2)

    def scaled(self, factor):
        return dataclasses.replace(self, weights=self.weights * factor)

    def observe(self, operand):
        """Values of a Field, Measurement or flat state vector at the metric's points."""
        if isinstance(operand, Measurement):
            if self.kind != ATOMS:
                raise MeasurementMismatchError(
                    'A %s metric needs full fields, not point measurements' % self.kind)
            if not (operand.sensors.grid == self.grid
                    and np.array_equal(operand.sensors.indices, self.indices)):
                raise MeasurementMismatchError(
                    'Measurement sensors at %s do not match metric sensors at %s' % (
                        operand.sensors.locations.tolist(), self.grid.x[self.indices].tolist()))
            return operand.values
        if isinstance(operand, Field):
            check_same_grid(self, operand)
            return operand.values[self.indices]
        values = np.asarray(operand, dtype=float)
        if values.ndim != 1 or len(values) < self.grid.n_points:
            raise MeasurementMismatchError('State of shape %s does not cover the %d-point grid' % (
                values.shape, self.grid.n_points))
        return values[:self.grid.n_points][self.indices]


def weighted_sq_distances(rows, query, weights):
    """sum_j weights_j (rows[i, j] - query_j)^2 for every row i."""
    return ((rows - query) ** 2) @ weights


def distance_sq(a, b, metric):
    """Squared pseudo-distance between two observed states under metric."""
    return float(weighted_sq_distances(metric.observe(a)[np.newaxis, :], metric.observe(b),
                                       metric.weights)[0])


class NearestNeighborClassifier:
    """1-nearest-neighbor over a labeled library with the library embedding precomputed."""

    def __init__(self, library, metric):
        if len(library) == 0:
            raise ValueError('Cannot classify against an empty library')
        if library.system.grid != metric.grid:
            raise MeasurementMismatchError('Library grid %s differs from metric grid %s' % (
                library.system.grid, metric.grid))
        self.metric = metric
        self.labels = library.labels
        self.rows = library.u_matrix()[:, metric.indices]

    @property
    def name(self):
        return self.metric.name

    def nearest(self, query):
        """(label, library index, squared distance) of the closest library state; lowest index on ties."""
        distances = weighted_sq_distances(self.rows, self.metric.observe(query), self.metric.weights)
        index = int(np.argmin(distances))
        return int(self.labels[index]), index, float(distances[index])

    def predict(self, query):
        return self.nearest(query)[0]


def nearest_neighbor_classify(query, library, metric):
    """Label of the library state nearest query, with its index and squared distance."""
    return NearestNeighborClassifier(library, metric).nearest(query)
