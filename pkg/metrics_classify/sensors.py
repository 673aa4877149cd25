"""Sensor sets: sparse measurement locations, extraction from a learned density, and projection
of states onto the sensor coordinates."""
import dataclasses

import numpy as np
import pandas as pd

from common import grid_quadrature, json_utils
from common.grid_quadrature import Grid

SENSORS_VERSION = 'spml-sensors/1'
DEFAULT_MASS_FRACTION = 0.99


class Error(Exception):
    pass


class SensorError(Error):
    pass


class MeasurementMismatchError(Error):
    pass


class SensorFormatError(json_utils.ArtifactFormatError):
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class SensorSet:
    """Grid indices of the sensors, strictly increasing, with positive atom weights."""
    grid: Grid
    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        indices = np.array(self.indices, dtype=int)
        weights = np.array(self.weights, dtype=float)
        if indices.ndim != 1 or len(indices) == 0:
            raise SensorError('A sensor set needs at least one sensor')
        if weights.shape != indices.shape:
            raise SensorError('Got %d weights for %d sensors' % (len(weights), len(indices)))
        if indices[0] < 0 or indices[-1] >= self.grid.n_points:
            raise SensorError('Sensor index outside the grid')
        if np.any(np.diff(indices) <= 0):
            raise SensorError('Sensor locations must be strictly increasing after snapping '
                              'to the grid, got indices %s' % indices.tolist())
        if not np.all(weights > 0):
            raise SensorError('Sensor weights must be positive, got %s' % weights.tolist())
        indices.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, 'indices', indices)
        object.__setattr__(self, 'weights', weights)

    @classmethod
    def from_locations(cls, grid, locations, weights=None):
        """Snap locations to their nearest grid points."""
        locations = [float(location) for location in locations]
        for location in locations:
            if not grid.x_min <= location <= grid.x_max:
                raise SensorError('Sensor location %g outside [%g, %g]' % (
                    location, grid.x_min, grid.x_max))
        if weights is None:
            weights = np.ones(len(locations))
        return cls(grid, [grid.nearest_index(location) for location in locations], weights)

    @property
    def locations(self):
        return self.grid.x[self.indices]

    def __len__(self):
        return len(self.indices)

    def scaled(self, factor):
        return SensorSet(self.grid, self.indices, self.weights * factor)

    def sample(self, field):
        grid_quadrature.check_same_grid(self, field)
        return field.values[self.indices]


@dataclasses.dataclass(frozen=True, eq=False)
class Measurement:
    sensors: SensorSet
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.sensors),):
            raise MeasurementMismatchError('Measurement has %d values for %d sensors' % (
                values.size, len(self.sensors)))
        object.__setattr__(self, 'values', values)


def extract_sensors(phi, mass_fraction=DEFAULT_MASS_FRACTION):
    """Sensors at the concentrations of a density.

    Takes the fewest grid points (largest phi_k q_k first) holding at least mass_fraction of the total
    mass, merges contiguous runs of them, and places one sensor per run at its phi-weighted
    centroid, snapped to the grid. The atom weight is the run's mass.

    Raises:
        SensorError if phi is identically zero or mass_fraction is outside (0, 1].
    """
    if not 0 < mass_fraction <= 1:
        raise SensorError('mass_fraction must lie in (0, 1], got %r' % mass_fraction)
    grid = phi.grid
    mass = phi.values * grid.quad_weights
    total = mass.sum()
    if not total > 0:
        raise SensorError('Cannot place sensors for a density with zero mass')
    order = np.argsort(-mass, kind='stable')
    cumulative = np.cumsum(mass[order])
    n_selected = int(np.searchsorted(cumulative, mass_fraction * total * (1 - 1e-12))) + 1
    selected = np.zeros(grid.n_points, dtype=bool)
    selected[order[:min(n_selected, grid.n_points)]] = True

    indices = []
    weights = []
    start = None
    for k in range(grid.n_points + 1):
        inside = k < grid.n_points and selected[k]
        if inside and start is None:
            start = k
        elif not inside and start is not None:
            run = slice(start, k)
            run_phi = phi.values[run]
            centroid = float(np.sum(grid.x[run] * run_phi) / np.sum(run_phi))
            indices.append(grid.nearest_index(centroid))
            weights.append(float(mass[run].sum()))
            start = None
    return SensorSet(grid, indices, weights)


def _observation_order(values, sensors):
    # two sensors: right sensor first, matching the (x_plus, x_minus) observation plane
    return values[..., ::-1] if len(sensors) == 2 else values


def project_observation(state, sensors):
    """Sampled values of a Field at the sensors.

    With two sensors the value at the right sensor comes first, (u(x+), u(x-)); otherwise the
    values follow sensor order.
    """
    return tuple(float(value) for value in _observation_order(sensors.sample(state), sensors))


def project_trajectory(trajectory, system, sensors, label=None):
    """Observation-space path of a trajectory.

    Returns:
        pandas.DataFrame with column t, then x_plus and x_minus for two sensors (values at the
        right and left sensor) or u_0..u_{n-1} in sensor order otherwise, then label.
    """
    values = _observation_order(
        np.vstack([sensors.sample(system.u_field(state)) for state in trajectory.states]), sensors)
    frame = pd.DataFrame({'t': trajectory.times})
    if len(sensors) == 2:
        frame['x_plus'] = values[:, 0]
        frame['x_minus'] = values[:, 1]
    else:
        for j in range(len(sensors)):
            frame['u_%d' % j] = values[:, j]
    frame['label'] = label
    return frame


def sensors_to_json(sensors):
    return {'version': SENSORS_VERSION, 'grid': sensors.grid.to_json(),
            'locations': sensors.locations, 'weights': sensors.weights}


def save_sensors(path, sensors):
    json_utils.dump_json(path, sensors_to_json(sensors))


def load_sensors(path, grid=None):
    """SensorSet from a sensors file, on the file's grid or the given one."""
    data = json_utils.load_json(path, SENSORS_VERSION, error_class=SensorFormatError)
    try:
        if grid is None:
            grid = Grid.from_json(data['grid']) if 'grid' in data else Grid()
        return SensorSet.from_locations(grid, data['locations'], data['weights'])
    except (KeyError, TypeError, ValueError, grid_quadrature.Error) as err:
        raise SensorFormatError('Malformed sensors file %s: %r' % (path, err)) from err
    except SensorError as err:
        raise SensorFormatError('Invalid sensors in %s: %s' % (path, err)) from err
