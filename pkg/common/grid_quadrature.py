"""Uniform 1D grids, fields on them, trapezoidal quadrature and the weighted norms built on it.

Everything here is immutable once constructed. Field and Density values are stored as read-only
numpy arrays so the same objects can be shared between worker processes and threads.
"""
import dataclasses
import functools
from typing import Optional

import numpy as np

DEFAULT_N_POINTS = 201
DEFAULT_X_MIN = -1.0
DEFAULT_X_MAX = 1.0


class Error(Exception):
    pass


class GridMismatchError(Error):
    """Operands live on different grids (or have the wrong length)."""


class DomainError(Error):
    """Operand outside the domain of the operation (negative density, nonpositive weight, ...)."""


def _read_only(values):
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True)
class Grid:
    n_points: int = DEFAULT_N_POINTS
    x_min: float = DEFAULT_X_MIN
    x_max: float = DEFAULT_X_MAX

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise DomainError('Grid needs at least 3 points, got %r' % self.n_points)
        if not self.x_max > self.x_min:
            raise DomainError('Grid needs x_max > x_min, got [%r, %r]' % (self.x_min, self.x_max))

    @functools.cached_property
    def x(self):
        x = np.linspace(self.x_min, self.x_max, self.n_points)
        if self.is_symmetric():
            # exact antisymmetry keeps reflection identities exact
            x = 0.5 * (x - x[::-1])
        x.setflags(write=False)
        return x

    def is_symmetric(self):
        return self.x_min == -self.x_max

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @functools.cached_property
    def quad_weights(self):
        q = np.full(self.n_points, self.dx)
        q[0] = q[-1] = self.dx / 2
        q.setflags(write=False)
        return q

    @property
    def length(self):
        return self.x_max - self.x_min

    def nearest_index(self, location):
        """Index of the grid point closest to location (lowest index on a tie)."""
        return int(np.argmin(np.abs(self.x - location)))

    def to_json(self):
        return {'n': self.n_points, 'x_min': self.x_min, 'x_max': self.x_max}

    @classmethod
    def from_json(cls, data):
        return cls(n_points=int(data['n']), x_min=float(data['x_min']), x_max=float(data['x_max']))


@dataclasses.dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = _read_only(self.values)
        if values.shape != (self.grid.n_points,):
            raise GridMismatchError(
                'Field has shape %s, grid has %d points' % (values.shape, self.grid.n_points))
        if not np.all(np.isfinite(values)):
            raise DomainError('Field values must be finite')
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.n_points, float(value)))

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(grid.x))

    def __eq__(self, other):
        if not isinstance(other, Field):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.grid, self.values.tobytes()))

    def value_at(self, location):
        return float(self.values[self.grid.nearest_index(location)])

    def to_json(self):
        return {'grid': self.grid.to_json(), 'values': self.values.tolist()}

    @classmethod
    def from_json(cls, data):
        return cls(Grid.from_json(data['grid']), data['values'])


@dataclasses.dataclass(frozen=True, eq=False)
class Density:
    """Nonnegative weight phi defining the pseudo-metric ||u||_phi.

    alpha and lam record the regularization the density was learned with (None when it was not
    learned). zero=True is required to build an identically vanishing density.
    """
    grid: Grid
    values: np.ndarray
    alpha: Optional[float] = None
    lam: Optional[float] = None
    zero: bool = False

    def __post_init__(self):
        values = _read_only(self.values)
        if values.shape != (self.grid.n_points,):
            raise GridMismatchError(
                'Density has shape %s, grid has %d points' % (values.shape, self.grid.n_points))
        if not np.all(np.isfinite(values)):
            raise DomainError('Density values must be finite')
        if np.any(values < 0):
            raise DomainError('Density must be nonnegative, min value %g' % values.min())
        if not self.zero and not np.any(values > 0):
            raise DomainError('Density is identically zero; pass zero=True to allow it')
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, grid, value, **kwargs):
        return cls(grid, np.full(grid.n_points, float(value)), zero=(value == 0), **kwargs)

    def __eq__(self, other):
        if not isinstance(other, Density):
            return NotImplemented
        return (self.grid == other.grid and np.array_equal(self.values, other.values)
                and self.alpha == other.alpha and self.lam == other.lam)

    def scaled(self, factor):
        return Density(self.grid, self.values * factor, alpha=self.alpha, lam=self.lam,
                       zero=self.zero or factor == 0)

    def max_normalized(self):
        """Values divided by their maximum, the normalization used for plotting."""
        peak = self.values.max()
        if peak <= 0:
            return np.zeros_like(self.values)
        return self.values / peak

    def to_json(self):
        return {'grid': self.grid.to_json(), 'values': self.values.tolist()}


def check_same_grid(*operands):
    grid = operands[0].grid
    for operand in operands[1:]:
        if operand.grid != grid:
            raise GridMismatchError('Operands live on different grids: %s vs %s' % (
                grid, operand.grid))
    return grid


def _values(operand):
    return operand.values


def weighted_inner_product(u, v, phi):
    """Trapezoidal <u, v>_phi = sum_k u_k v_k phi_k q_k."""
    grid = check_same_grid(u, v, phi)
    return float(np.sum(u.values * v.values * _values(phi) * grid.quad_weights))


def weighted_norm_sq(u, phi):
    return weighted_inner_product(u, u, phi)


def _check_positive_weight(w):
    if np.any(w.values <= 0):
        raise DomainError('Weight must be strictly positive, min value %g' % w.values.min())


def intrinsic_norm_sq(u, w):
    """||u||_w^2 for a strictly positive weight field w."""
    grid = check_same_grid(u, w)
    _check_positive_weight(w)
    return float(np.sum(u.values ** 2 * w.values * grid.quad_weights))


def l2_norm_sq(u):
    return float(np.sum(u.values ** 2 * u.grid.quad_weights))


def l2_distance(u, v):
    check_same_grid(u, v)
    return float(np.sqrt(np.sum((u.values - v.values) ** 2 * u.grid.quad_weights)))


def integrate(u):
    """Trapezoidal integral of a field over the grid."""
    return float(np.sum(u.values * u.grid.quad_weights))


def reaction(u):
    """Bistable cubic f(u) = -u (1/2 - u)(1 - u), shared by both model systems."""
    return -u * (0.5 - u) * (1.0 - u)


def reaction_slope(u):
    """f'(u) = -1/2 + 3u - 3u^2."""
    return -0.5 + 3.0 * u - 3.0 * u ** 2


def reaction_antiderivative(u):
    """F with F' = f and F(0) = 0."""
    return -u ** 2 / 4 + u ** 3 / 2 - u ** 4 / 4


def energy_functional(u, w, nu, stencil='central'):
    """Gradient-flow energy I[u] = sum_k [(nu/2) (u_x)_k^2 - F(u_k)] w_k q_k.

    stencil='central' takes u_x from second-order central differences with second-order one-sided
    differences at the boundary points. stencil='flux' uses the staggered form
    (nu/2) sum_{i+1/2} w_{i+1/2} (u_{i+1} - u_i)^2 / dx, the discrete energy that the flux-form
    reaction-diffusion right-hand side descends exactly.
    """
    grid = check_same_grid(u, w)
    _check_positive_weight(w)
    if not nu > 0:
        raise DomainError('Diffusion coefficient must be positive, got %r' % nu)
    q = grid.quad_weights
    potential = np.sum(reaction_antiderivative(u.values) * w.values * q)
    if stencil == 'central':
        u_x = np.gradient(u.values, grid.dx, edge_order=2)
        gradient_term = np.sum(0.5 * nu * u_x ** 2 * w.values * q)
    elif stencil == 'flux':
        w_half = 0.5 * (w.values[:-1] + w.values[1:])
        gradient_term = 0.5 * nu * np.sum(w_half * np.diff(u.values) ** 2) / grid.dx
    else:
        raise ValueError('Unknown stencil %r' % stencil)
    return float(gradient_term - potential)
