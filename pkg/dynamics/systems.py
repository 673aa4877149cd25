"""Model systems: the weighted reaction-diffusion equation and the FitzHugh-Nagumo system on a 1D grid.

Both use Neumann (zero-flux) boundaries enforced with mirror ghost points. A system state is a flat
numpy vector: u for reaction-diffusion, u followed by v for FitzHugh-Nagumo. Only u is ever
observed, so attractor matching and all metrics look at the u block.
"""
import dataclasses
import functools
import math
from typing import ClassVar

from memoization import cached
import numpy as np

from common.grid_quadrature import (
    DomainError, Field, Grid, GridMismatchError, reaction, reaction_slope, check_same_grid)

RD_KIND = 'rd1d'
FHN_KIND = 'fhn1d'


@cached(max_size=32)
def rd_weight(grid, a=0.3, x0=0.5, epsilon=0.01):
    """w(x) = a tanh((x - x0)/eps) + a tanh((-x - x0)/eps) + 1: ~1 - 2a in the middle, ~1 near the ends."""
    x = grid.x
    return Field(grid, a * np.tanh((x - x0) / epsilon) + a * np.tanh((-x - x0) / epsilon) + 1.0)


def weighted_laplacian(values, weight, dx):
    """(1/w) d/dx (w du/dx) in flux form with arithmetic half-point weights and zero-flux ends."""
    w_half = 0.5 * (weight[:-1] + weight[1:])
    flux = w_half * np.diff(values)
    divergence = np.empty_like(values)
    divergence[1:-1] = flux[1:] - flux[:-1]
    divergence[0] = 2.0 * flux[0]
    divergence[-1] = -2.0 * flux[-1]
    return divergence / (weight * dx ** 2)


def neumann_laplacian(values, dx):
    return weighted_laplacian(values, np.ones_like(values), dx)


def laplacian_matrix(weight, dx):
    """Dense matrix of weighted_laplacian, built column by column."""
    weight = np.asarray(weight, dtype=float)
    return np.column_stack([weighted_laplacian(column, weight, dx)
                            for column in np.eye(len(weight))])


class PDESystem:
    """Common interface of the model systems."""
    kind: ClassVar[str] = ''
    n_components: ClassVar[int] = 1

    @property
    def state_size(self):
        return self.n_components * self.grid.n_points

    def u_values(self, state):
        return np.asarray(state)[:self.grid.n_points]

    def u_field(self, state):
        return Field(self.grid, self.u_values(state))

    def reflect_state(self, state):
        blocks = np.asarray(state, dtype=float).reshape(self.n_components, self.grid.n_points)
        return blocks[:, ::-1].reshape(-1).copy()

    def check_state(self, state):
        state = np.asarray(state, dtype=float)
        if state.shape != (self.state_size,):
            raise GridMismatchError('State has shape %s, %s expects %d values' % (
                state.shape, self.kind, self.state_size))
        return state

    def rhs(self, t, state):
        raise NotImplementedError

    def jacobian(self, t, state):
        raise NotImplementedError

    def params(self):
        raise NotImplementedError


@dataclasses.dataclass(frozen=True, eq=False)
class RDSystem(PDESystem):
    """du/dt = nu (1/w) (w u_x)_x + f(u) with u_x = 0 at both ends."""
    grid: Grid
    weight: Field
    nu: float = 1e-2
    weighted: bool = True
    a: float = 0.3
    x0: float = 0.5
    epsilon: float = 0.01
    with_reaction: bool = True

    kind: ClassVar[str] = RD_KIND
    n_components: ClassVar[int] = 1

    def __post_init__(self):
        if self.weight.grid != self.grid:
            raise GridMismatchError('Weight grid %s differs from system grid %s' % (
                self.weight.grid, self.grid))
        if np.any(self.weight.values <= 0):
            raise DomainError('Weight must be strictly positive')
        if not self.nu > 0:
            raise DomainError('nu must be positive, got %r' % self.nu)

    @classmethod
    def build(cls, grid=None, nu=1e-2, weighted=True, a=0.3, x0=0.5, epsilon=0.01,
              with_reaction=True):
        grid = grid or Grid()
        weight = rd_weight(grid, a, x0, epsilon) if weighted else Field.constant(grid, 1.0)
        return cls(grid=grid, weight=weight, nu=nu, weighted=weighted, a=a, x0=x0,
                   epsilon=epsilon, with_reaction=with_reaction)

    def rhs(self, t, state):
        du = self.nu * weighted_laplacian(state, self.weight.values, self.grid.dx)
        if self.with_reaction:
            du = du + reaction(state)
        return du

    @functools.cached_property
    def diffusion_matrix(self):
        return self.nu * laplacian_matrix(self.weight.values, self.grid.dx)

    def jacobian(self, t, state):
        jac = self.diffusion_matrix.copy()
        if self.with_reaction:
            jac[np.diag_indices_from(jac)] += reaction_slope(np.asarray(state, dtype=float))
        return jac

    def constant_state(self, u_value):
        return np.full(self.grid.n_points, float(u_value))

    def constant_steady_states(self):
        return [0.0, 0.5, 1.0] if self.with_reaction else []

    def stable_constant_states(self):
        return [0.0, 1.0] if self.with_reaction else []

    def params(self):
        return {'nu': self.nu, 'weighted': self.weighted, 'a': self.a, 'x0': self.x0,
                'epsilon': self.epsilon, 'with_reaction': self.with_reaction}


@dataclasses.dataclass(frozen=True, eq=False)
class FHNSystem(PDESystem):
    """du/dt = nu u_xx - v + f(u), dv/dt = beta u - gamma v, zero-flux ends."""
    grid: Grid
    nu: float = 1e-2
    beta: float = 1e-2
    gamma: float = 1.0

    kind: ClassVar[str] = FHN_KIND
    n_components: ClassVar[int] = 2

    def __post_init__(self):
        if not self.nu > 0:
            raise DomainError('nu must be positive, got %r' % self.nu)
        if not self.gamma ** 2 - 16 * self.beta * self.gamma > 0:
            raise DomainError(
                'gamma^2 - 16 beta gamma must be positive for three constant steady states '
                '(beta=%r, gamma=%r)' % (self.beta, self.gamma))

    @classmethod
    def build(cls, grid=None, nu=1e-2, beta=1e-2, gamma=1.0):
        return cls(grid=grid or Grid(), nu=nu, beta=beta, gamma=gamma)

    def split(self, state):
        n = self.grid.n_points
        return state[:n], state[n:]

    def pack(self, u_values, v_values=None):
        if v_values is None:
            v_values = np.zeros_like(u_values)
        return np.concatenate([np.asarray(u_values, dtype=float), np.asarray(v_values, dtype=float)])

    def rhs(self, t, state):
        u, v = self.split(state)
        du = self.nu * neumann_laplacian(u, self.grid.dx) - v + reaction(u)
        dv = self.beta * u - self.gamma * v
        return np.concatenate([du, dv])

    @functools.cached_property
    def diffusion_matrix(self):
        return self.nu * laplacian_matrix(np.ones(self.grid.n_points), self.grid.dx)

    def jacobian(self, t, state):
        """Block matrix [[nu L + diag f'(u), -I], [beta I, -gamma I]]."""
        u, _ = self.split(np.asarray(state, dtype=float))
        identity = np.eye(self.grid.n_points)
        return np.block([
            [self.diffusion_matrix + np.diag(reaction_slope(u)), -identity],
            [self.beta * identity, -self.gamma * identity]])

    def constant_steady_states(self):
        root = math.sqrt(self.gamma ** 2 - 16 * self.beta * self.gamma)
        return [0.0, (3 * self.gamma - root) / (4 * self.gamma),
                (3 * self.gamma + root) / (4 * self.gamma)]

    def stable_constant_states(self):
        states = self.constant_steady_states()
        return [states[0], states[2]]

    def constant_state(self, u_value):
        n = self.grid.n_points
        return self.pack(np.full(n, float(u_value)), np.full(n, self.beta * u_value / self.gamma))

    def params(self):
        return {'nu': self.nu, 'beta': self.beta, 'gamma': self.gamma}


def rd_rhs(u, system):
    """Right-hand side of the reaction-diffusion equation as a Field."""
    check_same_grid(u, system.weight)
    return Field(system.grid, system.rhs(0.0, u.values))


def fhn_rhs(u, v, system):
    """Right-hand sides (du, dv) of the FitzHugh-Nagumo system as Fields."""
    check_same_grid(u, v)
    if u.grid != system.grid:
        raise GridMismatchError('State grid %s differs from system grid %s' % (u.grid, system.grid))
    du, dv = system.split(system.rhs(0.0, system.pack(u.values, v.values)))
    return Field(system.grid, du), Field(system.grid, dv)


def initial_state(system, u, v=None):
    """Pack Field (or array) components into a flat system state."""
    u_values = u.values if isinstance(u, Field) else np.asarray(u, dtype=float)
    if system.n_components == 1:
        return system.check_state(u_values.copy())
    v_values = None if v is None else (v.values if isinstance(v, Field) else np.asarray(v))
    return system.check_state(system.pack(u_values, v_values))


def build_system(kind, grid=None, **params):
    """Construct a system from its kind tag and parameter dict (as stored in artifact files)."""
    if kind == RD_KIND:
        return RDSystem.build(grid=grid, **params)
    if kind == FHN_KIND:
        return FHNSystem.build(grid=grid, **params)
    raise ValueError('Unknown system kind %r' % kind)
