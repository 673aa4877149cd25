"""Adaptive time integration of the model systems.

Wraps scipy's RK45, an embedded Runge-Kutta 5(4) pair with Dormand-Prince coefficients. The local
error of every accepted step is bounded componentwise by atol + rtol * |state|.
"""
import collections
import dataclasses
import logging
import math

import numpy as np
from scipy import integrate as scipy_integrate

DEFAULT_TOLERANCE = 1e-5


class Error(Exception):
    pass


class IntegrationError(Error):
    """Step size underflow or non-finite state. last_time is the last time reached with a good state."""

    def __init__(self, message, last_time):
        super().__init__(message)
        self.last_time = last_time


IntegratorConfig = collections.namedtuple(
    'IntegratorConfig', ['rtol', 'atol', 'max_step', 'first_step', 't_end'],
    defaults=[DEFAULT_TOLERANCE, DEFAULT_TOLERANCE, math.inf, None, 10.0])


def check_integrator_config(config):
    if not (config.rtol > 0 and config.atol > 0):
        raise ValueError('Integrator tolerances must be positive, got rtol=%r atol=%r' % (
            config.rtol, config.atol))
    if not config.max_step > 0:
        raise ValueError('max_step must be positive, got %r' % config.max_step)
    if config.first_step is not None and not config.first_step > 0:
        raise ValueError('first_step must be positive, got %r' % config.first_step)


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """States sampled at times[i] (rows of states), always ending with the final time."""
    times: np.ndarray
    states: np.ndarray

    @property
    def final_time(self):
        return float(self.times[-1])

    @property
    def final_state(self):
        return self.states[-1]


def integrate(state, system, config=IntegratorConfig(), sample_times=None, t_start=0.0):
    """Integrate system from state at t_start to config.t_end.

    Args:
        state: flat numpy state vector (see dynamics.systems).
        system: RDSystem or FHNSystem.
        config: IntegratorConfig.
        sample_times: optional iterable of times in [t_start, t_end] to report. The final time is
            always reported; t_start is reported when requested.
    Returns:
        Trajectory.
    Raises:
        IntegrationError if the step size underflows or the state blows up.
    """
    check_integrator_config(config)
    state = system.check_state(state)
    t_end = float(config.t_end)
    if t_end < t_start:
        raise ValueError('t_end %r precedes t_start %r' % (t_end, t_start))
    if t_end == t_start:
        return Trajectory(np.array([t_start]), state[np.newaxis, :].copy())

    requested = [] if sample_times is None else [float(t) for t in sample_times]
    for t in requested:
        if t < t_start or t > t_end:
            raise ValueError('Sample time %r outside [%r, %r]' % (t, t_start, t_end))

    kwargs = {'rtol': config.rtol, 'atol': config.atol, 'max_step': config.max_step}
    if config.first_step is not None:
        kwargs['first_step'] = config.first_step
    solution = scipy_integrate.solve_ivp(
        system.rhs, (t_start, t_end), state, method='RK45', dense_output=bool(requested), **kwargs)

    step_times = np.asarray(solution.t)
    finite_steps = np.all(np.isfinite(solution.y), axis=0)
    if solution.status != 0 or not np.all(finite_steps):
        good_times = step_times[finite_steps]
        last_time = float(good_times[-1]) if len(good_times) else float(t_start)
        raise IntegrationError(
            'Integration of %s failed after t=%g: %s' % (system.kind, last_time, solution.message),
            last_time)
    final_state = solution.y[:, -1]
    if requested:
        times = np.unique(np.array(requested + [t_end]))
        states = solution.sol(times).T
        states[-1] = final_state
    else:
        times = np.array([t_end])
        states = final_state[np.newaxis, :].copy()
    logging.debug('Integrated %s from t=%g to t=%g in %d RHS evaluations', system.kind, t_start,
                  t_end, solution.nfev)
    return Trajectory(times, states)


def evolve(state, system, duration, config=IntegratorConfig()):
    """Final state after integrating for duration time units."""
    if duration <= 0:
        return system.check_state(state).copy()
    return integrate(state, system, config._replace(t_end=float(duration))).final_state
