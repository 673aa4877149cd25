"""Attractor catalogs: discovery from random pilot runs, matching of evolved states, and storage."""
import dataclasses
import logging
import time

import humanize
import numpy as np
from scipy import optimize

from common import grid_quadrature, json_utils, worker_pool
from common.grid_quadrature import Field, Grid, l2_distance
from dynamics import integrator
from dynamics.systems import build_system

CATALOG_VERSION = 'spml-attractors/1'
UNCONVERGED = -1
EQUILIBRIUM_TOL = 1e-6
CONSTANT_RANGE_TOL = 1e-3
DEFAULT_WINDOW = 25.0
DEFAULT_MATCH_TOL = 1e-2
DEFAULT_T_MAX = 500.0
MIN_PILOTS = 50
# Tighter tolerances while polishing so the residual test is not limited by integration error.
POLISH_TOLERANCE = 1e-9
# Largest L2 move on u a Newton solve may make from the integrated state.
NEWTON_MAX_SHIFT = 0.05


class Error(Exception):
    pass


class AttractorDiscoveryError(Error):
    pass


class CatalogFormatError(json_utils.ArtifactFormatError):
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class Attractor:
    """A stable steady state. state is the full packed system state; matching only looks at u."""
    id: int
    grid: Grid
    state: np.ndarray
    tag: str

    @property
    def representative(self):
        return Field(self.grid, self.state[:self.grid.n_points])

    @property
    def v_values(self):
        if len(self.state) == self.grid.n_points:
            return None
        return self.state[self.grid.n_points:]

    def is_constant(self):
        u = self.representative.values
        return float(u.max() - u.min()) < CONSTANT_RANGE_TOL


def rhs_sup_norm(state, system):
    return float(np.max(np.abs(system.rhs(0.0, state))))


def constant_tag(value):
    # adding 0.0 turns -0.0 into 0.0
    return 'constant-%s' % format(round(float(value), 4) + 0.0, 'g')


def constant_attractor_catalog(system):
    """Analytic catalog of the stable constant steady states, ascending in u."""
    return [Attractor(id=i, grid=system.grid, state=system.constant_state(value),
                      tag=constant_tag(value))
            for i, value in enumerate(sorted(system.stable_constant_states()))]


def is_stable(state, system):
    """True if every eigenvalue of the Jacobian at state has negative real part."""
    eigenvalues = np.linalg.eigvals(system.jacobian(0.0, state))
    return float(np.max(eigenvalues.real)) < 0.0


def newton_equilibrium(state, system, max_shift=NEWTON_MAX_SHIFT):
    """Stable equilibrium found by a Newton solve of rhs = 0 started at state.

    Returns None if the solve fails, moves u further than max_shift, or lands on an unstable
    equilibrium.
    """
    try:
        solution = optimize.root(lambda s: system.rhs(0.0, s), state,
                                 jac=lambda s: system.jacobian(0.0, s), method='hybr')
    except (ValueError, np.linalg.LinAlgError) as err:
        logging.debug('Newton solve failed: %s', err)
        return None
    if not solution.success:
        return None
    candidate = np.asarray(solution.x, dtype=float)
    if not np.all(np.isfinite(candidate)) or rhs_sup_norm(candidate, system) >= EQUILIBRIUM_TOL:
        return None
    if l2_distance(system.u_field(candidate), system.u_field(state)) >= max_shift:
        return None
    if not is_stable(candidate, system):
        return None
    return candidate


def _polish(state, system, t_now, t_polish_max, config):
    """Drive state to a numerical equilibrium.

    Each round first tries a Newton solve; if that is rejected the state is integrated for one
    more window. Returns the polished state, or None if t_polish_max is reached first.
    """
    polish_config = config._replace(rtol=min(config.rtol, POLISH_TOLERANCE),
                                    atol=min(config.atol, POLISH_TOLERANCE))
    while rhs_sup_norm(state, system) >= EQUILIBRIUM_TOL:
        polished = newton_equilibrium(state, system)
        if polished is not None:
            return polished
        if t_now >= t_polish_max:
            return None
        window = min(DEFAULT_WINDOW, t_polish_max - t_now)
        state = integrator.evolve(state, system, window, polish_config)
        t_now += window
    return state


def _pilot_final_state(task):
    system, ic_sampler, pilot_seed, t_long, t_polish_max, config = task
    try:
        state = integrator.evolve(ic_sampler(pilot_seed), system, t_long, config)
        return _polish(state, system, t_long, t_polish_max, config)
    except integrator.IntegrationError as err:
        logging.warning('Pilot with seed %d failed: %s', pilot_seed, err)
        return None


def pilot_seeds(seed, n_pilot):
    return [int(np.random.SeedSequence([seed, 1, i]).generate_state(1)[0]) for i in range(n_pilot)]


def _merge(final_states, system, merge_tol):
    """Greedy merge in input order; the first member of each cluster is its representative."""
    representatives = []
    for state in final_states:
        u = system.u_field(state)
        if all(l2_distance(u, system.u_field(rep)) >= merge_tol for rep in representatives):
            representatives.append(state)
    return representatives


def with_reflections(representatives, system, merge_tol):
    """Add the mirror image of every representative that has no match within merge_tol.

    Both model systems commute with x -> -x on a grid symmetric about 0; on any other grid the
    list is returned unchanged.
    """
    if not system.grid.is_symmetric():
        return list(representatives)
    completed = list(representatives)
    for state in representatives:
        mirrored = system.reflect_state(state)
        u = system.u_field(mirrored)
        if all(l2_distance(u, system.u_field(rep)) >= merge_tol for rep in completed):
            logging.info('Adding mirror image of a discovered attractor')
            completed.append(mirrored)
    return completed


def _ordered_catalog(representatives, system):
    n = system.grid.n_points
    constants = []
    others = []
    for state in representatives:
        u = state[:n]
        if float(u.max() - u.min()) < CONSTANT_RANGE_TOL:
            constants.append(state)
        else:
            others.append(state)
    constants.sort(key=lambda state: float(np.mean(state[:n])))
    others.sort(key=lambda state: -float(state[0]))
    attractors = []
    for state in constants:
        attractors.append(Attractor(len(attractors), system.grid, np.array(state),
                                    constant_tag(np.mean(state[:n]))))
    used_tags = set()
    for state in others:
        if state[0] > state[n - 1]:
            tag = 'left-step'
        elif state[0] < state[n - 1]:
            tag = 'right-step'
        else:
            tag = 'pattern'
        if tag in used_tags:
            tag = '%s-%d' % (tag, len(attractors))
        used_tags.add(tag)
        attractors.append(Attractor(len(attractors), system.grid, np.array(state), tag))
    return attractors


def discover_attractors(system, ic_sampler, n_pilot=MIN_PILOTS, seed=0, t_long=300.0,
                        t_polish_max=DEFAULT_T_MAX, merge_tol=0.05,
                        config=integrator.IntegratorConfig(), threads=1, reflect=True):
    """Find the stable steady states of system from random pilot integrations.

    Constants come first in ascending order of value; the remaining attractors follow sorted by
    their value at x_min, descending.

    Args:
        system: RDSystem or FHNSystem.
        ic_sampler: picklable callable seed -> flat initial state.
        n_pilot: int number of pilot runs, at least 50.
        seed: int base seed; pilot seeds are derived from it.
        t_long: float integration time before polishing.
        t_polish_max: float time by which a pilot must be a numerical equilibrium.
        merge_tol: float L2 distance below which final states are the same attractor.
        config: IntegratorConfig (t_end is ignored).
        threads: int worker processes.
        reflect: bool, also add mirror images of the discovered states on a symmetric grid.
    Returns:
        list of Attractor.
    Raises:
        AttractorDiscoveryError if n_pilot is too small or no pilot converged.
    """
    if n_pilot < MIN_PILOTS:
        raise AttractorDiscoveryError('n_pilot must be at least %d, got %d' % (MIN_PILOTS, n_pilot))
    start = time.monotonic()
    tasks = [(system, ic_sampler, pilot_seed, t_long, t_polish_max, config)
             for pilot_seed in pilot_seeds(seed, n_pilot)]
    finals = worker_pool.ordered_map(_pilot_final_state, tasks, threads)
    converged = [state for state in finals if state is not None]
    dropped = len(finals) - len(converged)
    if dropped:
        logging.warning('Dropped %d of %d pilot runs that did not reach equilibrium by t=%g',
                        dropped, n_pilot, t_polish_max)
    if not converged:
        raise AttractorDiscoveryError('None of %d pilot runs converged' % n_pilot)
    representatives = _merge(converged, system, merge_tol)
    if reflect:
        representatives = with_reflections(representatives, system, merge_tol)
    attractors = _ordered_catalog(representatives, system)
    logging.info('Discovered %d attractors (%s) from %s pilots in %s', len(attractors),
                 ', '.join(a.tag for a in attractors), humanize.intcomma(n_pilot),
                 humanize.naturaldelta(time.monotonic() - start))
    return attractors


def match_attractor(state, system, attractors, match_tol=DEFAULT_MATCH_TOL):
    """Id of the nearest attractor within match_tol (L2 on u), or UNCONVERGED."""
    u = system.u_field(state)
    best_id = UNCONVERGED
    best_distance = match_tol
    for attractor in attractors:
        distance = l2_distance(u, attractor.representative)
        if distance < best_distance:
            best_id = attractor.id
            best_distance = distance
    return best_id


def classify_attractor(state, system, attractors, t_max=DEFAULT_T_MAX, window=DEFAULT_WINDOW,
                       match_tol=DEFAULT_MATCH_TOL, config=integrator.IntegratorConfig()):
    """Evolve state in windows and return the id of the attractor it reaches.

    Returns:
        int attractor id, or UNCONVERGED if no attractor is within match_tol by t_max.
    Raises:
        IntegrationError from the integrator.
    """
    if not attractors:
        raise ValueError('Attractor catalog is empty')
    t_now = 0.0
    state = system.check_state(state)
    while t_now < t_max:
        step = min(window, t_max - t_now)
        state = integrator.evolve(state, system, step, config)
        t_now += step
        label = match_attractor(state, system, attractors, match_tol)
        if label != UNCONVERGED:
            logging.debug('Matched attractor %d at t=%g', label, t_now)
            return label
    return UNCONVERGED


def catalog_to_json(attractors):
    entries = []
    for attractor in attractors:
        entry = {'id': attractor.id, 'tag': attractor.tag,
                 'values': attractor.representative.values}
        if attractor.v_values is not None:
            entry['v_values'] = attractor.v_values
        entries.append(entry)
    return entries


def catalog_from_json(entries, grid):
    attractors = []
    for entry in entries:
        state = list(entry['values']) + list(entry.get('v_values', []))
        attractors.append(Attractor(int(entry['id']), grid, np.array(state, dtype=float),
                                    entry['tag']))
    return attractors


def save_attractors(path, system, attractors):
    json_utils.dump_json(path, {
        'version': CATALOG_VERSION,
        'system': system.kind,
        'params': system.params(),
        'grid': system.grid.to_json(),
        'attractors': catalog_to_json(attractors),
    })


def load_attractors(path):
    """Returns (system, attractors) from a catalog file written by save_attractors."""
    data = json_utils.load_json(path, CATALOG_VERSION, error_class=CatalogFormatError)
    try:
        grid = Grid.from_json(data['grid'])
        system = build_system(data['system'], grid=grid, **data['params'])
        attractors = catalog_from_json(data['attractors'], grid)
    except (KeyError, TypeError, ValueError, grid_quadrature.Error) as err:
        raise CatalogFormatError('Malformed attractor catalog %s: %r' % (path, err)) from err
    for attractor in attractors:
        if len(attractor.state) != system.state_size:
            raise CatalogFormatError('%s: attractor %d has %d values, expected %d' % (
                path, attractor.id, len(attractor.state), system.state_size))
    return system, attractors

