"""Random initial conditions and the labeled library built from them.

A raw draw is center + amplitude * sum_k [a_k cos(k pi x) + b_k sin((2k - 1) pi x / 2)] with the
coefficients read as a_1, b_1, a_2, b_2, ... from a Philox generator seeded with the draw seed, so a
draw can be regenerated from its stored seed alone. Each draw is evolved for t0 time units and
labeled by the attractor its trajectory reaches.
"""
import collections
import dataclasses
import functools
import logging
import time
from typing import Optional

import humanize
from memoization import cached
import numpy as np

from common import worker_pool
from common.grid_quadrature import DomainError, Field, l2_distance
from dynamics import attractors as attractors_lib
from dynamics import integrator
from dynamics.systems import FHN_KIND, RD_KIND

DEFAULT_T0 = 10.0
DEFAULT_DRAW_BUDGET_FACTOR = 100


class Error(Exception):
    pass


class GenerationError(Error):
    """The draw budget ran out before every attractor had its quota."""

    def __init__(self, message, starved_attractor):
        super().__init__(message)
        self.starved_attractor = starved_attractor


ICSpec = collections.namedtuple('ICSpec', ['kind', 'n_modes', 'center', 'amplitude', 't0'],
                                defaults=[DEFAULT_T0])

LabelingParams = collections.namedtuple('LabelingParams', ['t_max', 'window', 'match_tol'],
                                        defaults=[attractors_lib.DEFAULT_T_MAX,
                                                  attractors_lib.DEFAULT_WINDOW,
                                                  attractors_lib.DEFAULT_MATCH_TOL])


def check_ic_spec(spec):
    if spec.kind not in (RD_KIND, FHN_KIND):
        raise ValueError('Unknown system kind %r' % spec.kind)
    if spec.n_modes < 1:
        raise ValueError('n_modes must be at least 1, got %r' % spec.n_modes)
    if spec.t0 < 0:
        raise ValueError('t0 must be nonnegative, got %r' % spec.t0)


def default_ic_spec(system, t0=DEFAULT_T0):
    """K=10 modes around 1/2 with amplitude 1/10 for reaction-diffusion; K=22 modes around the
    middle constant steady state with amplitude 1/K for FitzHugh-Nagumo."""
    if system.kind == FHN_KIND:
        n_modes = 22
        return ICSpec(FHN_KIND, n_modes, system.constant_steady_states()[1], 1.0 / n_modes, t0)
    return ICSpec(RD_KIND, 10, 0.5, 0.1, t0)


def draw_seed(seed, index, stream=0):
    """Provenance seed of draw number index; distinct streams never share seeds."""
    return int(np.random.SeedSequence([seed, stream, index]).generate_state(1)[0])


@cached(max_size=16)
def _mode_basis(grid, n_modes):
    k = np.arange(1, n_modes + 1)[:, np.newaxis]
    cosines = np.cos(k * np.pi * grid.x)
    sines = np.sin((2 * k - 1) / 2 * np.pi * grid.x)
    cosines.setflags(write=False)
    sines.setflags(write=False)
    return cosines, sines


def random_coefficients(n_modes, seed):
    """(a, b) standard normal coefficient vectors drawn as a_1, b_1, a_2, b_2, ..."""
    draws = np.random.Generator(np.random.Philox(seed)).standard_normal(2 * n_modes)
    return draws[0::2], draws[1::2]


def generate_random_ic(spec, seed, grid, coefficients=None):
    """Raw (not yet evolved) random initial condition.

    Args:
        spec: ICSpec.
        seed: int draw seed.
        grid: Grid.
        coefficients: optional (a, b) arrays of length spec.n_modes overriding the random draw.
    Returns:
        (u, v) Fields; v is None for reaction-diffusion and identically zero for FitzHugh-Nagumo.
    """
    check_ic_spec(spec)
    a, b = coefficients if coefficients is not None else random_coefficients(spec.n_modes, seed)
    cosines, sines = _mode_basis(grid, spec.n_modes)
    u = Field(grid, spec.center + spec.amplitude * (np.asarray(a) @ cosines + np.asarray(b) @ sines))
    if spec.kind == FHN_KIND:
        return u, Field.constant(grid, 0.0)
    return u, None


def random_initial_state(system, spec, seed):
    u, v = generate_random_ic(spec, seed, system.grid)
    if v is None:
        return np.array(u.values)
    return system.pack(u.values, v.values)


def reflect(field):
    """Mirror a Field through the center of a symmetric grid."""
    if field.grid.x_min != -field.grid.x_max:
        raise DomainError('Reflection needs a grid symmetric about 0, got [%g, %g]' % (
            field.grid.x_min, field.grid.x_max))
    return Field(field.grid, field.values[::-1])


def reflection_label_map(attractors):
    """Attractor id -> id of the attractor nearest its mirror image (A3 <-> A4 for the weighted
    reaction-diffusion catalog, identity for constants)."""
    label_map = {}
    for attractor in attractors:
        mirrored = reflect(attractor.representative)
        label_map[attractor.id] = min(
            attractors, key=lambda other: l2_distance(mirrored, other.representative)).id
    return label_map


@dataclasses.dataclass(frozen=True, eq=False)
class LabeledState:
    u0: Field
    v0: Optional[Field]
    label: int
    seed: int
    augmented: bool = False

    def state_vector(self):
        if self.v0 is None:
            return np.array(self.u0.values)
        return np.concatenate([self.u0.values, self.v0.values])


@dataclasses.dataclass(frozen=True, eq=False)
class LabeledLibrary:
    system: object
    attractors: list
    states: list

    def __post_init__(self):
        ids = {attractor.id for attractor in self.attractors}
        for state in self.states:
            if state.label not in ids:
                raise ValueError('Label %r is not in the attractor catalog' % state.label)
            if state.u0.grid != self.system.grid:
                raise ValueError('Library states must share the system grid')

    @property
    def counts(self):
        counts = {attractor.id: 0 for attractor in self.attractors}
        for state in self.states:
            counts[state.label] += 1
        return counts

    @property
    def labels(self):
        return np.array([state.label for state in self.states], dtype=int)

    def u_matrix(self):
        """Rows are the u components of the library states, in library order."""
        if not self.states:
            return np.zeros((0, self.system.grid.n_points))
        return np.vstack([state.u0.values for state in self.states])

    def __len__(self):
        return len(self.states)


LabeledDraw = collections.namedtuple('LabeledDraw', ['seed', 'state', 'label'])


def _label_draw(task):
    system, catalog, spec, seed, labeling, config = task
    try:
        state = integrator.evolve(random_initial_state(system, spec, seed), system, spec.t0, config)
        label = attractors_lib.classify_attractor(
            state, system, catalog, t_max=labeling.t_max, window=labeling.window,
            match_tol=labeling.match_tol, config=config)
    except integrator.IntegrationError as err:
        logging.warning('Draw with seed %d failed to integrate: %s', seed, err)
        return LabeledDraw(seed, None, attractors_lib.UNCONVERGED)
    return LabeledDraw(seed, state, label)


def label_draws(system, catalog, spec, seeds, labeling=LabelingParams(),
                config=integrator.IntegratorConfig(), threads=1):
    """Evolve the draws with the given seeds by spec.t0 and label them, in seed order.

    Returns:
        list of LabeledDraw; label is attractors.UNCONVERGED for draws that did not settle.
    """
    check_ic_spec(spec)
    tasks = [(system, catalog, spec, seed, labeling, config) for seed in seeds]
    return worker_pool.ordered_map(_label_draw, tasks, threads)


def _labeled_state(system, state, label, seed, augmented):
    n = system.grid.n_points
    v0 = Field(system.grid, state[n:]) if system.n_components == 2 else None
    return LabeledState(Field(system.grid, state[:n]), v0, label, seed, augmented)


def build_library(system, catalog, spec, n_per_attractor, seed=0, augment=False,
                  labeling=LabelingParams(), config=integrator.IntegratorConfig(), threads=1,
                  draw_budget_factor=DEFAULT_DRAW_BUDGET_FACTOR):
    """Draw, evolve and label initial conditions until every attractor has n_per_attractor states.

    Draws are labeled in parallel batches and applied strictly in draw order, so the library does
    not depend on threads. A draw whose attractor is already full is discarded. With augment, the
    mirror image of every draw is offered too, under the mirrored label, and kept iff that label is
    not full.

    Args:
        system: RDSystem or FHNSystem.
        catalog: list of Attractor.
        spec: ICSpec.
        n_per_attractor: int quota per attractor.
        seed: int base seed.
        augment: bool, add reflected states.
        labeling: LabelingParams for classify_attractor.
        config: IntegratorConfig.
        threads: int worker processes.
        draw_budget_factor: int, give up after this many times the total quota of draws.
    Returns:
        LabeledLibrary.
    Raises:
        GenerationError naming the attractor that could not be filled.
    """
    if n_per_attractor < 1:
        raise ValueError('n_per_attractor must be at least 1, got %r' % n_per_attractor)
    if not catalog:
        raise ValueError('Attractor catalog is empty')
    start = time.monotonic()
    label_map = reflection_label_map(catalog) if augment else None
    counts = {attractor.id: 0 for attractor in catalog}
    states = []
    budget = draw_budget_factor * n_per_attractor * len(catalog)
    batch_size = max(8, 4 * (threads or 1))
    n_drawn = n_unconverged = n_rejected = 0

    def full():
        return all(count >= n_per_attractor for count in counts.values())

    def offer(state, label, draw, augmented):
        if counts[label] >= n_per_attractor:
            return False
        states.append(_labeled_state(system, state, label, draw, augmented))
        counts[label] += 1
        return True

    while not full():
        if n_drawn >= budget:
            starved = min(catalog, key=lambda attractor: (counts[attractor.id], attractor.id))
            raise GenerationError(
                'Attractor %d (%s) has %d of %d states after %s draws' % (
                    starved.id, starved.tag, counts[starved.id], n_per_attractor,
                    humanize.intcomma(n_drawn)), starved.id)
        seeds = [draw_seed(seed, index) for index in range(n_drawn, min(n_drawn + batch_size, budget))]
        for draw in label_draws(system, catalog, spec, seeds, labeling, config, threads):
            if full():
                break
            n_drawn += 1
            if draw.label == attractors_lib.UNCONVERGED:
                n_unconverged += 1
                continue
            kept = offer(draw.state, draw.label, draw.seed, False)
            if augment:
                kept = offer(system.reflect_state(draw.state), label_map[draw.label], draw.seed,
                             True) or kept
            if not kept:
                n_rejected += 1
        logging.info('Library: %s draws, counts %s', humanize.intcomma(n_drawn), counts)

    logging.info('Built library of %d states from %s draws (%d unconverged, %d rejected) in %s',
                 len(states), humanize.intcomma(n_drawn), n_unconverged, n_rejected,
                 humanize.naturaldelta(time.monotonic() - start))
    return LabeledLibrary(system, list(catalog), states)


def discovery_sampler(system, spec):
    """Picklable ic_sampler for attractors.discover_attractors."""
    return functools.partial(random_initial_state, system, spec)
