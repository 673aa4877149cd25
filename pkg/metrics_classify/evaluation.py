"""Classification error as a function of library size, for a list of metrics."""
import logging
import time

import humanize
import numpy as np
import pandas as pd

from common.grid_quadrature import Field
from dynamics import attractors as attractors_lib
from dynamics import integrator
from library import generation
from metrics_classify import metrics as metrics_lib
from metrics_classify import sensors as sensors_lib
from spml_solver import pair_sums as pair_sums_lib
from spml_solver import solver

ERROR_COLUMNS = ['n_labels_per_attractor', 'metric', 'error', 'n_test', 'seed']
LIBRARY_STREAM = 3
TEST_STREAM = 2
DEFAULT_METRICS = ('l2', 'intrinsic', 'dense:0', 'sparse:0.9')


class MetricSpecError(ValueError):
    pass


def _intrinsic_weight(system):
    if getattr(system, 'weight', None) is not None:
        return system.weight
    return Field.constant(system.grid, 1.0)


def learn_density(library, spml_params):
    return solver.solve(pair_sums_lib.assemble_pair_sums(library), spml_params).phi


def parse_metric_spec(spec):
    """(kind, argument) of a metric spec: l2, intrinsic, dense:<lambda>, sparse:<lambda> or
    atoms:x1|x2|... The argument is None, a float lambda, or a list of locations."""
    kind, _, argument = spec.partition(':')
    try:
        if kind in (metrics_lib.L2, metrics_lib.INTRINSIC) and not argument:
            return kind, None
        if kind in ('dense', 'sparse'):
            lam = float(argument)
            if not 0 <= lam < 1:
                raise ValueError('lambda %g outside [0, 1)' % lam)
            return kind, lam
        if kind == metrics_lib.ATOMS:
            return kind, [float(location) for location in argument.split('|')]
    except ValueError as err:
        raise MetricSpecError('Bad metric spec %r: %s' % (spec, err)) from err
    raise MetricSpecError('Unknown metric spec %r' % spec)


def build_metric(spec, library, spml_params=solver.SPMLParams(),
                 mass_fraction=sensors_lib.DEFAULT_MASS_FRACTION):
    """Metric from a spec string (see parse_metric_spec).

    dense and sparse learn a density from library with spml_params and the given lambda; sparse then
    places sensors on it.
    """
    system = library.system
    kind, argument = parse_metric_spec(spec)
    if kind == metrics_lib.L2:
        return metrics_lib.Metric.l2(system.grid, name=spec)
    if kind == metrics_lib.INTRINSIC:
        return metrics_lib.Metric.intrinsic(_intrinsic_weight(system), name=spec)
    if kind == metrics_lib.ATOMS:
        return metrics_lib.Metric.atoms(
            sensors_lib.SensorSet.from_locations(system.grid, argument), name=spec)
    phi = learn_density(library, spml_params._replace(lam=argument))
    if kind == 'dense':
        return metrics_lib.Metric.dense(phi, name=spec)
    return metrics_lib.Metric.atoms(sensors_lib.extract_sensors(phi, mass_fraction), name=spec)


def _predictor(metric, library, spml_params, mass_fraction):
    if isinstance(metric, str):
        return metric, metrics_lib.NearestNeighborClassifier(
            library, build_metric(metric, library, spml_params, mass_fraction))
    # callable building a predictor from the library
    return getattr(metric, 'name', repr(metric)), metric(library)


def evaluate_error(system, catalog, spec, lib_sizes, metrics, n_test, seed=0, augment=False,
                   labeling=generation.LabelingParams(), spml_params=solver.SPMLParams(),
                   mass_fraction=sensors_lib.DEFAULT_MASS_FRACTION,
                   config=integrator.IntegratorConfig(), threads=1,
                   draw_budget_factor=generation.DEFAULT_DRAW_BUDGET_FACTOR):
    """Misclassification rate per (library size, metric).

    For every size a fresh library and a fresh set of n_test out-of-library draws are generated from
    seeds derived from seed and the size. Test draws are labeled by simulation; those that do not
    settle are excluded.

    Args:
        metrics: metric spec strings (see build_metric) or callables library -> object with
            predict(u_field) -> label.
    Returns:
        pandas.DataFrame with columns n_labels_per_attractor, metric, error, n_test, seed.
    """
    rows = []
    for size in lib_sizes:
        start = time.monotonic()
        library = generation.build_library(
            system, catalog, spec, size, seed=generation.draw_seed(seed, size, LIBRARY_STREAM),
            augment=augment, labeling=labeling, config=config, threads=threads,
            draw_budget_factor=draw_budget_factor)
        test_seed = generation.draw_seed(seed, size, TEST_STREAM)
        draws = generation.label_draws(
            system, catalog, spec, [generation.draw_seed(test_seed, i, TEST_STREAM)
                                    for i in range(n_test)],
            labeling, config, threads)
        scored = [draw for draw in draws if draw.label != attractors_lib.UNCONVERGED]
        if len(scored) < len(draws):
            logging.warning('Excluded %d of %d test draws that did not settle',
                            len(draws) - len(scored), len(draws))
        truth = np.array([draw.label for draw in scored], dtype=int)
        queries = [system.u_field(draw.state) for draw in scored]
        for metric in metrics:
            name, predictor = _predictor(metric, library, spml_params, mass_fraction)
            predicted = np.array([predictor.predict(query) for query in queries], dtype=int)
            error = float(np.mean(predicted != truth)) if len(scored) else float('nan')
            rows.append({'n_labels_per_attractor': size, 'metric': name, 'error': error,
                         'n_test': len(scored), 'seed': seed})
            logging.info('n=%d %s: error %.4f over %s test draws', size, name, error,
                         humanize.intcomma(len(scored)))
        logging.info('Library size %d evaluated in %s', size,
                     humanize.naturaldelta(time.monotonic() - start))
    return pd.DataFrame(rows, columns=ERROR_COLUMNS)
