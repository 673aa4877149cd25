"""Command-line entrypoint for the metric learning pipeline.

    python main.py [--config FILE] [--seed N] [--threads N] [--out DIR] <command> [options]

Commands run the pipeline one step at a time, each reading the artifacts of the previous step from
the output directory:

    discover-attractors  attractors.json
    gen-library          library.json
    learn-metric         phi_lambda_<lambda>.json for every lambda
    sensors              sensors.json
    classify             prints the predicted attractor for a measurement file
    evaluate             errors.csv
    simulate             trajectory.csv (and observations.csv with --sensors)
"""
import argparse
import logging
import os
import sys
import time

from dotenv import load_dotenv
import humanize
import numpy as np
import pandas as pd

import config_utils
from common import json_utils, worker_pool
from common.grid_quadrature import Field, energy_functional
from dynamics import attractors as attractors_lib
from dynamics import integrator
from dynamics.systems import FHN_KIND
from library import generation, storage
from metrics_classify import evaluation
from metrics_classify import metrics as metrics_lib
from metrics_classify import sensors as sensors_lib
from spml_solver import pair_sums as pair_sums_lib
from spml_solver import solver

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_FILE = 4
EXIT_SOLVER = 5
EXIT_GENERATION = 6
EXIT_SENSOR = 7

# first match wins
EXIT_CODES = [
    ((config_utils.ConfigError, evaluation.MetricSpecError), EXIT_CONFIG),
    ((integrator.IntegrationError,), EXIT_INTEGRATION),
    ((json_utils.ArtifactFormatError, OSError), EXIT_FILE),
    ((solver.SolverNonconvergenceError, solver.DomainError, pair_sums_lib.PairSumsError),
     EXIT_SOLVER),
    ((generation.GenerationError, attractors_lib.AttractorDiscoveryError), EXIT_GENERATION),
    ((sensors_lib.SensorError, sensors_lib.MeasurementMismatchError), EXIT_SENSOR),
]

ATTRACTORS_FILE = 'attractors.json'
LIBRARY_FILE = 'library.json'
SENSORS_FILE = 'sensors.json'
ERRORS_FILE = 'errors.csv'
TRAJECTORY_FILE = 'trajectory.csv'
OBSERVATIONS_FILE = 'observations.csv'


def exit_code_for(err):
    for error_classes, code in EXIT_CODES:
        if isinstance(err, error_classes):
            return code
    return EXIT_UNEXPECTED


def density_filename(lam):
    return 'phi_lambda_%g.json' % lam


def _float_list(value):
    try:
        return [float(item) for item in value.split(',') if item.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError('expected comma separated numbers, got %r' % value) from err


def _int_list(value):
    try:
        return [int(item) for item in value.split(',') if item.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError('expected comma separated integers, got %r' % value) from err


class RunContext:
    """Validated config plus the resolved global flags."""

    def __init__(self, args):
        config = config_utils.load_experiment_config(args.config)
        if args.seed is not None:
            config = config.replace('run', seed=args.seed)
        if args.out is not None:
            config = config.replace('run', out_dir=args.out)
        self.config = config
        self.seed = config.run.seed
        self.out_dir = config.run.out_dir
        if args.threads is not None:
            self.threads = args.threads
        elif os.getenv('SPML_THREADS') or config.run.threads is None:
            self.threads = worker_pool.default_threads()
        else:
            self.threads = config.run.threads
        self.system = config.build_system()
        os.makedirs(self.out_dir, exist_ok=True)

    def out_path(self, filename):
        return os.path.join(self.out_dir, filename)

    def catalog(self, path=None):
        """Attractor catalog from path, [attractors] path, the output directory, or discovery."""
        path = path or self.config.attractors.path
        if path is None and os.path.exists(self.out_path(ATTRACTORS_FILE)):
            path = self.out_path(ATTRACTORS_FILE)
        if path is None:
            return discover(self)
        system, catalog = attractors_lib.load_attractors(path)
        if system.kind != self.system.kind or system.grid != self.system.grid:
            raise config_utils.ConfigError(
                'Attractor catalog %s is for %s on %s, config describes %s on %s' % (
                    path, system.kind, system.grid, self.system.kind, self.system.grid))
        if system.params() != self.system.params():
            raise config_utils.ConfigError(
                'Attractor catalog %s was discovered with %s parameters %s, config gives %s' % (
                    path, system.kind, system.params(), self.system.params()))
        logging.info('Loaded %d attractors from %s', len(catalog), path)
        return catalog


def discover(context):
    config = context.config
    params = config.attractors
    catalog = attractors_lib.discover_attractors(
        context.system, generation.discovery_sampler(context.system, config.ic_spec(context.system)),
        n_pilot=params.n_pilot, seed=context.seed, t_long=params.t_long,
        t_polish_max=params.t_polish_max, merge_tol=params.merge_tol,
        config=config.integrator_config(), threads=context.threads)
    attractors_lib.save_attractors(context.out_path(ATTRACTORS_FILE), context.system, catalog)
    return catalog


def cmd_discover_attractors(context, args):
    for attractor in discover(context):
        print('%d %s' % (attractor.id, attractor.tag))


def cmd_gen_library(context, args):
    config = context.config
    n_per_attractor = args.n_per_attractor or config.library.n_per_attractor
    augment = config.library.augment or args.augment
    library = generation.build_library(
        context.system, context.catalog(args.attractors), config.ic_spec(context.system),
        n_per_attractor, seed=context.seed, augment=augment,
        labeling=config.labeling_params(), config=config.integrator_config(),
        threads=context.threads, draw_budget_factor=config.library.draw_budget_factor)
    storage.save_library(args.output or context.out_path(LIBRARY_FILE), library)


def cmd_learn_metric(context, args):
    config = context.config
    library = storage.load_library(args.library or context.out_path(LIBRARY_FILE))
    pair_sums = pair_sums_lib.assemble_pair_sums(library)
    lambdas = args.lambdas or config.spml.lambdas
    for lam in lambdas:
        params = config.spml_params(lam)
        if args.alpha is not None:
            params = params._replace(alpha=args.alpha)
        try:
            solver.check_params(params)
        except ValueError as err:
            raise config_utils.ConfigError(str(err)) from err
        solution = solver.solve(pair_sums, params)
        solver.save_density(context.out_path(density_filename(lam)), solution)


def cmd_sensors(context, args):
    path = args.density or context.out_path(density_filename(context.config.spml.lambdas[-1]))
    mass_fraction = args.mass_fraction or context.config.sensors.mass_fraction
    sensors = sensors_lib.extract_sensors(solver.load_density(path), mass_fraction)
    sensors_lib.save_sensors(context.out_path(SENSORS_FILE), sensors)
    for location, weight in zip(sensors.locations, sensors.weights):
        print('x=%.6g weight=%.6g' % (location, weight))


def load_measurement(path, grid):
    """Measurement from a JSON file {sensors: [locations], values: [...]}."""
    data = json_utils.load_json(path)
    try:
        locations, values = data['sensors'], data['values']
    except (KeyError, TypeError) as err:
        raise json_utils.ArtifactFormatError(
            'Measurement file %s needs sensors and values: %r' % (path, err)) from err
    return sensors_lib.Measurement(sensors_lib.SensorSet.from_locations(grid, locations), values)


def cmd_classify(context, args):
    library = storage.load_library(args.library or context.out_path(LIBRARY_FILE))
    grid = library.system.grid
    measurement = load_measurement(args.measurement, grid)
    sensors = measurement.sensors
    if args.sensors:
        sensors = sensors_lib.load_sensors(args.sensors, grid=grid)
    metric = metrics_lib.Metric.atoms(sensors)
    label, index, distance = metrics_lib.nearest_neighbor_classify(measurement, library, metric)
    print('label=%d distance=%.17g index=%d' % (label, distance, index))


def cmd_evaluate(context, args):
    config = context.config
    system = context.system
    errors = evaluation.evaluate_error(
        system, context.catalog(args.attractors), config.ic_spec(system),
        args.lib_sizes or config.evaluate.lib_sizes, config.evaluate.metrics,
        args.n_test or config.evaluate.n_test, seed=context.seed, augment=config.library.augment,
        labeling=config.labeling_params(), spml_params=config.spml_params(),
        mass_fraction=config.sensors.mass_fraction, config=config.integrator_config(),
        threads=context.threads,
        draw_budget_factor=config.library.draw_budget_factor)
    path = context.out_path(ERRORS_FILE)
    errors.to_csv(path, index=False)
    logging.info('Wrote %s', path)


def initial_state_from_source(context, source, ic_seed, attractors_path=None):
    """Flat state for --ic random | attractor:<id> | file:<path>."""
    system = context.system
    kind, _, argument = source.partition(':')
    if kind == 'random' and not argument:
        return generation.random_initial_state(system, context.config.ic_spec(system), ic_seed)
    if kind == 'attractor' and argument:
        catalog = context.catalog(attractors_path)
        try:
            return np.array(catalog[[a.id for a in catalog].index(int(argument))].state)
        except ValueError as err:
            raise config_utils.ConfigError('No attractor %r in the catalog' % argument) from err
    if kind == 'file' and argument:
        data = json_utils.load_json(argument)
        try:
            u = Field.from_json(data)
            v_values = data.get('v_values')
        except (KeyError, TypeError, ValueError) as err:
            raise json_utils.ArtifactFormatError('Malformed field file %s: %r' % (
                argument, err)) from err
        if u.grid != system.grid:
            raise json_utils.ArtifactFormatError('Field in %s is on %s, config grid is %s' % (
                argument, u.grid, system.grid))
        if system.kind == FHN_KIND:
            return system.pack(u.values, v_values)
        return np.array(u.values)
    raise config_utils.ConfigError('Bad --ic %r: expected random, attractor:<id> or file:<path>'
                                   % source)


def trajectory_frame(trajectory, system):
    """t, energy, u_0..u_{n-1} (and v_0..v_{n-1} for FitzHugh-Nagumo) per sampled time.

    energy is the flux-form energy of u with the system weight (unit weight for FitzHugh-Nagumo).
    """
    weight = getattr(system, 'weight', None)
    if weight is None:
        weight = Field.constant(system.grid, 1.0)
    n = system.grid.n_points
    columns = {'t': trajectory.times,
               'energy': [energy_functional(system.u_field(state), weight, system.nu,
                                            stencil='flux') for state in trajectory.states]}
    for i in range(n):
        columns['u_%d' % i] = trajectory.states[:, i]
    if system.n_components == 2:
        for i in range(n):
            columns['v_%d' % i] = trajectory.states[:, n + i]
    return pd.DataFrame(columns)


def cmd_simulate(context, args):
    system = context.system
    ic_seed = context.seed if args.ic_seed is None else args.ic_seed
    state = initial_state_from_source(context, args.ic, ic_seed, args.attractors)
    if args.samples < 1:
        raise config_utils.ConfigError('--samples must be at least 1')
    if not args.t_end > 0:
        raise config_utils.ConfigError('--t-end must be positive')
    trajectory = integrator.integrate(
        state, system, context.config.integrator_config(t_end=args.t_end),
        sample_times=np.linspace(0.0, args.t_end, args.samples + 1))
    path = context.out_path(TRAJECTORY_FILE)
    trajectory_frame(trajectory, system).to_csv(path, index=False)
    logging.info('Wrote %s (%d samples)', path, len(trajectory.times))
    if args.sensors:
        sensors = sensors_lib.load_sensors(args.sensors, grid=system.grid)
        label = None
        if args.label:
            label = attractors_lib.match_attractor(
                trajectory.final_state, system, context.catalog(args.attractors),
                context.config.attractors.match_tol)
        path = context.out_path(OBSERVATIONS_FILE)
        sensors_lib.project_trajectory(trajectory, system, sensors, label).to_csv(
            path, index=False)
        logging.info('Wrote %s', path)


def build_parser():
    parser = argparse.ArgumentParser(
        description='Learn sparse metrics that predict the attractor of a multistable PDE.')
    parser.add_argument('--config', help='INI experiment config (defaults when omitted)')
    parser.add_argument('--seed', type=int, help='base seed, overrides [run] seed')
    parser.add_argument('--threads', type=int,
                        help='worker processes, overrides SPML_THREADS and [run] threads')
    parser.add_argument('--out', help='output directory, overrides [run] out_dir')
    parser.add_argument('--log-file', help='also log to this file (default SPML_LOG_FILE)')
    subparsers = parser.add_subparsers(dest='command', required=True)

    simulate = subparsers.add_parser('simulate', help='integrate one initial condition')
    simulate.add_argument('--ic', default='random',
                          help='random, attractor:<id> or file:<field json>')
    simulate.add_argument('--ic-seed', type=int, help='draw seed for --ic random')
    simulate.add_argument('--t-end', type=float, default=10.0)
    simulate.add_argument('--samples', type=int, default=20,
                          help='number of equal time intervals reported after t=0')
    simulate.add_argument('--attractors', help='attractor catalog file')
    simulate.add_argument('--sensors', help='sensors file; also write observations.csv')
    simulate.add_argument('--label', action='store_true',
                          help='label observations.csv with the attractor reached at t-end')
    simulate.set_defaults(handler=cmd_simulate)

    discover_parser = subparsers.add_parser('discover-attractors',
                                            help='find the attractors from random pilot runs')
    discover_parser.set_defaults(handler=cmd_discover_attractors)

    gen_library = subparsers.add_parser('gen-library', help='build a labeled library')
    gen_library.add_argument('--attractors', help='attractor catalog file')
    gen_library.add_argument('--n-per-attractor', type=int)
    gen_library.add_argument('--augment', action='store_true',
                             help='add mirrored states under the mirrored label')
    gen_library.add_argument('--output', help='library file (default <out>/library.json)')
    gen_library.set_defaults(handler=cmd_gen_library)

    learn_metric = subparsers.add_parser('learn-metric', help='solve for the optimal densities')
    learn_metric.add_argument('--library', help='library file (default <out>/library.json)')
    learn_metric.add_argument('--alpha', type=float)
    learn_metric.add_argument('--lambdas', type=_float_list, help='comma separated lambdas')
    learn_metric.set_defaults(handler=cmd_learn_metric)

    sensors = subparsers.add_parser('sensors', help='extract sensors from a density')
    sensors.add_argument('--density',
                         help='density file (default <out>/phi_lambda_<last lambda>.json)')
    sensors.add_argument('--mass-fraction', type=float)
    sensors.set_defaults(handler=cmd_sensors)

    classify = subparsers.add_parser('classify', help='predict the attractor of a measurement')
    classify.add_argument('--library', help='library file (default <out>/library.json)')
    classify.add_argument('--measurement', required=True,
                          help='JSON file {"sensors": [x...], "values": [u(x)...]}')
    classify.add_argument('--sensors', help='sensors file supplying the atom weights')
    classify.set_defaults(handler=cmd_classify)

    evaluate = subparsers.add_parser('evaluate', help='classification error per library size')
    evaluate.add_argument('--attractors', help='attractor catalog file')
    evaluate.add_argument('--lib-sizes', type=_int_list)
    evaluate.add_argument('--n-test', type=int)
    evaluate.set_defaults(handler=cmd_evaluate)
    return parser


def main(argv):
    args = build_parser().parse_args(argv)
    config_utils.configure_logger(args.log_file)
    start = time.monotonic()
    try:
        context = RunContext(args)
        args.handler(context, args)
    except Exception as err:  # pylint: disable=broad-except
        code = exit_code_for(err)
        if code == EXIT_UNEXPECTED:
            logging.exception('%s failed', args.command)
        else:
            logging.error('%s failed: %s', args.command, err)
        return code
    logging.info('%s done in %s', args.command, humanize.naturaldelta(time.monotonic() - start))
    return EXIT_OK


if __name__ == '__main__':
    load_dotenv(override=True)
    sys.exit(main(sys.argv[1:]))
