"""Module to hold common config logic.

An experiment is configured by one INI file. Every key is optional; the defaults reproduce the
weighted reaction-diffusion experiment. See EXAMPLE.spml.cfg for the full list of keys.
"""
import collections
import configparser
import dataclasses
import logging
import math
import os

from common import grid_quadrature
from common.grid_quadrature import Grid
from dynamics import integrator
from dynamics.systems import FHN_KIND, RD_KIND, build_system
from library import generation
from metrics_classify import evaluation
from metrics_classify import sensors as sensors_lib
from spml_solver import solver


class ConfigError(Exception):
    """Unreadable config file, unknown section or key, or out-of-range value."""


def _float_list(value):
    return [float(item) for item in value.split(',') if item.strip()]


def _int_list(value):
    return [int(item) for item in value.split(',') if item.strip()]


def _str_list(value):
    return [item.strip() for item in value.split(',') if item.strip()]


def _optional(parse):
    def parse_optional(value):
        if value.strip().lower() in ('', 'none'):
            return None
        return parse(value)
    return parse_optional


def _bool(value):
    lowered = value.strip().lower()
    if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
        raise ValueError('not a boolean: %r' % value)
    return configparser.ConfigParser.BOOLEAN_STATES[lowered]


# section -> key -> (parser, default)
SCHEMA = {
    'system': {
        'kind': (str, RD_KIND),
        'nu': (float, 1e-2),
        'weighted': (_bool, True),
        'a': (float, 0.3),
        'x0': (float, 0.5),
        'epsilon': (float, 0.01),
        'beta': (float, 1e-2),
        'gamma': (float, 1.0),
    },
    'grid': {
        'n_points': (int, grid_quadrature.DEFAULT_N_POINTS),
        'x_min': (float, grid_quadrature.DEFAULT_X_MIN),
        'x_max': (float, grid_quadrature.DEFAULT_X_MAX),
    },
    'integrator': {
        'rtol': (float, integrator.DEFAULT_TOLERANCE),
        'atol': (float, integrator.DEFAULT_TOLERANCE),
        'max_step': (float, math.inf),
        'first_step': (_optional(float), None),
    },
    # None means the per-system default of generation.default_ic_spec
    'initial_conditions': {
        'n_modes': (_optional(int), None),
        'center': (_optional(float), None),
        'amplitude': (_optional(float), None),
        't0': (float, generation.DEFAULT_T0),
    },
    'attractors': {
        'path': (_optional(str), None),
        'n_pilot': (int, 50),
        't_long': (float, 300.0),
        't_polish_max': (float, 500.0),
        'merge_tol': (float, 0.05),
        'match_tol': (float, 1e-2),
        'window': (float, 25.0),
        't_max': (float, 500.0),
    },
    'library': {
        'n_per_attractor': (int, 20),
        'augment': (_bool, False),
        'draw_budget_factor': (int, generation.DEFAULT_DRAW_BUDGET_FACTOR),
    },
    'spml': {
        'alpha': (float, 1.0),
        'lambdas': (_float_list, [0.0, 0.9]),
        'c': (float, 1.0),
        'kkt_tol': (float, 1e-6),
        'constraint_tol': (float, 1e-8),
        'max_iter': (int, 20000),
        'method': (str, 'projected_gradient'),
    },
    'sensors': {
        'mass_fraction': (float, sensors_lib.DEFAULT_MASS_FRACTION),
    },
    'evaluate': {
        'lib_sizes': (_int_list, [5, 10, 20, 50]),
        'metrics': (_str_list, list(evaluation.DEFAULT_METRICS)),
        'n_test': (int, 3000),
    },
    'run': {
        'seed': (int, 0),
        'threads': (_optional(int), None),
        'out_dir': (str, 'out'),
    },
}

SECTION_TYPES = {
    name: collections.namedtuple(name.title().replace('_', '') + 'Section', list(keys))
    for name, keys in SCHEMA.items()}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Typed view of an experiment config file, one namedtuple per section."""
    system: tuple
    grid: tuple
    integrator: tuple
    initial_conditions: tuple
    attractors: tuple
    library: tuple
    spml: tuple
    sensors: tuple
    evaluate: tuple
    run: tuple

    @classmethod
    def defaults(cls):
        return cls(**{
            name: SECTION_TYPES[name](**{key: default for key, (_, default) in keys.items()})
            for name, keys in SCHEMA.items()})

    def replace(self, section, **values):
        """Copy with some keys of one section replaced, revalidated."""
        updated = dataclasses.replace(self, **{section: getattr(self, section)._replace(**values)})
        validate(updated)
        return updated

    def build_grid(self):
        return Grid(self.grid.n_points, self.grid.x_min, self.grid.x_max)

    def build_system(self):
        params = self.system
        if params.kind == FHN_KIND:
            return build_system(FHN_KIND, grid=self.build_grid(), nu=params.nu, beta=params.beta,
                                gamma=params.gamma)
        return build_system(params.kind, grid=self.build_grid(), nu=params.nu,
                            weighted=params.weighted, a=params.a, x0=params.x0,
                            epsilon=params.epsilon)

    def integrator_config(self, t_end=10.0):
        params = self.integrator
        return integrator.IntegratorConfig(rtol=params.rtol, atol=params.atol,
                                           max_step=params.max_step,
                                           first_step=params.first_step, t_end=t_end)

    def ic_spec(self, system):
        defaults = generation.default_ic_spec(system, t0=self.initial_conditions.t0)
        overrides = {key: value for key, value in self.initial_conditions._asdict().items()
                     if value is not None and key != 't0'}
        return defaults._replace(**overrides)

    def labeling_params(self):
        return generation.LabelingParams(t_max=self.attractors.t_max,
                                         window=self.attractors.window,
                                         match_tol=self.attractors.match_tol)

    def spml_params(self, lam=None):
        params = self.spml
        return solver.SPMLParams(alpha=params.alpha,
                                 lam=params.lambdas[-1] if lam is None else lam, c=params.c,
                                 kkt_tol=params.kkt_tol, constraint_tol=params.constraint_tol,
                                 max_iter=params.max_iter, method=params.method)


def _check(condition, section, key, message):
    if not condition:
        raise ConfigError('[%s] %s: %s' % (section, key, message))


def validate(config):
    """Range checks across all sections.

    Raises:
        ConfigError naming the offending section and key.
    """
    _check(config.system.kind in (RD_KIND, FHN_KIND), 'system', 'kind',
           'expected %s or %s, got %r' % (RD_KIND, FHN_KIND, config.system.kind))
    _check(config.system.nu > 0, 'system', 'nu', 'must be positive')
    _check(config.grid.n_points >= 3, 'grid', 'n_points', 'must be at least 3')
    _check(config.grid.x_max > config.grid.x_min, 'grid', 'x_max', 'must exceed x_min')
    try:
        system = config.build_system()
    except (ValueError, grid_quadrature.Error) as err:
        raise ConfigError('[system] %s' % err) from err
    try:
        integrator.check_integrator_config(config.integrator_config())
        generation.check_ic_spec(config.ic_spec(system))
    except ValueError as err:
        raise ConfigError('[integrator/initial_conditions] %s' % err) from err
    attractors = config.attractors
    _check(attractors.n_pilot >= 50, 'attractors', 'n_pilot', 'must be at least 50')
    for key in ('t_long', 't_polish_max', 'merge_tol', 'match_tol', 'window', 't_max'):
        _check(getattr(attractors, key) > 0, 'attractors', key, 'must be positive')
    _check(config.library.n_per_attractor >= 1, 'library', 'n_per_attractor',
           'must be at least 1')
    _check(config.library.draw_budget_factor >= 1, 'library', 'draw_budget_factor',
           'must be at least 1')
    _check(config.spml.lambdas, 'spml', 'lambdas', 'needs at least one value')
    try:
        for lam in config.spml.lambdas:
            solver.check_params(config.spml_params(lam))
    except ValueError as err:
        raise ConfigError('[spml] %s' % err) from err
    _check(0 < config.sensors.mass_fraction <= 1, 'sensors', 'mass_fraction',
           'must lie in (0, 1]')
    _check(config.evaluate.lib_sizes and min(config.evaluate.lib_sizes) >= 1, 'evaluate',
           'lib_sizes', 'needs positive sizes')
    _check(config.evaluate.n_test >= 1, 'evaluate', 'n_test', 'must be at least 1')
    try:
        for spec in config.evaluate.metrics:
            evaluation.parse_metric_spec(spec)
    except evaluation.MetricSpecError as err:
        raise ConfigError('[evaluate] metrics: %s' % err) from err
    _check(config.run.threads is None or config.run.threads >= 1, 'run', 'threads',
           'must be at least 1')


def get_config(config_path):
    """Get configparser object initialized from config path.

    Args:
        config_path: str file path to config.
    Returns:
        configparser.ConfigParser initialized from config_path.
    Raises:
        ConfigError if the file is missing or malformed.
    """
    config = configparser.ConfigParser()
    try:
        read = config.read(config_path)
    except configparser.Error as err:
        raise ConfigError('Unable to parse %s: %s' % (config_path, err)) from err
    if not read:
        raise ConfigError('Unable to read config file %s' % config_path)
    return config


def experiment_config_from_parser(parser):
    """ExperimentConfig from a configparser.ConfigParser, rejecting unknown sections and keys."""
    sections = {}
    for name in parser.sections():
        if name not in SCHEMA:
            raise ConfigError('Unknown section [%s]' % name)
    for name, keys in SCHEMA.items():
        values = {key: default for key, (_, default) in keys.items()}
        if parser.has_section(name):
            for key, raw in parser.items(name, raw=True):
                if key not in keys:
                    raise ConfigError('Unknown key %r in section [%s]' % (key, name))
                parse = keys[key][0]
                try:
                    values[key] = parse(raw)
                except ValueError as err:
                    raise ConfigError('[%s] %s: bad value %r' % (name, key, raw)) from err
        sections[name] = SECTION_TYPES[name](**values)
    config = ExperimentConfig(**sections)
    validate(config)
    return config


def load_experiment_config(config_path=None):
    """ExperimentConfig from config_path, or the defaults when config_path is None."""
    if config_path is None:
        config = ExperimentConfig.defaults()
        validate(config)
        return config
    return experiment_config_from_parser(get_config(config_path))


def configure_logger(log_filename=None):
    """Configure root logger to write to STDOUT, and to log_filename if given.

    Args:
      log_filename: str, filename to be used for log file, or None (falls back to SPML_LOG_FILE).
    """
    log_filename = log_filename or os.getenv('SPML_LOG_FILE')
    record_format = (
        '[%(levelname)s\t%(asctime)s] %(process)d %(thread)d {%(filename)s:%(lineno)d} '
        '%(message)s')
    handlers = [logging.StreamHandler()]
    if log_filename:
        handlers.append(logging.FileHandler(log_filename))
    logging.basicConfig(
        handlers=handlers,
        format=record_format,
        level=logging.INFO,
        force=True)
