"""Library files: {version, system, params, grid, attractors, states}."""
from common import grid_quadrature, json_utils
from common.grid_quadrature import Field, Grid
from dynamics import attractors as attractors_lib
from dynamics.systems import build_system
from library.generation import LabeledLibrary, LabeledState

LIBRARY_VERSION = 'spml-lib/1'


class LibraryFormatError(json_utils.ArtifactFormatError):
    pass


def library_to_json(library):
    states = []
    for state in library.states:
        entry = {'u0': state.u0.values, 'label': state.label, 'seed': state.seed,
                 'augmented': state.augmented}
        if state.v0 is not None:
            entry['v0'] = state.v0.values
        states.append(entry)
    return {
        'version': LIBRARY_VERSION,
        'system': library.system.kind,
        'params': library.system.params(),
        'grid': library.system.grid.to_json(),
        'attractors': attractors_lib.catalog_to_json(library.attractors),
        'states': states,
    }


def library_from_json(data):
    grid = Grid.from_json(data['grid'])
    system = build_system(data['system'], grid=grid, **data['params'])
    catalog = attractors_lib.catalog_from_json(data['attractors'], grid)
    states = []
    for entry in data['states']:
        v0 = Field(grid, entry['v0']) if 'v0' in entry else None
        if (v0 is None) != (system.n_components == 1):
            raise LibraryFormatError('State with seed %r has the wrong components for %s' % (
                entry.get('seed'), system.kind))
        states.append(LabeledState(Field(grid, entry['u0']), v0, int(entry['label']),
                                   int(entry['seed']), bool(entry['augmented'])))
    return LabeledLibrary(system, catalog, states)


def save_library(path, library):
    json_utils.dump_json(path, library_to_json(library))


def load_library(path):
    """Read a library file.

    Raises:
        LibraryFormatError if the file is unreadable, truncated, of another version, or
        inconsistent (labels outside the catalog, fields off the grid).
    """
    data = json_utils.load_json(path, LIBRARY_VERSION, error_class=LibraryFormatError)
    try:
        return library_from_json(data)
    except LibraryFormatError:
        raise
    except (KeyError, TypeError, ValueError, grid_quadrature.Error) as err:
        raise LibraryFormatError('Malformed library %s: %r' % (path, err)) from err
