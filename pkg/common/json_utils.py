"""JSON helpers for the versioned artifact files (libraries, densities, sensors, attractor catalogs)."""
import logging

import numpy as np
import simplejson as json


class Error(Exception):
    pass


class ArtifactFormatError(Error):
    """File is unreadable, truncated, or carries the wrong schema version."""


class NumpyJSONEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        return json.JSONEncoder.default(self, o)


def dumps(obj):
    """Serialize with sorted keys so identical inputs produce byte-identical files."""
    return json.dumps(obj, cls=NumpyJSONEncoder, sort_keys=True, indent=1)


def dump_json(path, obj):
    with open(path, 'w', encoding='UTF-8') as open_file:
        open_file.write(dumps(obj))
        open_file.write('\n')
    logging.info('Wrote %s', path)


def load_json(path, expected_version=None, error_class=ArtifactFormatError):
    """Load a JSON artifact, checking its version field when expected_version is given.

    Args:
        path: str file path.
        expected_version: str version tag the file must carry, or None to skip the check.
        error_class: Error subclass raised for unreadable or mismatched files.
    Returns:
        the decoded object.
    Raises:
        error_class if the file cannot be read or parsed, or its version does not match.
    """
    try:
        with open(path, encoding='UTF-8') as open_file:
            data = json.load(open_file)
    except OSError as err:
        raise error_class('Unable to read %s: %s' % (path, err)) from err
    except json.JSONDecodeError as err:
        raise error_class('Unable to parse %s: %s' % (path, err)) from err
    if expected_version is not None:
        version = data.get('version') if isinstance(data, dict) else None
        if version != expected_version:
            raise error_class('%s: expected version %r, found %r' % (
                path, expected_version, version))
    return data
