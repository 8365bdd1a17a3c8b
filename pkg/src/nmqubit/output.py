"""CSV and JSON writers.

Files carry no timestamps, so re-running a command with the same
configuration reproduces them byte for byte.
"""
import json
import logging
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12e"

COEFFICIENT_COLUMNS = ("t", "Delta", "gamma", "Gamma1", "Gamma2")
TRAJECTORY_COLUMNS = ("t", "x", "y", "z", "ux", "uy", "dW", "Y", "Lambda")
CONTROL_COLUMNS = ("t", "ux", "uy", "l1", "l2", "l3", "x", "y", "z")
ENSEMBLE_COLUMNS = (
    "t",
    "mean_Lambda",
    "var_Lambda",
    "mean_x",
    "mean_y",
    "mean_z",
    "var_x",
    "var_y",
    "var_z",
)
SCAN_COLUMNS = ("t", "Lambda")


def provenance(**items):
    """Header lines ``key: value`` in a fixed order."""
    return ["{}: {}".format(key, _format(items[key])) for key in sorted(items)]


def _format(value):
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, data, columns, header=(), footer=None):
    """Write ``data`` with ``#`` comment lines above the column names.

    Args
    ----
        path : str or Path
        data : np.ndarray
                Two-dimensional array with one column per name.
        columns : sequence of str
        header : sequence of str
                Provenance lines written before the column names.
        footer : str, optional
                Comment line written after the data.
    """
    path = Path(path)
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(columns):
        raise ValueError(
            "data of shape {} does not match the columns {}.".format(
                data.shape, columns
            )
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        data,
        fmt=FLOAT_FORMAT,
        delimiter=",",
        header="\n".join(list(header) + [",".join(columns)]),
        footer=footer or "",
        comments="# ",
    )
    logger.info("wrote %s (%d rows)", path, len(data))
    return path


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    logger.info("wrote %s", path)
    return path


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def read_csv(path):
    """Load a file written by :func:`write_csv` as a 2-d array."""
    return np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#"))
