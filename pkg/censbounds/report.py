# vim: sw=4 ts=4 et si:
"""
JSON and CSV artifacts written by the commands
"""

import enum
import json
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from censbounds import __version__

# exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSPECIFIED = 2


def to_plain(obj):
    """Recursively turn numpy values, enums and tuples into JSON types.

    Non-finite floats become null.
    """
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for (k, v) in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def result_document(command, status, result, config, **extra):
    doc = {'command': command, 'version': __version__, 'status': status, 'result': result,
           'config': config}
    doc.update(extra)
    return to_plain(doc)


def dump_json(doc, out=None):
    """Write doc as UTF-8 JSON to the path `out`, or to stdout."""
    text = json.dumps(to_plain(doc), sort_keys=True, indent=2, allow_nan=False) + '\n'
    if out is None or str(out) == '-':
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding='utf-8')
    return text


def replications_frame(replications):
    """One row per replication and interval piece."""
    rows = []
    for rep in replications:
        pieces = rep.intervals or [(math.nan, math.nan)]
        for (i, (lo, hi)) in enumerate(pieces):
            rows.append({'rep': rep.rep, 'piece': i, 'lower': lo, 'upper': hi,
                         'misspecified': int(rep.misspecified), 'censored': rep.censored,
                         'error': rep.error or ''})
    return pd.DataFrame(rows, columns=['rep', 'piece', 'lower', 'upper', 'misspecified', 'censored', 'error'])


def cache_frame(identified_set):
    """The evaluation trace of an inversion: r, T_n(r), critical value, feasible."""
    return pd.DataFrame([{'r': e.r, 'statistic': e.statistic, 'critical_value': e.critical_value,
                          'feasible': int(e.feasible)} for e in identified_set.cache],
                        columns=['r', 'statistic', 'critical_value', 'feasible'])


def write_trace_csv(identified_set, path):
    cache_frame(identified_set).to_csv(path, index=False, float_format='%.10g', encoding='utf-8')
