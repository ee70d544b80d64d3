"""Run a simulation design and summarize the estimated bounds.

Each replication draws a sample with dependent censoring, estimates the
identified set of one coefficient, and the design reports the mean bounds,
the variance of the width, and how often zero is excluded and the truth
is covered.
"""

__revision__ = 'Revision: 1.0'
__author__ = 'censbounds developers'


import os
import sys
from dataclasses import replace

import numpy as np
import pandas as pd

from censbounds import SurvBoundsException
from censbounds.config import Config, configure_logging
from censbounds.modified_optparse import ModifiedOptionParser, OptionParsingError, OptionParsingExit
from censbounds.report import EXIT_ERROR, EXIT_OK, dump_json, replications_frame, result_document
from censbounds.simulation import DESIGN_PRESETS, SimDesign, read_design, run_design, run_time_design


def load_design(options, config):
    if options.design and options.preset:
        raise SurvBoundsException('give either --design or --preset, not both')
    if options.design:
        design = read_design(options.design)
    elif options.preset:
        if options.preset not in DESIGN_PRESETS:
            raise SurvBoundsException(f'unknown preset {options.preset!r}, choose from {sorted(DESIGN_PRESETS)}')
        design = DESIGN_PRESETS[options.preset]
    else:
        design = SimDesign()
    changes = {'reps': options.reps, 'n': options.n, 'n_boot': options.n_boot, 'seed': options.seed}
    if options.seed is None and os.getenv('CENSBOUNDS_SEED'):
        changes['seed'] = config.get('test', 'seed')
    changes['threads'] = config.threads
    return replace(design, **{k: v for (k, v) in changes.items() if v is not None})


def run_simulate(options):
    config = Config(options.config)
    config.update('run', {'threads': options.threads})
    design = load_design(options, config)
    if options.times:
        metrics = run_time_design(design, options.times)
        result = {rule: m.as_dict() for (rule, m) in metrics.items()}
        frame = pd.concat([replications_frame(m.reps).assign(rule=rule) for (rule, m) in metrics.items()],
                          ignore_index=True)
    else:
        metrics = run_design(design)
        result = metrics.as_dict()
        frame = replications_frame(metrics.reps)
    doc = result_document('simulate', 'done', result, config.as_dict(), design=design.describe(),
                          truth=design.beta_true[design.coef], times=options.times)
    dump_json(doc, options.out)
    csv_path = options.csv or (f'{options.out}.reps.csv' if options.out and options.out != '-' else None)
    if csv_path:
        frame.to_csv(csv_path, index=False, float_format='%.10g', encoding='utf-8')
    return EXIT_OK


def main(argv=None):
    """The main entry point for this module. Return 0 for success."""
    parser = ModifiedOptionParser(
                version='%prog ' + __revision__,
                usage='%prog [options] [--design FILE | --preset NAME] -- run a simulation design')
    parser.add_option('--design', metavar='FILE', help='design file with a [design] section, or JSON')
    parser.add_option('--preset', metavar='NAME', help=f'named design: {", ".join(sorted(DESIGN_PRESETS))}')
    parser.add_option('--reps', type='int', help='replications')
    parser.add_option('--n', type='int', help='sample size per replication')
    parser.add_option('--n-boot', dest='n_boot', type='int', help='bootstrap draws')
    parser.add_option('--seed', type='int', help='random seed')
    parser.add_option('--times', type='floatlist', metavar='T1,T2,...',
                      help='compare single-time bounds with combinations over these times')
    parser.add_option('--threads', type='int', help='worker threads')
    parser.add_option('--config', metavar='FILE', help='config file read after the search path')
    parser.add_option('-o', '--out', metavar='FILE', help='write metrics JSON here instead of stdout')
    parser.add_option('--csv', metavar='FILE', help='per-replication intervals [default: OUT.reps.csv]')
    parser.add_option('-D', '--debug', action='store_true', default=False, help='debug logging')

    try:
        (options, args) = parser.parse_args(argv)
    except OptionParsingError as e:
        print(f'Option paring error: {e.msg}', file=sys.stderr)
        return EXIT_ERROR
    except OptionParsingExit as e:
        return e.status

    if args:
        print(f'Unexpected arguments: {" ".join(args)}', file=sys.stderr)
        return EXIT_ERROR

    configure_logging(options.debug)
    try:
        with np.errstate(over='ignore', under='ignore'):
            return run_simulate(options)
    except (SurvBoundsException, OSError) as e:
        print(f'Error: {e}', file=sys.stderr)
        return EXIT_ERROR

# vim: sw=4 ts=4 et si:
