"""Estimate confidence bounds for one regression coefficient.

Read a censored survival dataset, build the moment inequalities at time t,
and invert the subvector test for coefficient k. The identified set is
written as JSON; an empty set means the model is rejected as misspecified.
"""

__revision__ = 'Revision: 1.0'
__author__ = 'censbounds developers'


import sys

import numpy as np

from censbounds import SurvBoundsException
from censbounds.config import Config, configure_logging
from censbounds.core import LinkKind, ParameterBox
from censbounds.dataset import load_dataset
from censbounds.instruments import build_family
from censbounds.inversion import estimate_interval
from censbounds.modified_optparse import ModifiedOptionParser, OptionParsingError, OptionParsingExit
from censbounds.moments import MomentSystem, check_assumptions, peterson_bounds
from censbounds.report import EXIT_ERROR, EXIT_MISSPECIFIED, EXIT_OK, dump_json, result_document, write_trace_csv


def add_model_options(parser):
    """Options shared by 'estimate' and 'combine'."""
    parser.add_option('--data', metavar='CSV', help='CSV file with columns y, delta, x1..xd')
    parser.add_option('--schema', metavar='FILE', help='column kinds (configparser or JSON)')
    parser.add_option('--link', default='cox', help='link function: cox or aft [default: %default]')
    parser.add_option('--coef', type='int', default=1, metavar='K',
                      help='coefficient index, 0 is the intercept [default: %default]')
    parser.add_option('--alpha', type='float', help='test level')
    parser.add_option('--n-boot', dest='n_boot', type='int', help='bootstrap draws')
    parser.add_option('--family', metavar='SPEC', help='instrumental functions, e.g. "x1=spline:6;normalizer=pca"')
    parser.add_option('--mode', choices=('auto', 'single', 'scan'), help='search mode')
    parser.add_option('--root-finder', dest='root_finder', choices=('binary', 'interp', 'grid', 'eam'),
                      help='bound search')
    parser.add_option('--n-init', dest='n_init', type='int', help='initial grid points')
    parser.add_option('--box', type='float', metavar='M', help='parameter box [-M, M]^(d+1)')
    parser.add_option('--seed', type='int', help='random seed')
    parser.add_option('--threads', type='int', help='worker threads')
    parser.add_option('--standardize', action='store_true', default=None,
                      help='standardize continuous columns')
    parser.add_option('--trace', action='store_true', default=None,
                      help='record optimizer and bootstrap diagnostics')
    parser.add_option('--config', metavar='FILE', help='config file read after the search path')
    parser.add_option('-o', '--out', metavar='FILE', help='write JSON here instead of stdout')
    parser.add_option('-D', '--debug', action='store_true', default=False, help='debug logging')


def build_config(options):
    config = Config(options.config)
    config.update('test', {'alpha': options.alpha, 'n_boot': options.n_boot, 'seed': options.seed})
    config.update('search', {'mode': options.mode, 'root_finder': options.root_finder,
                             'n_init': options.n_init, 'box': options.box})
    config.update('family', {'spec': options.family})
    config.update('run', {'threads': options.threads, 'trace': options.trace})
    return config


def load_model(options, config):
    """(dataset, family, normalizer, link, box) for the command line options."""
    if not options.data or not options.schema:
        raise SurvBoundsException('both --data and --schema are required')
    link = LinkKind.from_name(options.link)
    dataset = load_dataset(options.data, options.schema, standardize=options.standardize)
    if not 0 <= options.coef <= dataset.d:
        raise SurvBoundsException(f'--coef must lie in [0, {dataset.d}], got {options.coef}')
    (family, normalizer) = build_family(dataset, config.family_spec())
    box = ParameterBox.cube(config.get('search', 'box'), dataset.d + 1)
    return (dataset, family, normalizer, link, box)


def search_args(config, box):
    s = config.values['search']
    return {'mode': s['mode'], 'box': box, 'root_finder': s['root_finder'], 'n_init': s['n_init'],
            'tol': s['tol'], 'grid_step': s['grid_step']}


def coefficient_info(dataset, k, intervals):
    info = {'index': k, 'name': dataset.names[k]}
    if dataset.standardized and intervals:
        info['raw_scale_intervals'] = [sorted((dataset.destandardize(k, lo), dataset.destandardize(k, hi)))
                                       for (lo, hi) in intervals]
    return info


def run_estimate(options):
    config = build_config(options)
    if options.time is None:
        raise SurvBoundsException('--time is required')
    (dataset, family, normalizer, link, box) = load_model(options, config)
    system = MomentSystem(dataset, link, options.time, family, normalizer,
                          config.get('test', 'variance_floor'))
    report = check_assumptions(system, box)
    (lower, upper) = peterson_bounds(system)
    result = estimate_interval(system, config.test_config(), options.coef, threads=config.threads,
                               **search_args(config, box))
    body = result.as_dict()
    if not config.get('run', 'trace'):
        body.pop('cache')
    body['assumptions'] = report.as_dict()
    body['peterson'] = {'labels': family.labels(), 'lower': lower, 'upper': upper}
    body['instruments'] = {'J': family.J, 'provenance': family.provenance}
    doc = result_document('estimate', result.status, body, config.as_dict(),
                          coefficient=coefficient_info(dataset, options.coef, result.intervals),
                          model={'link': link.value, 't': options.time, 'n': dataset.n,
                                 'box': box.as_dict(), 'test': config.test_config().describe()})
    dump_json(doc, options.out)
    if options.trace and options.out:
        write_trace_csv(result, f'{options.out}.trace.csv')
    return EXIT_MISSPECIFIED if result.misspecified else EXIT_OK


def main(argv=None):
    """The main entry point for this module. Return 0 for success."""
    parser = ModifiedOptionParser(
                version='%prog ' + __revision__,
                usage='%prog [options] --data CSV --schema FILE --time T -- estimate bounds for one coefficient')
    add_model_options(parser)
    parser.add_option('--time', type='float', metavar='T', help='time point t')

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
            return run_estimate(options)
    except (SurvBoundsException, OSError) as e:
        print(f'Error: {e}', file=sys.stderr)
        return EXIT_ERROR

# vim: sw=4 ts=4 et si:
