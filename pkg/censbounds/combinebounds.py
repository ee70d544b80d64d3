"""Combine bounds for a time-independent coefficient over several times.

Estimate the identified set of coefficient k at each time point, at the
level the combination rule asks for, then intersect the sets or take a
majority vote over them.
"""

__revision__ = 'Revision: 1.0'
__author__ = 'censbounds developers'


import sys

import numpy as np

from censbounds import SurvBoundsException
from censbounds.config import configure_logging
from censbounds.estimatebounds import add_model_options, build_config, coefficient_info, load_model, search_args
from censbounds.modified_optparse import ModifiedOptionParser, OptionParsingError, OptionParsingExit
from censbounds.moments import MomentSystem
from censbounds.report import EXIT_ERROR, EXIT_MISSPECIFIED, EXIT_OK, dump_json, result_document
from censbounds.timecombine import RULES, TimeGrid, combine_over_times


def run_combine(options):
    config = build_config(options)
    if not options.times:
        raise SurvBoundsException('--times is required')
    (dataset, family, normalizer, link, box) = load_model(options, config)
    test_config = config.test_config()
    grid = TimeGrid(tuple(sorted(options.times)), options.rule, test_config.alpha)
    floor = config.get('test', 'variance_floor')

    def system_at(t):
        return MomentSystem(dataset, link, t, family, normalizer, floor)

    result = combine_over_times(system_at, test_config, options.coef, grid, threads=config.threads,
                                **search_args(config, box))
    body = result.as_dict()
    body.pop('cache')
    doc = result_document('combine', result.status, body, config.as_dict(),
                          coefficient=coefficient_info(dataset, options.coef, result.intervals),
                          model={'link': link.value, 'times': list(grid.times), 'rule': grid.rule,
                                 'levels': list(grid.levels()), 'n': dataset.n, 'box': box.as_dict(),
                                 'test': test_config.describe()})
    dump_json(doc, options.out)
    return EXIT_MISSPECIFIED if result.misspecified else EXIT_OK


def main(argv=None):
    """The main entry point for this module. Return 0 for success."""
    parser = ModifiedOptionParser(
                version='%prog ' + __revision__,
                usage='%prog [options] --data CSV --schema FILE --times T1,T2,... -- combine bounds over times')
    add_model_options(parser)
    parser.add_option('--times', type='floatlist', metavar='T1,T2,...', help='time points')
    parser.add_option('--rule', choices=RULES, default='intersect',
                      help='intersect, majority or weighted [default: %default]')

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
            return run_combine(options)
    except (SurvBoundsException, OSError) as e:
        print(f'Error: {e}', file=sys.stderr)
        return EXIT_ERROR

# vim: sw=4 ts=4 et si:
