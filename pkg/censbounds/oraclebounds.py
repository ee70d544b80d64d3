"""Approximate the true identified set of a simulation design.

The moments are averaged over a large simulated sample and checked on an
adaptively refined grid; the projections of the feasible points give the
true bounds for every coefficient, averaged over several samples.
"""

__revision__ = 'Revision: 1.0'
__author__ = 'censbounds developers'


import sys
from dataclasses import replace

import numpy as np

from censbounds import SurvBoundsException
from censbounds.config import Config, configure_logging
from censbounds.modified_optparse import ModifiedOptionParser, OptionParsingError, OptionParsingExit
from censbounds.oracle import oracle_bounds
from censbounds.report import EXIT_ERROR, EXIT_MISSPECIFIED, EXIT_OK, dump_json, result_document
from censbounds.simulatebounds import load_design


def run_oracle(options):
    config = Config(options.config)
    config.update('oracle', {'n_mc': options.n_mc, 'error': options.error, 'draws': options.draws})
    config.update('run', {'threads': options.threads})
    options.reps = options.n = options.n_boot = None
    design = load_design(options, config)
    if options.coef is not None:
        design = replace(design, coef=options.coef)
    if not 0 <= design.coef < design.beta_true.size:
        raise SurvBoundsException(f'--coef must lie in [0, {design.beta_true.size - 1}], got {design.coef}')
    result = oracle_bounds(design, config.oracle_config(box=options.box))
    body = result.as_dict()
    body['coefficient'] = {'index': design.coef, 'bounds': result.projection(design.coef)}
    status = 'misspecified' if result.empty else 'feasible'
    doc = result_document('oracle', status, body, config.as_dict(), design=design.describe(),
                          truth=design.beta_true)
    dump_json(doc, options.out)
    return EXIT_MISSPECIFIED if result.empty else EXIT_OK


def main(argv=None):
    """The main entry point for this module. Return 0 for success."""
    parser = ModifiedOptionParser(
                version='%prog ' + __revision__,
                usage='%prog [options] [--design FILE | --preset NAME] -- true bounds of a design')
    parser.add_option('--design', metavar='FILE', help='design file with a [design] section, or JSON')
    parser.add_option('--preset', metavar='NAME', help='named design')
    parser.add_option('--coef', type='int', metavar='K', help='coefficient to report [default: design coef]')
    parser.add_option('--n-mc', dest='n_mc', type='int', help='Monte-Carlo sample size')
    parser.add_option('--error', type='float', help='target grid spacing')
    parser.add_option('--draws', type='int', help='samples to average over')
    parser.add_option('--box', type='float', metavar='M', help='parameter box [-M, M]^(d+1)')
    parser.add_option('--seed', type='int', help='random seed')
    parser.add_option('--threads', type='int', help='worker threads')
    parser.add_option('--config', metavar='FILE', help='config file read after the search path')
    parser.add_option('-o', '--out', metavar='FILE', help='write JSON here instead of stdout')
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
            return run_oracle(options)
    except (SurvBoundsException, OSError) as e:
        print(f'Error: {e}', file=sys.stderr)
        return EXIT_ERROR

# vim: sw=4 ts=4 et si:
