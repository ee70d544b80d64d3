"""Single entry point for all censbounds commands.

    censbounds estimate|combine|simulate|oracle [options]

Exit status is 0 on success, 2 when the identified set is empty (the model
is rejected as misspecified), and 1 on any error.
"""

__revision__ = 'Revision: 1.0'
__author__ = 'censbounds developers'


import sys

from censbounds import __version__, combinebounds, estimatebounds, oraclebounds, simulatebounds
from censbounds.report import EXIT_ERROR, EXIT_OK

COMMANDS = {
    'estimate': estimatebounds.main,
    'combine': combinebounds.main,
    'simulate': simulatebounds.main,
    'oracle': oraclebounds.main,
    }


def usage(out):
    print(f'usage: censbounds {{{"|".join(COMMANDS)}}} [options]', file=out)
    print("       censbounds COMMAND --help for the command's options", file=out)


def dispatch(argv):
    """Run the command named by argv[0] with the remaining arguments."""
    if not argv:
        usage(sys.stderr)
        return EXIT_ERROR
    (command, rest) = (argv[0], list(argv[1:]))
    if command in ('-h', '--help', 'help'):
        usage(sys.stdout)
        return EXIT_OK
    if command == '--version':
        print(f'censbounds {__version__}')
        return EXIT_OK
    if command not in COMMANDS:
        print(f'Unknown command: {command}', file=sys.stderr)
        usage(sys.stderr)
        return EXIT_ERROR
    return COMMANDS[command](rest)


def main(argv=None):
    """The main entry point for this module. Return 0 for success."""
    return dispatch(sys.argv[1:] if argv is None else argv)

# vim: sw=4 ts=4 et si:
