"""Our own 'optparse' class, that does not call sys.exit().

Set up Option Parsing class so that we can
stop the option parser from calling sys.exit()
when it encounters an error, or after printing --help
or --version, and add the option types our commands share."""

from copy import copy
from optparse import Option, OptionParser, OptionValueError


class OptionParsingError(RuntimeError):
    """An exception raised when parser.error() is called."""
    def __init__(self, msg):
        self.msg = msg


class OptionParsingExit(RuntimeError):
    """Raised instead of exiting after --help or --version."""
    def __init__(self, status=0, msg=None):
        self.status = status
        self.msg = msg


def check_floatlist(option, opt, value):
    """Comma separated floats, e.g. '0.333,0.667,1'."""
    try:
        values = [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise OptionValueError(f'option {opt}: invalid list of numbers: {value!r}')
    if not values:
        raise OptionValueError(f'option {opt}: empty list of numbers')
    return values


class SurvBoundsOption(Option):
    TYPES = (*Option.TYPES, 'floatlist')
    TYPE_CHECKER = copy(Option.TYPE_CHECKER)
    TYPE_CHECKER['floatlist'] = check_floatlist


class ModifiedOptionParser(OptionParser):
    """Our own Option Parsing class, that does not call sys.exit()."""
    def __init__(self, **kwargs):
        kwargs.setdefault('option_class', SurvBoundsOption)
        super().__init__(**kwargs)

    def error(self, msg):
        raise OptionParsingError(msg)

    def exit(self, status=0, msg=None):
        raise OptionParsingExit(status, msg)
