# vim: sw=4 ts=4 et si:
#
"""Confidence bounds for survival regression coefficients under unspecified censoring"""

__version__ = '1.0'


class SurvBoundsException(Exception):
    pass


class InvalidArgumentException(SurvBoundsException):
    pass


class NotSupportedException(SurvBoundsException):
    pass


class NumericalFailureException(SurvBoundsException):
    """Raised when every optimizer start failed; carries what was tried."""
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = list(trace or [])
