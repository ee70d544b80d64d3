# vim: sw=4 ts=4 et si:
#
"""Domain primitives: observations, link functions and parameter boxes."""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from censbounds import InvalidArgumentException


class LinkKind(enum.Enum):
    """The link placing F(t|x) in Cox-PH or proportional-odds form."""
    COX = 'cox'
    PROPODDS = 'aft'

    @classmethod
    def from_name(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower()
        if key in ('cox', 'coxph'):
            return cls.COX
        if key in ('aft', 'propodds', 'po'):
            return cls.PROPODDS
        raise InvalidArgumentException(f'unknown link: {name!r}')

    def cdf(self, v):
        """Lambda(v), unchecked, for hot loops."""
        if self is LinkKind.COX:
            with np.errstate(over='ignore'):
                return -np.expm1(-np.exp(v))
        return expit(v)

    def density(self, v):
        """Lambda'(v), unchecked."""
        if self is LinkKind.COX:
            with np.errstate(over='ignore'):
                return np.exp(v - np.exp(v))
        return expit(v) * expit(-v)

    def quantile(self, p):
        if self is LinkKind.COX:
            return np.log(-np.log1p(-p))
        return logit(p)


def _check_finite(v, what):
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentException(f'{what} must be finite')
    return arr


def link_eval(link, v):
    """Evaluate the link at v (scalar or array)."""
    link = LinkKind.from_name(link)
    arr = _check_finite(v, 'link argument')
    res = link.cdf(arr)
    return float(res) if res.ndim == 0 else res


def link_deriv(link, v):
    link = LinkKind.from_name(link)
    arr = _check_finite(v, 'link argument')
    res = link.density(arr)
    return float(res) if res.ndim == 0 else res


def link_inverse(link, p):
    """Inverse link; p must lie strictly inside (0,1)."""
    link = LinkKind.from_name(link)
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise InvalidArgumentException('link_inverse needs probabilities in (0,1)')
    res = link.quantile(arr)
    return float(res) if res.ndim == 0 else res


class ColumnKind(enum.Enum):
    CONTINUOUS = 'continuous'
    BINARY = 'binary'
    CATEGORICAL = 'categorical'

    @classmethod
    def from_name(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise InvalidArgumentException(f'unknown column kind: {name!r}') from None

    @property
    def discrete(self):
        return self is not ColumnKind.CONTINUOUS


@dataclass(frozen=True)
class Observation:
    y: float
    delta: int
    x: tuple

    def __post_init__(self):
        if not math.isfinite(self.y) or self.y < 0:
            raise InvalidArgumentException(f'follow-up time must be finite and >= 0, got {self.y}')
        if self.delta not in (0, 1):
            raise InvalidArgumentException(f'event indicator must be 0 or 1, got {self.delta}')
        if len(self.x) == 0 or self.x[0] != 1.0:
            raise InvalidArgumentException('covariate vector must start with the intercept 1')


@dataclass(frozen=True, eq=False)
class ParameterBox:
    """Axis-aligned box B = [lower, upper] of dimension d+1."""
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape or lower.size == 0:
            raise InvalidArgumentException('box bounds must be nonempty and of equal length')
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise InvalidArgumentException('box bounds must be finite')
        if not np.all(lower < upper):
            raise InvalidArgumentException('box needs lower < upper in every coordinate')
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @classmethod
    def cube(cls, bound, dim):
        """The box [-bound, bound]^dim."""
        if bound <= 0:
            raise InvalidArgumentException(f'box bound must be positive, got {bound}')
        return cls(np.full(dim, -float(bound)), np.full(dim, float(bound)))

    @property
    def dim(self):
        return self.lower.size

    def interval(self, k):
        """The projection B_k as (lo, hi)."""
        return (float(self.lower[k]), float(self.upper[k]))

    def width(self, k):
        return float(self.upper[k] - self.lower[k])

    def center(self):
        return (self.lower + self.upper) / 2.0

    def contains(self, beta):
        beta = np.asarray(beta, dtype=float)
        return bool(np.all(beta >= self.lower) and np.all(beta <= self.upper))

    def free_indices(self, k):
        """Coordinates left free once coordinate k is pinned."""
        return np.array([j for j in range(self.dim) if j != k], dtype=int)

    def shrunk(self, eps, k=None):
        """Bounds of the box minus an eps-neighbourhood of its boundary.

        Coordinate k (if given) is left alone since it is pinned in the slice.
        Returns (lower, upper) which may be empty (lower > upper somewhere).
        """
        lower = self.lower + eps
        upper = self.upper - eps
        if k is not None:
            lower[k] = self.lower[k]
            upper[k] = self.upper[k]
        return (lower, upper)

    def as_dict(self):
        return {'lower': self.lower.tolist(), 'upper': self.upper.tolist()}
