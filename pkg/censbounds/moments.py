# vim: sw=4 ts=4 et si:
#
"""The 2J unconditional moment inequalities at a fixed time point.

For instrument g_j the pair of moments is

    m_{j,1} = (1{Y <= t} - Lambda(X'b)) g_j
    m_{j,2} = (Lambda(X'b) - 1{Y <= t, Delta = 1}) g_j

stored in that order: the J first-kind moments, then the J second-kind.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from censbounds import InvalidArgumentException
from censbounds.core import LinkKind
from censbounds.instruments import CoverageException, check_coverage

log = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class MomentSystem:
    dataset: object
    link: LinkKind
    t: float
    family: object
    normalizer: object
    floor: float = VARIANCE_FLOOR

    def __post_init__(self):
        object.__setattr__(self, 'link', LinkKind.from_name(self.link))
        if not self.floor > 0:
            raise InvalidArgumentException(f'variance floor must be positive, got {self.floor}')
        if not np.isfinite(self.t):
            raise InvalidArgumentException('time point must be finite')
        y = self.dataset.y
        if self.t < y.min() or self.t > y.max():
            log.warning('time point %g lies outside the observed follow-up range [%g, %g]',
                        self.t, y.min(), y.max())

    @cached_property
    def g(self):
        """Instrument values at the sample, shape (n, J)."""
        g = self.family.evaluate(self.normalizer.transform(self.dataset.x))
        g.setflags(write=False)
        return g

    @cached_property
    def at_risk_before(self):
        """1{Y <= t}"""
        return (self.dataset.y <= self.t).astype(float)

    @cached_property
    def event_before(self):
        """1{Y <= t, Delta = 1}"""
        return ((self.dataset.y <= self.t) & (self.dataset.delta == 1)).astype(float)

    @property
    def n(self):
        return self.dataset.n

    @property
    def J(self):
        return self.family.J

    @property
    def dim(self):
        return self.dataset.d + 1

    def with_time(self, t):
        return MomentSystem(self.dataset, self.link, t, self.family, self.normalizer, self.floor)

    def check_beta(self, beta):
        beta = np.asarray(beta, dtype=float).reshape(-1)
        if beta.size != self.dim:
            raise InvalidArgumentException(f'beta has {beta.size} entries, expected {self.dim}')
        return beta


@dataclass(frozen=True, eq=False)
class MomentStats:
    mbar: np.ndarray
    sigma_hat: np.ndarray
    omega_hat: np.ndarray
    n: int
    floored: np.ndarray

    def studentized(self):
        """sqrt(n) mbar / sigma_hat"""
        return np.sqrt(self.n) * self.mbar / self.sigma_hat


def moment_matrix(system, beta):
    """Per-row moments, shape (n, 2J)."""
    beta = system.check_beta(beta)
    lam = system.link.cdf(system.dataset.x @ beta)
    g = system.g
    return np.hstack(((system.at_risk_before - lam)[:, None] * g,
                      (lam - system.event_before)[:, None] * g))


def moment_row(system, observation, beta):
    """The 2J-vector m(W, beta) for a single observation."""
    beta = system.check_beta(beta)
    x = np.asarray(observation.x, dtype=float)
    if x.size != beta.size:
        raise InvalidArgumentException(f'observation has {x.size} covariates, expected {beta.size}')
    g = system.family.evaluate(system.normalizer.transform(x[None, :]))[0]
    lam = system.link.cdf(x @ beta)
    before = float(observation.y <= system.t)
    event = float(observation.y <= system.t and observation.delta == 1)
    return np.concatenate(((before - lam) * g, (lam - event) * g))


def _stats_from_matrix(system, m):
    n = m.shape[0]
    mbar = m.mean(axis=0)
    var = np.maximum((m * m).mean(axis=0) - mbar * mbar, 0.0)
    raw_sd = np.sqrt(var)
    floored = raw_sd <= system.floor
    sigma = np.where(floored, system.floor, raw_sd)
    centered = m - mbar
    omega = (centered.T @ centered) / n / np.outer(sigma, sigma)
    omega = np.clip((omega + omega.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(omega, 1.0)
    return MomentStats(mbar=mbar, sigma_hat=sigma, omega_hat=omega, n=n, floored=floored)


def moment_mean_sd(system, beta):
    """(mbar, floored sigma_hat) without the correlation matrix."""
    m = moment_matrix(system, beta)
    mbar = m.mean(axis=0)
    sd = np.sqrt(np.maximum((m * m).mean(axis=0) - mbar * mbar, 0.0))
    return (mbar, np.maximum(sd, system.floor))


def sample_stats(system, beta):
    if system.n < 2:
        raise InvalidArgumentException('sample statistics need at least two observations')
    return _stats_from_matrix(system, moment_matrix(system, beta))


def _row_gradient_weights(system, beta):
    """Lambda'(x_i'b) g_ij / n, shape (n, J)."""
    dens = system.link.density(system.dataset.x @ beta)
    return dens[:, None] * system.g / system.n


def moment_gradient(system, beta):
    """d mbar / d beta, shape (2J, d+1)."""
    beta = system.check_beta(beta)
    first = -(_row_gradient_weights(system, beta).T @ system.dataset.x)
    return np.vstack((first, -first))


def g_hat(system, beta):
    """Plug-in gradient of mbar / sigma_hat, shape (2J, d+1).

    Coordinates sitting at the variance floor have a flat sigma_hat.
    """
    beta = system.check_beta(beta)
    if system.n < 2:
        raise InvalidArgumentException('g_hat needs at least two observations')
    m = moment_matrix(system, beta)
    stats = _stats_from_matrix(system, m)
    dmbar = moment_gradient(system, beta)
    x = system.dataset.x
    dens = system.link.density(x @ beta)
    centered = m - stats.mbar
    # d m_ij / d beta = -+ dens_i g_ij x_i, so sum_i (m_ij - mbar_j) d m_ij
    dg = dens[:, None] * system.g
    J = system.J
    first = -((centered[:, :J] * dg).T @ x)
    second = (centered[:, J:] * dg).T @ x
    dsigma = np.vstack((first, second)) / (system.n * stats.sigma_hat[:, None])
    dsigma[stats.floored] = 0.0
    sigma = stats.sigma_hat[:, None]
    return (sigma * dmbar - stats.mbar[:, None] * dsigma) / (sigma * sigma)


def peterson_bounds(system):
    """Instrument-weighted Peterson interval per function.

    Returns (lower, upper) arrays of length J with
    lower_j = sum g_j 1{Y<=t, D=1} / sum g_j and upper_j = sum g_j 1{Y<=t} / sum g_j.
    """
    g = system.g
    mass = g.sum(axis=0)
    mass = np.where(mass > 0, mass, np.nan)
    return ((system.event_before @ g) / mass, (system.at_risk_before @ g) / mass)


@dataclass(frozen=True)
class AssumptionReport:
    warnings: tuple

    @property
    def ok(self):
        return not self.warnings

    def as_dict(self):
        return {'ok': self.ok, 'warnings': list(self.warnings)}


def check_assumptions(system, box):
    """Runtime checks of the model assumptions; never raises."""
    warnings = []
    grid = np.linspace(-30.0, 30.0, 601)
    values = system.link.cdf(grid)
    if not (np.all(np.diff(values) >= 0) and np.all(values > 0)):
        warnings.append('link is not strictly increasing into (0,1) on [-30, 30]')
    g = system.g
    if not np.all(np.isfinite(g)) or np.any(g < 0):
        warnings.append('instrumental functions must be finite and nonnegative')
    try:
        check_coverage(system.family, system.normalizer.transform(system.dataset.x))
    except CoverageException as e:
        warnings.append(f'coverage: {e}')
    if box.dim != system.dim:
        warnings.append(f'parameter box has dimension {box.dim}, expected {system.dim}')
    if not np.all(np.isfinite(system.dataset.x)):
        warnings.append('covariates must be finite')
    if box.dim == system.dim and system.n >= 2:
        stats = sample_stats(system, box.center())
        if stats.floored.any():
            warnings.append(f'{int(stats.floored.sum())} moment(s) at the variance floor at the box centre')
    for w in warnings:
        log.warning('assumption check: %s', w)
    return AssumptionReport(warnings=tuple(warnings))
