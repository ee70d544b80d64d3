# vim: sw=4 ts=4 et si:
#
"""Subvector test of H0(r): some beta in B with beta_k = r satisfies the moments.

The statistic is T_n(r) = inf over the slice B(r) of S(sqrt(n) mbar, sigma_hat);
its critical value comes from the linearized multiplier bootstrap with
generalized moment selection.
"""

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, minimize

from censbounds import InvalidArgumentException, NumericalFailureException
from censbounds.core import ParameterBox
from censbounds.moments import g_hat, moment_matrix, moment_mean_sd
from censbounds.workers import float_key, parallel_map, substream

log = logging.getLogger(__name__)

DEFAULT_BOX_BOUND = 10.0

# substream tags
_STARTS = 1
_DRAWS = 2


def s_function(v, sigma):
    """S(v, sigma) = sum_j max(-v_j / sigma_j, 0)^2"""
    v = np.asarray(v, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise InvalidArgumentException('S needs strictly positive sigma')
    neg = np.maximum(-v / sigma, 0.0)
    return float(np.sum(neg * neg))


def gms_phi(mbar, sigma_hat, n, kappa_n, gms_large):
    """Hard-threshold moment selection: slack moments get gms_large, the rest 0."""
    xi = np.sqrt(n) * np.asarray(mbar, dtype=float) / np.asarray(sigma_hat, dtype=float)
    return np.where(xi > kappa_n, float(gms_large), 0.0)


class HardThresholdGms:
    def __call__(self, mbar, sigma_hat, n, kappa_n, gms_large):
        return gms_phi(mbar, sigma_hat, n, kappa_n, gms_large)

    def __repr__(self):
        return 'hard-threshold'


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = 'COBYQA'
    multistarts: int = 10
    max_evals: int = 500
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.multistarts < 1 or self.max_evals < 1 or not self.tolerance > 0:
            raise InvalidArgumentException('optimizer needs multistarts >= 1, max_evals >= 1 and tolerance > 0')


@dataclass(frozen=True)
class TestConfig:
    """Tuning of the subvector test. None means the n-dependent default."""
    alpha: float = 0.05
    n_boot: int = 600
    seed: int = 0
    gms_large: float = 1e10
    lambda_n: float = None
    kappa_n: float = None
    epsilon_n: float = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    gms: object = field(default_factory=HardThresholdGms)
    threads: int = 1
    minimizer_rel_tol: float = 0.01
    minimizer_abs_tol: float = 1e-6
    dedup_radius: float = 1e-3
    trace: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgumentException(f'alpha must lie in (0,1), got {self.alpha}')
        if self.n_boot < 1:
            raise InvalidArgumentException(f'n_boot must be >= 1, got {self.n_boot}')
        if self.seed < 0:
            raise InvalidArgumentException(f'seed must be nonnegative, got {self.seed}')

    def kappa(self, n):
        return self.kappa_n if self.kappa_n is not None else math.sqrt(math.log(n))

    def penalty(self, n):
        return self.lambda_n if self.lambda_n is not None else math.log(n)

    def epsilon(self, n):
        if self.epsilon_n is not None:
            return self.epsilon_n
        return math.sqrt(max(math.log(math.log(n)), 0.0) / n) if n > 1 else 0.0

    def describe(self):
        return {'alpha': self.alpha, 'n_boot': self.n_boot, 'seed': self.seed, 'gms': repr(self.gms),
                'gms_large': self.gms_large, 'lambda_n': self.lambda_n, 'kappa_n': self.kappa_n,
                'epsilon_n': self.epsilon_n, 'optimizer': self.optimizer.method,
                'multistarts': self.optimizer.multistarts, 'max_evals': self.optimizer.max_evals,
                'tolerance': self.optimizer.tolerance}


def _default_box(system, box):
    return box if box is not None else ParameterBox.cube(DEFAULT_BOX_BOUND, system.dim)


def _check_slice(box, r, k):
    if not 0 <= k < box.dim:
        raise InvalidArgumentException(f'coefficient index {k} outside 0..{box.dim - 1}')
    (lo, hi) = box.interval(k)
    if not lo <= r <= hi:
        raise InvalidArgumentException(f'r = {r} lies outside [{lo}, {hi}]')


def _pin(free, k, r, values, dim):
    beta = np.empty(dim)
    beta[k] = r
    beta[free] = values
    return beta


def _starting_points(box, k, r, count, rng):
    """Box centre, +-half-width axis moves, then uniform draws."""
    free = box.free_indices(k)
    center = box.center()[free]
    half = (box.upper[free] - box.lower[free]) / 2.0
    starts = [center]
    for i in range(free.size):
        for sign in (1.0, -1.0):
            pt = center.copy()
            pt[i] += sign * 0.5 * half[i]
            starts.append(pt)
    while len(starts) < count:
        starts.append(rng.uniform(box.lower[free], box.upper[free]))
    return starts[:count]


@dataclass(frozen=True)
class StatisticResult:
    statistic: float
    minimizers: tuple
    trajectories: tuple


def test_statistic(system, config, r, k, box=None):
    """T_n(r) and the near-minimizer set over the slice B(r)."""
    box = _default_box(system, box)
    _check_slice(box, r, k)
    dim = system.dim
    free = box.free_indices(k)
    root_n = math.sqrt(system.n)

    def objective(beta):
        (mbar, sigma) = moment_mean_sd(system, beta)
        return s_function(root_n * mbar, sigma)

    if free.size == 0:
        beta = np.array([float(r)])
        value = objective(beta)
        return StatisticResult(value, (beta,), ({'start': [], 'end': [], 'value': value, 'evals': 1},))

    opt = config.optimizer
    rng = substream(config.seed, _STARTS, k, float_key(r))
    bounds = Bounds(box.lower[free], box.upper[free])
    options = {'maxfev': opt.max_evals}
    if opt.method.upper() == 'COBYQA':
        options['f_target'] = 0.0
    candidates = []
    trajectories = []
    for x0 in _starting_points(box, k, r, opt.multistarts, rng):
        best = {'value': math.inf, 'x': x0, 'evals': 0}

        def wrapped(x, best=best):
            beta = _pin(free, k, r, np.clip(x, box.lower[free], box.upper[free]), dim)
            value = objective(beta)
            best['evals'] += 1
            if value < best['value']:
                best['value'] = value
                best['x'] = beta[free].copy()
            return value

        try:
            wrapped(x0)
            if best['value'] > 0.0:
                minimize(wrapped, x0, method=opt.method, bounds=bounds, tol=opt.tolerance, options=options)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            log.debug('start %s failed: %s', x0, e)
            trajectories.append({'start': x0.tolist(), 'error': str(e)})
            continue
        if not math.isfinite(best['value']):
            trajectories.append({'start': x0.tolist(), 'error': 'non-finite objective'})
            continue
        candidates.append((best['value'], _pin(free, k, r, best['x'], dim)))
        trajectories.append({'start': x0.tolist(), 'end': best['x'].tolist(), 'value': best['value'],
                             'evals': best['evals']})

    if not candidates:
        raise NumericalFailureException(f'optimizer failed on every start at r = {r}', trace=trajectories)
    statistic = min(v for (v, _) in candidates)
    cutoff = statistic + max(config.minimizer_abs_tol, config.minimizer_rel_tol * statistic)
    minimizers = []
    for (value, beta) in sorted(candidates, key=lambda c: c[0]):
        if value > cutoff:
            break
        if all(np.linalg.norm(beta - other) > config.dedup_radius for other in minimizers):
            minimizers.append(beta)
    log.debug('T_n(%g) = %g with %d minimizer(s)', r, statistic, len(minimizers))
    return StatisticResult(statistic, tuple(minimizers), tuple(trajectories))


def bootstrap_process(system, beta, zeta):
    """v_n(beta) = n^{-1/2} sum_i D^{-1/2} (m_i - mbar) zeta_i"""
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (system.n,):
        raise InvalidArgumentException(f'zeta must have length {system.n}')
    m = moment_matrix(system, beta)
    (mbar, sigma) = moment_mean_sd(system, beta)
    return (zeta @ (m - mbar)) / (math.sqrt(system.n) * sigma)


@dataclass(frozen=True, eq=False)
class _LinearizedSlice:
    """Everything a bootstrap draw needs at one minimizer beta_b."""
    beta: np.ndarray
    scaled: np.ndarray
    phi: np.ndarray
    gradient: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    free: np.ndarray
    penalty: float


def _linearize(system, config, r, k, beta_b, box, phi=None, ghat=None):
    n = system.n
    m = moment_matrix(system, beta_b)
    (mbar, sigma) = moment_mean_sd(system, beta_b)
    if phi is None:
        phi = config.gms(mbar, sigma, n, config.kappa(n), config.gms_large)
    if ghat is None:
        ghat = g_hat(system, beta_b)
    free = box.free_indices(k)
    (lo, hi) = box.shrunk(config.epsilon(n), k)
    if np.any(lo[free] > hi[free]):
        lower = upper = None
    else:
        lower = math.sqrt(n) * (lo[free] - beta_b[free])
        upper = math.sqrt(n) * (hi[free] - beta_b[free])
    return _LinearizedSlice(beta=np.asarray(beta_b, dtype=float), scaled=(m - mbar) / sigma,
                            phi=np.asarray(phi, dtype=float), gradient=np.asarray(ghat)[:, free],
                            lower=lower, upper=upper, free=free, penalty=config.penalty(n) / n)


def _solve_xi(lin, v):
    """Returns (xi over free coordinates, penalized objective, S part)."""
    a = v + lin.phi
    G = lin.gradient
    c = lin.penalty

    def s_part(xi):
        neg = np.maximum(-(a + G @ xi), 0.0)
        return float(neg @ neg)

    def fun(xi):
        neg = np.maximum(-(a + G @ xi), 0.0)
        return (float(neg @ neg) + c * float(xi @ xi), -2.0 * (G.T @ neg) + 2.0 * c * xi)

    zero = np.zeros(lin.free.size)
    f_zero = s_part(zero)
    best = (zero, f_zero, f_zero)
    if lin.lower is None or zero.size == 0:
        return best
    x0 = np.clip(zero, lin.lower, lin.upper)
    try:
        res = minimize(fun, x0, jac=True, method='L-BFGS-B', bounds=Bounds(lin.lower, lin.upper))
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        log.debug('xi minimization failed, using xi = 0: %s', e)
        return best
    xi = np.clip(res.x, lin.lower, lin.upper)
    s_value = s_part(xi)
    value = s_value + c * float(xi @ xi)
    if math.isfinite(value) and value < f_zero - 1e-12 * (1.0 + abs(f_zero)):
        best = (xi, value, s_value)
    return best


def xi_minimize(system, config, r, beta_b, v_draw, phi, k, box=None, ghat=None):
    """Minimize S(v + phi + G xi) + (lambda_n / n) |xi|^2 over the shrunk slice.

    Returns (xi, objective) with xi over all d+1 coordinates (xi_k = 0).
    """
    box = _default_box(system, box)
    _check_slice(box, r, k)
    lin = _linearize(system, config, r, k, np.asarray(beta_b, dtype=float), box, phi=phi, ghat=ghat)
    (xi_free, value, _) = _solve_xi(lin, np.asarray(v_draw, dtype=float))
    xi = np.zeros(system.dim)
    xi[lin.free] = xi_free
    return (xi, value)


def bootstrap_quantile(draws, alpha):
    """Order statistic ceil((1 - alpha) B) of the draws."""
    draws = np.sort(np.asarray(draws, dtype=float))
    rank = math.ceil(round((1.0 - alpha) * draws.size, 9))
    return float(draws[max(rank, 1) - 1])


@dataclass(frozen=True)
class CriticalValue:
    gamma: float
    draws: np.ndarray

    def summary(self):
        (counts, edges) = np.histogram(self.draws, bins=20)
        return {'gamma': self.gamma, 'mean': float(self.draws.mean()),
                'quantiles': {str(q): float(np.quantile(self.draws, q)) for q in (0.5, 0.9, 0.95, 0.99)},
                'histogram': {'counts': counts.tolist(), 'edges': edges.tolist()}}


def critical_value(system, config, r, minimizer_set, k, box=None):
    """gamma_{n,1-alpha}(r) from n_boot linearized bootstrap draws."""
    minimizer_set = list(minimizer_set)
    if not minimizer_set:
        raise InvalidArgumentException('critical value needs a nonempty minimizer set')
    box = _default_box(system, box)
    _check_slice(box, r, k)
    slices = [_linearize(system, config, r, k, np.asarray(b, dtype=float), box) for b in minimizer_set]
    n = system.n
    root_n = math.sqrt(n)
    rkey = float_key(r)

    def one_draw(b):
        zeta = substream(config.seed, _DRAWS, k, rkey, b).standard_normal(n)
        return min(_solve_xi(lin, (zeta @ lin.scaled) / root_n)[2] for lin in slices)

    chunks = np.array_split(np.arange(config.n_boot), max(1, config.threads))
    parts = parallel_map(lambda idx: [one_draw(int(b)) for b in idx], chunks, config.threads)
    draws = np.array([v for part in parts for v in part])
    return CriticalValue(gamma=bootstrap_quantile(draws, config.alpha), draws=draws)


@dataclass(frozen=True, eq=False)
class TestOutcome:
    r: float
    k: int
    statistic: float
    critical_value: float
    minimizers: tuple
    draw_summary: dict
    trajectories: tuple = ()

    @property
    def reject(self):
        return self.statistic > self.critical_value

    @property
    def violation(self):
        """V(r) = T_n(r) - gamma(r)"""
        return self.statistic - self.critical_value

    def as_dict(self, trace=False):
        out = {'r': self.r, 'statistic': self.statistic, 'critical_value': self.critical_value,
               'reject': self.reject}
        if trace:
            out['minimizers'] = [b.tolist() for b in self.minimizers]
            out['bootstrap'] = self.draw_summary
            out['trajectories'] = list(self.trajectories)
        return out


def test_point(system, config, r, k, box=None):
    """Run the full test of H0(r)."""
    box = _default_box(system, box)
    stat = test_statistic(system, config, r, k, box)
    crit = critical_value(system, config, r, stat.minimizers, k, box)
    outcome = TestOutcome(r=float(r), k=k, statistic=stat.statistic, critical_value=crit.gamma,
                          minimizers=stat.minimizers, draw_summary=crit.summary(),
                          trajectories=stat.trajectories if config.trace else ())
    log.info('r = %g: T = %g, gamma = %g, %s', r, outcome.statistic, outcome.critical_value,
             'reject' if outcome.reject else 'accept')
    return outcome


class SubvectorTest:
    """test_point bound to one system/coefficient, memoized by r."""

    def __init__(self, system, config, k, box=None):
        self.system = system
        self.config = config
        self.k = k
        self.box = _default_box(system, box)
        _check_slice(self.box, self.box.center()[k], k)
        self._outcomes = {}
        self._lock = threading.Lock()

    def __call__(self, r):
        r = float(r)
        with self._lock:
            if r in self._outcomes:
                return self._outcomes[r]
        outcome = test_point(self.system, self.config, r, self.k, self.box)
        with self._lock:
            self._outcomes[r] = outcome
        return outcome

    @property
    def outcomes(self):
        with self._lock:
            return dict(self._outcomes)
