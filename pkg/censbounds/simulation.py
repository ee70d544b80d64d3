# vim: sw=4 ts=4 et si:
#
"""Simulation designs with dependent censoring.

Event and censoring times are coupled through a Frank copula, covariates
are independent or linked by a Gaussian copula, and the conditional law of
T follows the chosen link with beta(t) = (log t, 1, -1).
"""

import configparser
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.stats import norm

from censbounds import InvalidArgumentException, SurvBoundsException
from censbounds.core import LinkKind, ParameterBox, link_inverse
from censbounds.dataset import Dataset
from censbounds.instruments import FamilySpec, build_family
from censbounds.inversion import estimate_interval
from censbounds.moments import MomentSystem
from censbounds.subvector import OptimizerConfig, TestConfig
from censbounds.timecombine import combine_sets, weighted_level_schedule
from censbounds.workers import parallel_map, substream

log = logging.getLogger(__name__)

CALIBRATION_PILOT = 100000
CALIBRATION_RATE_BOUNDS = (1e-8, 2.0)

# substream tags
_REPLICATION = 11
_CALIBRATION = 12


class CalibrationException(SurvBoundsException):
    def __init__(self, msg, bracket=None):
        super().__init__(msg)
        self.bracket = bracket


def debye1(theta):
    """D_1(theta) = (1/theta) int_0^theta s / (e^s - 1) ds"""
    if abs(theta) < 1e-4:
        t2 = theta * theta
        return 1.0 - theta / 4.0 + t2 / 36.0 - t2 * t2 / 3600.0
    (val, _) = quad(lambda s: s / np.expm1(s) if s != 0.0 else 1.0, 0.0, theta, limit=200)
    return val / theta


def frank_kendall_tau(theta):
    if abs(theta) < 1e-8:
        return theta / 9.0
    return 1.0 + 4.0 * (debye1(theta) - 1.0) / theta


def frank_theta_for_tau(tau):
    """Frank parameter with the given Kendall's tau."""
    if not -1.0 < tau < 1.0:
        raise InvalidArgumentException(f'Kendall tau must lie in (-1, 1), got {tau}')
    if tau == 0.0:
        return 0.0
    return brentq(lambda th: frank_kendall_tau(th) - tau, -700.0 if tau < 0 else 1e-6,
                  -1e-6 if tau < 0 else 700.0)


def sample_frank_pair(theta, rng, size=None):
    """Draw (u1, u2) from the Frank copula by conditional inversion."""
    n = 1 if size is None else size
    u = np.clip(rng.random(n), np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    w = rng.random(n)
    if abs(theta) < 1e-8:
        v = w
    else:
        d = math.expm1(-theta)
        a = np.expm1(-theta * u)
        v = -np.log1p(w * d / (a + 1.0 - w * a)) / theta
    v = np.clip(v, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    if size is None:
        return (float(u[0]), float(v[0]))
    return (u, v)


def sample_covariates(model, n, rng, rho=0.8):
    """(X1, X2) with X1 standard normal and X2 Bernoulli(0.5)."""
    if n < 1:
        raise InvalidArgumentException(f'need at least one covariate row, got {n}')
    if model == 'independent':
        return np.column_stack((rng.standard_normal(n), (rng.random(n) < 0.5).astype(float)))
    if model == 'gaussian':
        z1 = rng.standard_normal(n)
        z2 = rho * z1 + math.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
        return np.column_stack((z1, (norm.cdf(z2) > 0.5).astype(float)))
    raise InvalidArgumentException(f'unknown covariate model: {model!r}')


def inverse_conditional_T(link, u, xb):
    """t with Lambda(log t + xb) = u, where xb is the non-intercept index x'beta."""
    return np.exp(link_inverse(link, u) - np.asarray(xb, dtype=float))


def beta_true(t):
    return np.array([math.log(t), 1.0, -1.0])


@dataclass(frozen=True)
class SimDesign:
    link: str = 'cox'
    theta: float = 0.0
    censoring: float = 0.30
    n: int = 500
    reps: int = 30
    n_boot: int = 200
    alpha: float = 0.05
    t: float = 1.0
    covariates: str = 'independent'
    rho: float = 0.8
    seed: int = 0
    spline_count: int = 6
    normalizer: str = 'pca'
    censoring_rate: float = None
    coef: int = 1
    box: float = 10.0
    n_init: int = 100
    mode: str = 'single'
    root_finder: str = 'binary'
    multistarts: int = 10
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.censoring < 1.0:
            raise InvalidArgumentException(f'censoring target must lie in (0,1), got {self.censoring}')
        if self.reps < 1:
            raise InvalidArgumentException(f'reps must be >= 1, got {self.reps}')
        if self.n < 2:
            raise InvalidArgumentException(f'n must be >= 2, got {self.n}')
        if self.t <= 0:
            raise InvalidArgumentException(f'time point must be positive, got {self.t}')
        if self.covariates not in ('independent', 'gaussian'):
            raise InvalidArgumentException(f'unknown covariate model: {self.covariates!r}')
        LinkKind.from_name(self.link)

    @property
    def beta_true(self):
        return beta_true(self.t)

    def family_spec(self):
        return FamilySpec(entries={'x1': ('spline', self.spline_count)}, normalizer=self.normalizer,
                          spline_count=self.spline_count)

    def test_config(self):
        return TestConfig(alpha=self.alpha, n_boot=self.n_boot, seed=self.seed,
                          optimizer=OptimizerConfig(multistarts=self.multistarts))

    def describe(self):
        return asdict(self)


# the designs of the simulation study, keyed by dependence and censoring level
DESIGN_PRESETS = {
    'indep-30': SimDesign(theta=0.0, censoring=0.30),
    'indep-65': SimDesign(theta=0.0, censoring=0.65),
    'pos-30': SimDesign(theta=6.0, censoring=0.30),
    'pos-65': SimDesign(theta=6.0, censoring=0.65),
    'neg-30': SimDesign(theta=-6.0, censoring=0.30),
    'neg-65': SimDesign(theta=-6.0, censoring=0.65),
    'indep-02': SimDesign(theta=0.0, censoring=0.02, n_init=200),
}


def _coerce(name, text, kind):
    if name == 'censoring_rate' and str(text).strip().lower() in ('', 'none', 'auto'):
        return None
    return kind(text)


_FIELD_TYPES = {'link': str, 'theta': float, 'censoring': float, 'n': int, 'reps': int, 'n_boot': int,
                'alpha': float, 't': float, 'covariates': str, 'rho': float, 'seed': int,
                'spline_count': int, 'normalizer': str, 'censoring_rate': float, 'coef': int, 'box': float,
                'n_init': int, 'mode': str, 'root_finder': str, 'multistarts': int, 'threads': int}


def read_design(source):
    """Read a [design] section (configparser) or a JSON object into a SimDesign.

    A `preset` key starts from one of DESIGN_PRESETS.
    """
    path = Path(source)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise InvalidArgumentException(f'cannot read design {path}: {e.strerror}') from None
    if path.suffix == '.json' or text.lstrip().startswith('{'):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidArgumentException(f'design {path}: {e}') from None
        values = values.get('design', values)
    else:
        config = configparser.ConfigParser()
        try:
            config.read_string(text, source=str(path))
        except configparser.Error as e:
            raise InvalidArgumentException(f'design {path}: {e}') from None
        if not config.has_section('design'):
            raise InvalidArgumentException(f'design {path} has no [design] section')
        values = dict(config.items('design'))
    return design_from_mapping(values)


def design_from_mapping(values):
    values = dict(values)
    base = SimDesign()
    preset = values.pop('preset', None)
    if preset is not None:
        if preset not in DESIGN_PRESETS:
            raise InvalidArgumentException(f'unknown design preset: {preset!r}')
        base = DESIGN_PRESETS[preset]
    unknown = set(values) - {f.name for f in fields(SimDesign)}
    if unknown:
        raise InvalidArgumentException(f'unknown design field(s): {sorted(unknown)}')
    try:
        changes = {k: _coerce(k, v, _FIELD_TYPES[k]) if isinstance(v, str) else v for k, v in values.items()}
    except ValueError as e:
        raise InvalidArgumentException(f'bad design value: {e}') from None
    return replace(base, **changes)


def _latent(design, n, rng, censoring_rate):
    """Covariates, event and censoring times for n subjects."""
    x = sample_covariates(design.covariates, n, rng, design.rho)
    (u1, u2) = sample_frank_pair(design.theta, rng, n)
    xb = x @ beta_true(design.t)[1:]
    with np.errstate(over='ignore'):
        t_event = inverse_conditional_T(design.link, u1, xb)
    t_cens = -np.log1p(-u2) / censoring_rate
    return (x, t_event, t_cens)


def simulate_dataset(design, n, rng, censoring_rate):
    """One sample of (Y, Delta, X1, X2) from the design."""
    (x, t_event, t_cens) = _latent(design, n, rng, censoring_rate)
    y = np.minimum(t_event, t_cens)
    delta = (t_event <= t_cens).astype(int)
    return Dataset.from_arrays(y, delta, x, ['x1', 'x2'], ['continuous', 'binary'])


def calibrate_censoring(design, tolerance=0.005, pilot=CALIBRATION_PILOT, bounds=CALIBRATION_RATE_BOUNDS):
    """Exponential censoring rate giving the target censoring proportion.

    One pilot sample is drawn up front so the proportion is a monotone
    function of the rate; bisection then runs on that function.
    """
    rng = substream(design.seed, _CALIBRATION)
    x = sample_covariates(design.covariates, pilot, rng, design.rho)
    (u1, u2) = sample_frank_pair(design.theta, rng, pilot)
    with np.errstate(over='ignore'):
        t_event = inverse_conditional_T(design.link, u1, x @ beta_true(design.t)[1:])
    expo = -np.log1p(-u2)

    def censored(rate):
        return float(np.mean(expo / rate < t_event))

    (lo, hi) = bounds
    (p_lo, p_hi) = (censored(lo), censored(hi))
    target = design.censoring
    if not p_lo - tolerance <= target <= p_hi + tolerance:
        raise CalibrationException(f'censoring target {target} outside the attainable range '
                                   f'[{p_lo:.4f}, {p_hi:.4f}] for rates in [{lo}, {hi}]',
                                   bracket={'rates': [lo, hi], 'proportions': [p_lo, p_hi]})
    for _ in range(200):
        mid = (lo + hi) / 2.0
        p = censored(mid)
        if abs(p - target) < tolerance:
            log.info('censoring rate %.6g gives %.4f censored (target %.4f)', mid, p, target)
            return mid
        if p < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def censoring_rate_for(design):
    return design.censoring_rate if design.censoring_rate is not None else calibrate_censoring(design)


@dataclass(frozen=True)
class Replication:
    rep: int
    intervals: tuple = ()
    misspecified: bool = False
    censored: float = math.nan
    error: str = None

    @property
    def ok(self):
        return self.error is None and not self.misspecified

    def hull(self):
        return (self.intervals[0][0], self.intervals[-1][1]) if self.intervals else None

    def contains(self, value):
        return any(lo <= value <= hi for (lo, hi) in self.intervals)


@dataclass(frozen=True)
class SimMetrics:
    lower: float
    upper: float
    var: float
    sig: float
    cov: float
    misspecified: int
    failed: int
    used: int
    reps: tuple = field(default=(), repr=False)

    def as_dict(self):
        return {'bounds': [self.lower, self.upper], 'var': self.var, 'sig': self.sig, 'cov': self.cov,
                'misspecified': self.misspecified, 'failed': self.failed, 'used': self.used}


def summarize(replications, truth):
    """Bounds/Var/Sig/Cov over the replications that were not misspecified."""
    used = [rep for rep in replications if rep.ok]
    if not used:
        return SimMetrics(math.nan, math.nan, math.nan, math.nan, math.nan,
                          sum(rep.misspecified for rep in replications),
                          sum(rep.error is not None for rep in replications), 0, tuple(replications))
    hulls = np.array([rep.hull() for rep in used])
    widths = hulls[:, 1] - hulls[:, 0]
    return SimMetrics(lower=float(hulls[:, 0].mean()), upper=float(hulls[:, 1].mean()),
                      var=float(widths.var(ddof=1)) if len(used) > 1 else 0.0,
                      sig=float(np.mean([not rep.contains(0.0) for rep in used])),
                      cov=float(np.mean([rep.contains(truth) for rep in used])),
                      misspecified=sum(rep.misspecified for rep in replications),
                      failed=sum(rep.error is not None for rep in replications),
                      used=len(used), reps=tuple(replications))


def _system_for(design, dataset, t):
    (family, normalizer) = build_family(dataset, design.family_spec())
    return MomentSystem(dataset, design.link, t, family, normalizer)


def _replicate(design, rate, rep, estimate):
    rng = substream(design.seed, _REPLICATION, rep)
    dataset = simulate_dataset(design, design.n, rng, rate)
    censored = float(1.0 - dataset.delta.mean())
    try:
        result = estimate(dataset)
    except (SurvBoundsException, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        log.warning('replication %d failed: %s', rep, e)
        return Replication(rep=rep, censored=censored, error=str(e))
    return Replication(rep=rep, intervals=tuple(result), misspecified=not result, censored=censored)


def _estimator(design, threads):
    box = ParameterBox.cube(design.box, 3)
    config = replace(design.test_config(), threads=threads)

    def estimate(dataset):
        system = _system_for(design, dataset, design.t)
        res = estimate_interval(system, config, design.coef, mode=design.mode, box=box,
                                root_finder=design.root_finder, n_init=design.n_init)
        return res.intervals

    return estimate


def run_design(design, threads=None):
    """Replicate the design and summarize the estimated sets of coefficient `coef`."""
    threads = design.threads if threads is None else threads
    rate = censoring_rate_for(design)
    # one level of parallelism: replications, or the search inside a single one
    estimate = _estimator(design, 1 if design.reps > 1 else threads)
    replications = parallel_map(lambda rep: _replicate(design, rate, rep, estimate), range(design.reps), threads)
    metrics = summarize(replications, design.beta_true[design.coef])
    log.info('design finished: bounds [%.3f, %.3f], sig %.2f, cov %.2f, %d misspecified',
             metrics.lower, metrics.upper, metrics.sig, metrics.cov, metrics.misspecified)
    return metrics


def run_time_design(design, times, rules=('single', 'intersect', 'majority', 'weighted'), threads=None):
    """Compare the single-time set at design.t with combinations over `times`.

    Each replication estimates the set at every time point once per level
    it needs, then applies each rule.
    """
    threads = design.threads if threads is None else threads
    times = tuple(sorted(float(t) for t in times))
    rate = censoring_rate_for(design)
    box = ParameterBox.cube(design.box, 3)
    A = len(times)
    levels = {'single': [design.alpha], 'intersect': [design.alpha / A] * A,
              'majority': [design.alpha / 2.0] * A, 'weighted': list(weighted_level_schedule(design.alpha, A))}

    def one(rep):
        rng = substream(design.seed, _REPLICATION, rep)
        dataset = simulate_dataset(design, design.n, rng, rate)
        out = {}
        for rule in rules:
            try:
                if rule == 'single':
                    system = _system_for(design, dataset, design.t)
                    res = estimate_interval(system, replace(design.test_config(), alpha=design.alpha), design.coef,
                                            mode=design.mode, box=box, root_finder=design.root_finder,
                                            n_init=design.n_init)
                    out[rule] = Replication(rep=rep, intervals=res.intervals, misspecified=res.misspecified)
                    continue
                sets = []
                for (t, level) in zip(times, levels[rule], strict=True):
                    system = _system_for(design, dataset, t)
                    sets.append(estimate_interval(system, replace(design.test_config(), alpha=level), design.coef,
                                                  mode=design.mode, box=box, root_finder=design.root_finder,
                                                  n_init=design.n_init))
                combined = tuple(combine_sets(sets, 'majority' if rule == 'majority' else 'intersect'))
                out[rule] = Replication(rep=rep, intervals=combined, misspecified=not combined)
            except (SurvBoundsException, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
                log.warning('replication %d, rule %s failed: %s', rep, rule, e)
                out[rule] = Replication(rep=rep, error=str(e))
        return out

    results = parallel_map(one, range(design.reps), threads)
    truth = design.beta_true[design.coef]
    return {rule: summarize([res[rule] for res in results], truth) for rule in rules}
