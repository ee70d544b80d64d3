# vim: sw=4 ts=4 et si:
#
"""Test inversion: turn the accept/reject map r -> H0(r) into interval(s).

Step 1 scans an equispaced grid over B_k for a feasible (accepted) point,
step 2 locates the sign changes of the violation curve V(r) = T_n(r) - gamma(r)
from there, step 3 reads the bounds off the evaluation cache.
"""

import enum
import logging
import math
import threading
from collections import deque
from dataclasses import dataclass, field

from censbounds import InvalidArgumentException, NotSupportedException, SurvBoundsException
from censbounds.core import ColumnKind
from censbounds.subvector import SubvectorTest, _default_box
from censbounds.workers import parallel_map

log = logging.getLogger(__name__)

DEFAULT_N_INIT = 100
ROOT_FINDERS = ('binary', 'interp', 'grid', 'eam')


class BracketException(SurvBoundsException):
    pass


class Status(enum.Enum):
    FEASIBLE = 'feasible'
    MISSPECIFIED = 'misspecified'


@dataclass(frozen=True)
class Evaluation:
    r: float
    statistic: float
    critical_value: float
    detail: dict = field(default=None, compare=False)

    @property
    def feasible(self):
        return self.statistic <= self.critical_value

    @property
    def violation(self):
        return self.statistic - self.critical_value

    def as_dict(self):
        out = {'r': self.r, 'statistic': self.statistic, 'critical_value': self.critical_value,
               'feasible': self.feasible}
        if self.detail:
            out.update(self.detail)
        return out


class EvaluationCache:
    """r -> (T_n(r), gamma(r)), evaluated at most once per distinct r.

    With trace set, each entry also keeps the minimizers, bootstrap summary
    and optimizer trajectories of outcomes that report them.
    """

    def __init__(self, closure, trace=False):
        self.closure = closure
        self.trace = trace
        self._entries = {}
        self._log = []
        self._lock = threading.Lock()

    def evaluate(self, r):
        r = float(r)
        with self._lock:
            if r in self._entries:
                return self._entries[r]
        outcome = self.closure(r)
        entry = Evaluation(r, float(outcome.statistic), float(outcome.critical_value), _detail(outcome, self.trace))
        with self._lock:
            if r not in self._entries:
                self._log.append(r)
            self._entries[r] = entry
        return entry

    def __contains__(self, r):
        with self._lock:
            return float(r) in self._entries

    def __len__(self):
        with self._lock:
            return len(self._entries)

    def snapshot(self):
        """Entries sorted by r."""
        with self._lock:
            return tuple(sorted(self._entries.values(), key=lambda e: e.r))

    @property
    def order(self):
        with self._lock:
            return tuple(self._log)

    def feasible(self):
        return [e.r for e in self.snapshot() if e.feasible]


@dataclass(frozen=True)
class IdentifiedSet:
    intervals: tuple
    status: Status
    k: int = None
    t: float = None
    alpha: float = None
    cache: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_intervals(cls, intervals, **kwargs):
        merged = []
        for (lo, hi) in sorted((float(a), float(b)) for (a, b) in intervals):
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        status = Status.FEASIBLE if merged else Status.MISSPECIFIED
        return cls(intervals=tuple(merged), status=status, **kwargs)

    @property
    def misspecified(self):
        return self.status is Status.MISSPECIFIED

    @property
    def hull(self):
        if not self.intervals:
            return None
        return (self.intervals[0][0], self.intervals[-1][1])

    def contains(self, value):
        return any(lo <= value <= hi for (lo, hi) in self.intervals)

    def as_dict(self):
        return {'intervals': [list(iv) for iv in self.intervals], 'status': self.status.value,
                'k': self.k, 't': self.t, 'alpha': self.alpha, 'diagnostics': self.diagnostics,
                'cache': [e.as_dict() for e in self.cache]}


def _detail(outcome, trace):
    if not trace or not hasattr(outcome, 'as_dict'):
        return None
    full = outcome.as_dict(trace=True)
    return {key: full[key] for key in ('minimizers', 'bootstrap', 'trajectories') if key in full}


def _as_cache(closure_or_cache):
    if isinstance(closure_or_cache, EvaluationCache):
        return closure_or_cache
    return EvaluationCache(closure_or_cache)


def initial_grid(bounds, n_init):
    (lo, hi) = bounds
    if n_init < 1:
        raise InvalidArgumentException(f'n_init must be >= 1, got {n_init}')
    if n_init == 1:
        return [(lo + hi) / 2.0]
    step = (hi - lo) / (n_init - 1)
    return [lo + i * step for i in range(n_init - 1)] + [hi]


def coarse_to_fine(n):
    """Grid indices ordered centre first, then successive midpoints."""
    order = []
    queue = deque([(0, n - 1)])
    while queue:
        (a, b) = queue.popleft()
        if a > b:
            continue
        m = (a + b) // 2
        order.append(m)
        queue.append((a, m - 1))
        queue.append((m + 1, b))
    return order


def find_initial_feasible(closure, bounds, n_init=DEFAULT_N_INIT, mode='single', threads=1):
    """Search the initial grid for feasible points.

    Returns a list of clusters (ascending lists of feasible r, one cluster
    per run of adjacent feasible grid points) or Status.MISSPECIFIED.
    Single mode stops at the first feasible point.
    """
    cache = _as_cache(closure)
    grid = initial_grid(bounds, n_init)
    if mode == 'single':
        for i in coarse_to_fine(len(grid)):
            if cache.evaluate(grid[i]).feasible:
                log.info('initial feasible point r = %g after %d evaluation(s)', grid[i], len(cache))
                return [[grid[i]]]
        return Status.MISSPECIFIED
    if mode != 'scan':
        raise InvalidArgumentException(f'unknown search mode: {mode!r}')
    results = parallel_map(cache.evaluate, grid, threads)
    clusters = []
    previous = False
    for (r, entry) in zip(grid, results, strict=True):
        if entry.feasible:
            if previous:
                clusters[-1].append(r)
            else:
                clusters.append([r])
        previous = entry.feasible
    if not clusters:
        return Status.MISSPECIFIED
    log.info('initial scan found %d feasible cluster(s)', len(clusters))
    return clusters


@dataclass(frozen=True)
class BoundResult:
    bound: float
    evaluations: int
    at_boundary: bool = False


def _bracket(cache, r_feasible, direction, bounds, known):
    """Returns (feasible entry, infeasible entry) or a BoundResult at the box edge."""
    if direction not in (-1, 1):
        raise InvalidArgumentException(f'direction must be -1 or +1, got {direction}')
    start = cache.evaluate(r_feasible)
    if not start.feasible:
        raise BracketException(f'r = {r_feasible} is not feasible, nothing to bracket')
    if known is None:
        known = cache.snapshot()
    beyond = sorted((e for e in known if (e.r - start.r) * direction > 0), key=lambda e: (e.r - start.r) * direction)
    infeasible = next((e for e in beyond if not e.feasible), None)
    if infeasible is None:
        edge = bounds[1] if direction > 0 else bounds[0]
        if edge == start.r:
            return BoundResult(start.r, 0, at_boundary=True)
        edge_entry = cache.evaluate(edge)
        if edge_entry.feasible:
            log.info('feasible up to the box edge %g', edge)
            return BoundResult(edge, 1, at_boundary=True)
        infeasible = edge_entry
    inside = [e for e in beyond if e.feasible and (infeasible.r - e.r) * direction > 0]
    feasible = inside[-1] if inside else start
    if feasible.feasible == infeasible.feasible:
        raise BracketException(f'bracket [{feasible.r}, {infeasible.r}] does not change sign')
    return (feasible, infeasible)


def binary_search_bound(cache, r_feasible, direction, tol, bounds, known=None):
    """Bisection between the feasible point and the nearest infeasible one."""
    before = len(cache)
    bracket = _bracket(cache, r_feasible, direction, bounds, known)
    if isinstance(bracket, BoundResult):
        return bracket
    (feasible, infeasible) = bracket
    while abs(infeasible.r - feasible.r) >= tol:
        entry = cache.evaluate((feasible.r + infeasible.r) / 2.0)
        if entry.feasible:
            feasible = entry
        else:
            infeasible = entry
    return BoundResult(feasible.r, len(cache) - before)


def interpolation_search_bound(cache, r_feasible, direction, tol, bounds, known=None):
    """Secant steps on the violation curve, safeguarded by bisection."""
    before = len(cache)
    bracket = _bracket(cache, r_feasible, direction, bounds, known)
    if isinstance(bracket, BoundResult):
        return bracket
    (feasible, infeasible) = bracket
    slow_steps = 0
    while abs(infeasible.r - feasible.r) >= tol:
        width = abs(infeasible.r - feasible.r)
        mid = (feasible.r + infeasible.r) / 2.0
        proposal = mid
        dv = infeasible.violation - feasible.violation
        if slow_steps < 2 and dv != 0.0 and math.isfinite(dv):
            secant = feasible.r - feasible.violation * (infeasible.r - feasible.r) / dv
            lo_r = min(feasible.r, infeasible.r)
            hi_r = max(feasible.r, infeasible.r)
            # a secant stalled against an endpoint steps a little inside instead
            if abs(secant - feasible.r) < 0.1 * tol:
                proposal = feasible.r + direction * 0.45 * tol
            elif abs(secant - infeasible.r) < 0.1 * tol:
                proposal = infeasible.r - direction * 0.45 * tol
            elif lo_r < secant < hi_r:
                proposal = secant
        entry = cache.evaluate(proposal)
        if entry.feasible:
            feasible = entry
        else:
            infeasible = entry
        slow_steps = slow_steps + 1 if abs(infeasible.r - feasible.r) > 0.5 * width else 0
    return BoundResult(feasible.r, len(cache) - before)


def _runs(points, accepted):
    intervals = []
    start = None
    for (r, ok) in zip(points, accepted, strict=True):
        if ok and start is None:
            start = r
            last = r
        elif ok:
            last = r
        elif start is not None:
            intervals.append((start, last))
            start = None
    if start is not None:
        intervals.append((start, last))
    return intervals


def grid_search(closure, bounds, step, threads=1, **kwargs):
    """Exhaustive accept/reject labelling of a grid with spacing step."""
    if not step > 0:
        raise InvalidArgumentException(f'grid step must be positive, got {step}')
    (lo, hi) = bounds
    cache = _as_cache(closure)
    count = math.floor((hi - lo) / step + 1e-9) + 1
    points = [lo + i * step for i in range(count)]
    entries = parallel_map(cache.evaluate, points, threads)
    intervals = _runs(points, [e.feasible for e in entries])
    diagnostics = dict(kwargs.pop('diagnostics', {}))
    diagnostics.update({'root_finder': 'grid', 'step': step, 'evaluations': len(cache)})
    return IdentifiedSet.from_intervals(intervals, cache=cache.snapshot(), diagnostics=diagnostics, **kwargs)


_FINDERS = {'binary': binary_search_bound, 'interp': interpolation_search_bound}


def default_tolerance(bounds):
    return max(0.01 * (bounds[1] - bounds[0]), 1e-3)


def estimate_interval(system, config, k, mode='auto', box=None, root_finder='binary', n_init=DEFAULT_N_INIT,
                      tol=None, threads=None, grid_step=None, tester=None):
    """Estimate the identified interval(s) of coefficient k."""
    if root_finder not in ROOT_FINDERS:
        raise InvalidArgumentException(f'unknown root finder: {root_finder!r}')
    if root_finder == 'eam':
        raise NotSupportedException('the EAM root finder is not implemented')
    box = _default_box(system, box)
    threads = config.threads if threads is None else threads
    if mode == 'auto':
        continuous = any(kind is ColumnKind.CONTINUOUS for kind in system.dataset.column_kinds)
        mode = 'scan' if continuous else 'single'
    if mode not in ('single', 'scan'):
        raise InvalidArgumentException(f'unknown search mode: {mode!r}')
    tester = tester or SubvectorTest(system, config, k, box)
    cache = EvaluationCache(tester, trace=config.trace)
    bounds = box.interval(k)
    tol = default_tolerance(bounds) if tol is None else tol
    meta = {'k': k, 't': system.t, 'alpha': config.alpha}
    diagnostics = {'mode': mode, 'root_finder': root_finder, 'n_init': n_init, 'tol': tol}

    if root_finder == 'grid':
        step = grid_step or tol
        return grid_search(cache, bounds, step, threads, diagnostics=diagnostics, **meta)

    clusters = find_initial_feasible(cache, bounds, n_init, mode, threads)
    if clusters is Status.MISSPECIFIED:
        log.warning('no feasible point among %d initial grid points: model misspecified', n_init)
        diagnostics['evaluations'] = len(cache)
        return IdentifiedSet.from_intervals([], cache=cache.snapshot(), diagnostics=diagnostics, **meta)

    known = cache.snapshot()
    finder = _FINDERS[root_finder]
    jobs = [(cluster[0] if direction < 0 else cluster[-1], direction)
            for cluster in clusters for direction in (-1, 1)]
    results = parallel_map(lambda job: finder(cache, job[0], job[1], tol, bounds, known=known), jobs, threads)

    if mode == 'single':
        feasible = cache.feasible()
        intervals = [(min(feasible), max(feasible))]
    else:
        intervals = [(results[2 * i].bound, results[2 * i + 1].bound) for i in range(len(clusters))]
    diagnostics['evaluations'] = len(cache)
    diagnostics['bounds'] = [{'bound': res.bound, 'direction': job[1], 'evaluations': res.evaluations,
                              'at_boundary': res.at_boundary} for (job, res) in zip(jobs, results, strict=True)]
    result = IdentifiedSet.from_intervals(intervals, cache=cache.snapshot(), diagnostics=diagnostics, **meta)
    log.info('coefficient %d at t = %g: %s', k, system.t, result.intervals)
    return result
