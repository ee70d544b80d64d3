# vim: sw=4 ts=4 et si:
#
"""Combine identified sets estimated at several time points.

When a coefficient does not depend on t, every per-time set covers it, so
the sets can be intersected (Bonferroni levels), voted on by majority
(level alpha/2 each) or intersected with a decreasing level schedule.
"""

import logging
import math
from dataclasses import dataclass, replace

from censbounds import InvalidArgumentException
from censbounds.inversion import IdentifiedSet, estimate_interval
from censbounds.workers import parallel_map

log = logging.getLogger(__name__)

RULES = ('intersect', 'majority', 'weighted')


def _as_interval_list(item):
    """An input may be None/empty, an (lo, hi) pair, an IdentifiedSet or a list of pairs."""
    if item is None:
        return []
    if isinstance(item, IdentifiedSet):
        return list(item.intervals)
    if len(item) == 2 and all(isinstance(v, (int, float)) for v in item):
        return [(float(item[0]), float(item[1]))]
    return [(float(a), float(b)) for (a, b) in item]


def vote(sets, minimum):
    """Closed intervals of r covered by at least `minimum` of the sets.

    Exact sweep over the sorted endpoints: each endpoint and each open gap
    between consecutive endpoints is checked once.
    """
    sets = [_as_interval_list(s) for s in sets]
    points = sorted({p for s in sets for iv in s for p in iv})
    if not points:
        return []

    def count(r):
        return sum(1 for s in sets if any(lo <= r <= hi for (lo, hi) in s))

    # pieces alternate: point, gap, point, ..., point
    pieces = []
    for i, p in enumerate(points):
        pieces.append((p, p, count(p) >= minimum))
        if i + 1 < len(points):
            q = points[i + 1]
            pieces.append((p, q, count((p + q) / 2.0) >= minimum))
    out = []
    for (a, b, ok) in pieces:
        if not ok:
            continue
        if out and out[-1][1] == a:
            out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


def intersect_intervals(intervals):
    """Common part of all inputs; None when empty."""
    intervals = list(intervals)
    if not intervals:
        return None
    out = vote(intervals, len(intervals))
    if not out:
        return None
    return out[0] if len(out) == 1 else out


def majority_vote(intervals, threshold=0.5):
    """{r : share of inputs containing r > threshold}; None when empty."""
    intervals = list(intervals)
    if not intervals:
        raise InvalidArgumentException('majority vote needs at least one interval')
    if not 0.0 <= threshold < 1.0:
        raise InvalidArgumentException(f'threshold must lie in [0, 1), got {threshold}')
    minimum = math.floor(threshold * len(intervals)) + 1
    out = vote(intervals, minimum)
    if not out:
        return None
    return out[0] if len(out) == 1 else out


def weighted_level_schedule(alpha, A):
    """alpha_a = (alpha / a) / H_A, which sums to alpha."""
    if A < 1:
        raise InvalidArgumentException(f'need at least one time point, got {A}')
    harmonic = math.fsum(1.0 / a for a in range(1, A + 1))
    return tuple(alpha / (a * harmonic) for a in range(1, A + 1))


@dataclass(frozen=True)
class TimeGrid:
    times: tuple
    rule: str = 'intersect'
    alpha: float = 0.05

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise InvalidArgumentException('time grid is empty')
        if any(b <= a for (a, b) in zip(times, times[1:], strict=False)):
            raise InvalidArgumentException('time points must be strictly increasing')
        if self.rule not in RULES:
            raise InvalidArgumentException(f'unknown combination rule: {self.rule!r}')
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgumentException(f'alpha must lie in (0,1), got {self.alpha}')
        object.__setattr__(self, 'times', times)
        if not 3 <= len(times) <= 5:
            log.info('%d time points; three to five usually work best', len(times))

    @property
    def A(self):
        return len(self.times)

    def levels(self):
        if self.rule == 'intersect':
            return (self.alpha / self.A,) * self.A
        if self.rule == 'majority':
            return (self.alpha / 2.0,) * self.A
        return weighted_level_schedule(self.alpha, self.A)


def combine_sets(sets, rule):
    """Apply the rule to per-time sets; misspecified sets vote for nothing."""
    if rule == 'majority':
        minimum = len(sets) // 2 + 1
    else:
        minimum = len(sets)
    return vote(sets, minimum)


def combine_over_times(system_factory, config, k, grid, threads=None, **estimate_args):
    """Estimate the set for coefficient k at every t_a and combine them.

    system_factory(t) returns the MomentSystem at time t.
    """
    threads = config.threads if threads is None else threads
    levels = grid.levels()

    def run(a):
        cfg = replace(config, alpha=levels[a], threads=1 if threads > 1 else config.threads)
        return estimate_interval(system_factory(grid.times[a]), cfg, k, **estimate_args)

    per_time = parallel_map(run, range(grid.A), threads)
    intervals = combine_sets(per_time, grid.rule)
    missing = [grid.times[a] for a, res in enumerate(per_time) if res.misspecified]
    if missing:
        log.warning('misspecified at time(s) %s', missing)
    diagnostics = {'rule': grid.rule, 'times': list(grid.times), 'levels': list(levels),
                   'misspecified_times': missing,
                   'per_time': [res.as_dict() for res in per_time]}
    return IdentifiedSet.from_intervals(intervals, k=k, t=None, alpha=grid.alpha, diagnostics=diagnostics)
