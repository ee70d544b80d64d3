# vim: sw=4 ts=4 et si:
#
"""Brute-force approximation of the true identified set.

The moments are averaged over one large simulated sample and checked on a
lattice that is refined around feasible points until its spacing drops
below the target error.  Projections are averaged over several samples.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from censbounds import InvalidArgumentException
from censbounds.core import ParameterBox
from censbounds.instruments import build_family
from censbounds.moments import MomentSystem
from censbounds.simulation import censoring_rate_for, simulate_dataset
from censbounds.workers import parallel_map, substream

log = logging.getLogger(__name__)

# substream tag
_ORACLE = 13

# seeds carried to the next level when a level has no feasible point
FALLBACK_SEEDS = 8


@dataclass(frozen=True)
class OracleConfig:
    n_mc: int = 50000
    error: float = 0.05
    initial_points: int = 21
    draws: int = 5
    slack: float = 3.0
    box: float = None
    threads: int = 1
    batch: int = 64

    def __post_init__(self):
        if self.n_mc < 1000:
            raise InvalidArgumentException(f'n_mc must be >= 1000, got {self.n_mc}')
        if not self.error > 0:
            raise InvalidArgumentException(f'target error must be positive, got {self.error}')
        if self.initial_points < 2:
            raise InvalidArgumentException(f'need at least two initial points, got {self.initial_points}')
        if self.draws < 1:
            raise InvalidArgumentException(f'draws must be >= 1, got {self.draws}')
        if self.slack < 0:
            raise InvalidArgumentException(f'slack must be nonnegative, got {self.slack}')


def draw_mc_sample(design, n_mc, rng, censoring_rate):
    """One large sample from the design, bound to its moment system at design.t."""
    dataset = simulate_dataset(design, n_mc, rng, censoring_rate)
    (family, normalizer) = build_family(dataset, design.family_spec())
    return MomentSystem(dataset, design.link, design.t, family, normalizer)


@dataclass(frozen=True, eq=False)
class MCMoments:
    mbar: np.ndarray
    se: np.ndarray
    slack: float

    @property
    def score(self):
        """Smallest studentized moment."""
        return float(np.min(self.mbar / self.se))

    @property
    def feasible(self):
        return self.score >= -self.slack


def _batch_moments(sample, betas):
    """(mbar, se) for each row of betas, shapes (P, 2J)."""
    n = sample.n
    lam = sample.link.cdf(sample.dataset.x @ betas.T)
    g = sample.g
    g2 = g * g
    r1 = sample.at_risk_before[:, None] - lam
    r2 = lam - sample.event_before[:, None]
    mbar = np.hstack((r1.T @ g, r2.T @ g)) / n
    second = np.hstack(((r1 * r1).T @ g2, (r2 * r2).T @ g2)) / n
    sd = np.maximum(np.sqrt(np.maximum(second - mbar * mbar, 0.0)), sample.floor)
    return (mbar, sd / np.sqrt(n))


def mc_moments(sample, beta, slack=3.0):
    """Monte-Carlo moments at beta over a fixed large sample."""
    beta = sample.check_beta(beta)
    (mbar, se) = _batch_moments(sample, beta[None, :])
    return MCMoments(mbar=mbar[0], se=se[0], slack=slack)


class MonteCarloFeasibility:
    """Batched feasibility checks over a shared immutable sample."""

    def __init__(self, sample, slack=3.0, batch=64):
        self.sample = sample
        self.slack = slack
        self.batch = batch

    def __call__(self, betas):
        """Studentized scores for the rows of betas; feasible where score >= -slack."""
        betas = np.atleast_2d(np.asarray(betas, dtype=float))
        scores = np.empty(betas.shape[0])
        for start in range(0, betas.shape[0], self.batch):
            (mbar, se) = _batch_moments(self.sample, betas[start:start + self.batch])
            scores[start:start + self.batch] = np.min(mbar / se, axis=1)
        return scores


@dataclass(frozen=True)
class LevelSummary:
    h: tuple
    evaluated: int
    feasible: int
    bounds: tuple

    def as_dict(self):
        return {'h': list(self.h), 'evaluated': self.evaluated, 'feasible': self.feasible,
                'bounds': None if self.bounds is None else [list(b) for b in self.bounds]}


@dataclass(frozen=True)
class GridResult:
    bounds: tuple
    h: tuple
    evaluations: int
    levels: tuple = ()

    @property
    def empty(self):
        return self.bounds is None

    def as_dict(self):
        return {'bounds': None if self.bounds is None else [list(b) for b in self.bounds],
                'h': list(self.h), 'evaluations': self.evaluations,
                'levels': [level.as_dict() for level in self.levels]}


def _offsets(radius, dim):
    return np.array(list(itertools.product(range(-radius, radius + 1), repeat=dim)), dtype=np.int64)


def _projections(points, feasible):
    if not feasible.any():
        return None
    chosen = points[feasible]
    return tuple((float(lo), float(hi)) for (lo, hi) in zip(chosen.min(axis=0), chosen.max(axis=0), strict=True))


def adaptive_grid_search(scores, box, error=0.05, initial_points=21, slack=3.0, anchor=None,
                         threads=1, chunk=512):
    """Refine a lattice over the box around feasible points.

    scores(betas) returns one score per row; a point is feasible when its
    score is at least -slack.  The lattice passes through `anchor` (the box
    lower corner by default), so a known feasible point is always checked.
    Each refinement halves the spacing, checks the fine points within one
    coarse step of every feasible point, then floods outwards through
    feasible neighbours.
    """
    lower = np.asarray(box.lower, dtype=float)
    upper = np.asarray(box.upper, dtype=float)
    dim = lower.size
    origin = lower.copy() if anchor is None else np.asarray(anchor, dtype=float)
    if not box.contains(origin):
        raise InvalidArgumentException('anchor lies outside the parameter box')
    h = (upper - lower) / (initial_points - 1)

    def index_range(step):
        lo = np.ceil((lower - origin) / step - 1e-9).astype(np.int64)
        hi = np.floor((upper - origin) / step + 1e-9).astype(np.int64)
        return (lo, hi)

    def run(indices, step):
        points = origin + indices * step
        chunks = [points[i:i + chunk] for i in range(0, len(points), chunk)]
        return np.concatenate(parallel_map(scores, chunks, threads)) if chunks else np.empty(0)

    (lo, hi) = index_range(h)
    grids = np.meshgrid(*[np.arange(a, b + 1) for (a, b) in zip(lo, hi, strict=True)], indexing='ij')
    idx = np.stack([g.reshape(-1) for g in grids], axis=1)
    score = run(idx, h)
    evaluations = len(idx)
    levels = []

    def summarize(idx, score, step):
        ok = score >= -slack
        bounds = _projections(origin + idx * step, ok)
        levels.append(LevelSummary(h=tuple(float(v) for v in step), evaluated=len(idx),
                                   feasible=int(ok.sum()), bounds=bounds))
        log.debug('level h=%s: %d points, %d feasible, bounds %s', step, len(idx), ok.sum(), bounds)
        return ok

    ok = summarize(idx, score, h)
    near = _offsets(2, dim)
    neighbours = _offsets(1, dim)
    while np.any(h > error):
        if ok.any():
            seeds = idx[ok]
        else:
            seeds = idx[np.argsort(-score, kind='stable')[:FALLBACK_SEEDS]]
        h = h / 2.0
        (lo, hi) = index_range(h)

        def expand(base, offsets):
            cand = (base[:, None, :] + offsets[None, :, :]).reshape(-1, dim)
            inside = np.all((cand >= lo) & (cand <= hi), axis=1)
            return np.unique(cand[inside], axis=0)

        seen = {}
        frontier = expand(2 * seeds, near)
        while len(frontier):
            fresh = np.array([row for row in frontier if tuple(row) not in seen], dtype=np.int64).reshape(-1, dim)
            if not len(fresh):
                break
            fresh_score = run(fresh, h)
            evaluations += len(fresh)
            for (row, value) in zip(fresh, fresh_score, strict=True):
                seen[tuple(row)] = value
            feasible_new = fresh[fresh_score >= -slack]
            frontier = expand(feasible_new, neighbours) if len(feasible_new) else frontier[:0]
        idx = np.array(list(seen), dtype=np.int64).reshape(-1, dim)
        score = np.array(list(seen.values()))
        ok = summarize(idx, score, h)

    return GridResult(bounds=levels[-1].bounds, h=tuple(float(v) for v in h), evaluations=evaluations,
                      levels=tuple(levels))


@dataclass(frozen=True)
class OracleResult:
    bounds: tuple
    per_draw: tuple
    empty_draws: int
    censoring_rate: float
    config: dict = field(default_factory=dict)

    @property
    def empty(self):
        return self.bounds is None

    def projection(self, k):
        return None if self.bounds is None else self.bounds[k]

    def as_dict(self):
        return {'bounds': None if self.bounds is None else [list(b) for b in self.bounds],
                'empty_draws': self.empty_draws, 'censoring_rate': self.censoring_rate,
                'draws': [res.as_dict() for res in self.per_draw], 'config': self.config}


def oracle_bounds(design, config=None):
    """Projection bounds of the true identified set for every coefficient."""
    config = config or OracleConfig()
    rate = censoring_rate_for(design)
    bound = design.box if config.box is None else config.box
    per_draw = []
    for draw in range(config.draws):
        sample = draw_mc_sample(design, config.n_mc, substream(design.seed, _ORACLE, draw), rate)
        scores = MonteCarloFeasibility(sample, config.slack, config.batch)
        box = ParameterBox.cube(bound, sample.dim)
        truth = design.beta_true
        anchor = None
        if box.contains(truth) and mc_moments(sample, truth, config.slack).feasible:
            anchor = truth
        else:
            log.warning('draw %d: true coefficients not feasible, lattice anchored at the box corner', draw)
        res = adaptive_grid_search(scores, box, config.error, config.initial_points, config.slack,
                                   anchor=anchor, threads=config.threads)
        log.info('draw %d: %d evaluations, bounds %s', draw, res.evaluations, res.bounds)
        per_draw.append(res)
    found = [res.bounds for res in per_draw if not res.empty]
    if found:
        arr = np.array(found)
        bounds = tuple((float(lo), float(hi)) for (lo, hi) in arr.mean(axis=0))
    else:
        log.warning('no feasible point at the final resolution in any draw')
        bounds = None
    return OracleResult(bounds=bounds, per_draw=tuple(per_draw), empty_draws=len(per_draw) - len(found),
                        censoring_rate=rate,
                        config={'n_mc': config.n_mc, 'error': config.error, 'initial_points': config.initial_points,
                                'draws': config.draws, 'slack': config.slack, 'box': bound})
