# vim: sw=4 ts=4 et si:
#
"""Instrumental functions on the normalized covariate cube.

A family is a set of factor bases, each bound to some design columns, plus
a term table saying which function of each factor enters each product
g_j. Tensor and pairwise products are both expressed that way.
"""

import itertools
import logging
import re
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import BSpline

from censbounds import InvalidArgumentException, SurvBoundsException
from censbounds.core import ColumnKind

log = logging.getLogger(__name__)

# tolerance for matching normalized discrete levels
LEVEL_ATOL = 1e-12


class DataIntegrityException(SurvBoundsException):
    pass


class RangeException(SurvBoundsException):
    pass


class CoverageException(SurvBoundsException):
    """Some sample points activate no instrumental function."""
    def __init__(self, msg, rows=()):
        super().__init__(msg)
        self.rows = tuple(int(r) for r in rows)


def _as_columns(values, width):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape[1] != width:
        raise InvalidArgumentException(f'expected {width} input column(s), got {arr.shape[1]}')
    return arr


class IndicatorBasis:
    """g_j(x) = 1{x = a_j} on one discrete coordinate."""
    width = 1
    kind = 'indicator'

    def __init__(self, levels):
        self.levels = tuple(float(a) for a in levels)
        if len(self.levels) < 2:
            raise InvalidArgumentException(f'indicator family needs at least two levels, got {len(self.levels)}')
        if len(set(self.levels)) != len(self.levels):
            raise InvalidArgumentException('indicator levels must be distinct')

    @property
    def count(self):
        return len(self.levels)

    def evaluate(self, values):
        v = _as_columns(values, 1)
        return np.isclose(v, np.asarray(self.levels)[None, :], rtol=0.0, atol=LEVEL_ATOL).astype(float)

    def supports(self):
        return [{'level': a} for a in self.levels]

    def labels(self):
        return [f'ind[{a:g}]' for a in self.levels]


class DummyBasis:
    """l functions over the l-1 dummy columns of one categorical covariate.

    Function j < l fires on the pattern with only dummy j set; the last one
    fires on the all-zero pattern of the reference level.
    """
    kind = 'dummy'

    def __init__(self, l, zero=0.0, one=1.0):
        if l < 2:
            raise InvalidArgumentException(f'dummy family needs l >= 2, got {l}')
        self.l = int(l)
        self.zero = np.broadcast_to(np.asarray(zero, dtype=float), (self.l - 1,)).copy()
        self.one = np.broadcast_to(np.asarray(one, dtype=float), (self.l - 1,)).copy()

    @property
    def width(self):
        return self.l - 1

    @property
    def count(self):
        return self.l

    def evaluate(self, values):
        v = _as_columns(values, self.width)
        ones = np.isclose(v, self.one[None, :], rtol=0.0, atol=LEVEL_ATOL)
        zeros = np.isclose(v, self.zero[None, :], rtol=0.0, atol=LEVEL_ATOL)
        stray = ~(ones | zeros)
        if stray.any():
            row = int(np.flatnonzero(stray.any(axis=1))[0])
            raise DataIntegrityException(f'row {row}: dummy value is neither 0 nor 1')
        set_count = ones.sum(axis=1)
        if (set_count > 1).any():
            row = int(np.flatnonzero(set_count > 1)[0])
            raise DataIntegrityException(f'row {row}: conflicting dummy pattern {v[row].tolist()}')
        act = np.zeros((v.shape[0], self.l))
        act[:, :-1] = ones
        act[:, -1] = set_count == 0
        return act

    def supports(self):
        return [{'dummy': j} for j in range(self.l - 1)] + [{'dummy': 'reference'}]

    def labels(self):
        return [f'dummy[{j}]' for j in range(self.l - 1)] + ['dummy[ref]']


class SplineBasis:
    """Cubic B-splines on equidistant knots covering [0,1].

    count functions; function j is centred on p_j = j/(count-1) with
    support (p_{j-2}, p_{j+2}). A single spline is centred on 1/2 with unit
    knot spacing, so it is positive on all of [0,1].
    """
    width = 1
    kind = 'spline'

    def __init__(self, count):
        if count < 1:
            raise InvalidArgumentException(f'spline family needs l >= 1, got {count}')
        self.count = int(count)
        if self.count == 1:
            (self.origin, self.step) = (0.5, 1.0)
        else:
            (self.origin, self.step) = (0.0, 1.0 / (self.count - 1))
        self._splines = [BSpline.basis_element(self.knots(j), extrapolate=False) for j in range(self.count)]

    def knots(self, j):
        return self.origin + self.step * np.arange(j - 2, j + 3, dtype=float)

    def evaluate(self, values):
        v = _as_columns(values, 1)[:, 0]
        out = np.empty((v.size, self.count))
        for j, spline in enumerate(self._splines):
            out[:, j] = np.nan_to_num(spline(v), nan=0.0)
        return np.clip(out, 0.0, None)

    def supports(self):
        return [{'interval': (float(self.knots(j)[0]), float(self.knots(j)[-1]))} for j in range(self.count)]

    def labels(self):
        return [f'spline[{j}]' for j in range(self.count)]


class BoxBasis:
    """Trapezoid boxes on l equal cells of [0,1].

    Inside cell [a, b] the function ramps up on [a, c1], is 1 on [c1, c2]
    and ramps down on [c2, b], with c1 - a = b - c2 = smoothing * (b - a).
    The outer cells have no ramp at 0 and 1.
    """
    width = 1
    kind = 'box'

    def __init__(self, count, smoothing=0.1):
        if count < 1:
            raise InvalidArgumentException(f'box family needs l >= 1, got {count}')
        if not 0.0 < smoothing < 0.5:
            raise InvalidArgumentException(f'box smoothing fraction must lie in (0, 0.5), got {smoothing}')
        self.count = int(count)
        self.smoothing = float(smoothing)

    def cell(self, j):
        a = j / self.count
        b = (j + 1) / self.count
        ramp = self.smoothing * (b - a)
        return (a, a + ramp, b - ramp, b)

    def evaluate(self, values):
        v = _as_columns(values, 1)[:, 0]
        out = np.empty((v.size, self.count))
        for j in range(self.count):
            (a, c1, c2, b) = self.cell(j)
            up = (v - a) / (c1 - a) if j > 0 else np.where(v >= a, 1.0, 0.0)
            down = (b - v) / (b - c2) if j < self.count - 1 else np.where(v <= b, 1.0, 0.0)
            out[:, j] = np.clip(np.minimum(up, down), 0.0, 1.0)
        return out

    def supports(self):
        return [{'interval': (self.cell(j)[0], self.cell(j)[3])} for j in range(self.count)]

    def labels(self):
        return [f'box[{j}]' for j in range(self.count)]


@dataclass(frozen=True, eq=False)
class Factor:
    basis: object
    coordinates: tuple = None
    name: str = ''

    def evaluate(self, z):
        z = np.asarray(z, dtype=float)
        if self.coordinates is None:
            return self.basis.evaluate(z)
        return self.basis.evaluate(z[:, list(self.coordinates)])


@dataclass(frozen=True, eq=False)
class InstrumentalFamily:
    """J products of factor functions; term entry -1 means the factor is unused."""
    factors: tuple
    terms: np.ndarray
    weights: np.ndarray = None
    provenance: str = ''
    dropped: tuple = field(default=())

    def __post_init__(self):
        terms = np.asarray(self.terms, dtype=int).reshape(-1, len(self.factors))
        terms.setflags(write=False)
        object.__setattr__(self, 'terms', terms)
        weights = np.ones(terms.shape[0]) if self.weights is None else np.asarray(self.weights, dtype=float)
        weights.setflags(write=False)
        object.__setattr__(self, 'weights', weights)
        if terms.shape[0] < 1:
            raise InvalidArgumentException('instrumental family must hold at least one function')

    @property
    def J(self):
        return self.terms.shape[0]

    def __len__(self):
        return self.J

    def evaluate(self, z):
        """Evaluate all J functions at normalized rows z; returns (n, J)."""
        z = np.asarray(z, dtype=float)
        n = z.shape[0]
        out = np.tile(self.weights, (n, 1))
        for f, factor in enumerate(self.factors):
            idx = self.terms[:, f]
            used = idx >= 0
            if not used.any():
                continue
            values = factor.evaluate(z)
            out[:, used] *= values[:, idx[used]]
        return out

    def labels(self):
        per_factor = [f.basis.labels() for f in self.factors]
        out = []
        for row in self.terms:
            parts = [f'{self.factors[f].name}:{per_factor[f][i]}' if self.factors[f].name else per_factor[f][i]
                     for f, i in enumerate(row) if i >= 0]
            out.append('*'.join(parts) or 'const')
        return out

    def supports(self):
        """Per function: coordinate name -> factor support descriptor."""
        per_factor = [f.basis.supports() for f in self.factors]
        return [{self.factors[f].name or str(f): per_factor[f][i] for f, i in enumerate(row) if i >= 0}
                for row in self.terms]

    def subset(self, keep, provenance=None):
        keep = np.asarray(keep, dtype=int)
        labels = self.labels()
        kept = set(keep.tolist())
        gone = tuple(labels[j] for j in range(self.J) if j not in kept)
        return replace(self, terms=self.terms[keep], weights=self.weights[keep],
                       provenance=provenance or self.provenance, dropped=self.dropped + gone)

    def scaled(self, factors):
        """Copy with g_j multiplied by factors[j] (scalar or J-vector)."""
        w = self.weights * np.broadcast_to(np.asarray(factors, dtype=float), (self.J,))
        if np.any(w <= 0):
            raise InvalidArgumentException('instrument scale factors must be positive')
        return replace(self, weights=w)

    def permuted(self, order):
        order = np.asarray(order, dtype=int)
        return replace(self, terms=self.terms[order], weights=self.weights[order])

    def bound_to(self, coordinates, name=''):
        """Bind a single-factor family to design columns."""
        if len(self.factors) != 1:
            raise InvalidArgumentException('only single-factor families can be rebound')
        factor = Factor(self.factors[0].basis, tuple(coordinates), name)
        return replace(self, factors=(factor,))

    @property
    def coordinates(self):
        coords = []
        for f in self.factors:
            coords.extend(f.coordinates or ())
        return tuple(coords)

    def describe(self):
        return {'J': self.J, 'provenance': self.provenance, 'functions': self.labels(),
                'dropped': list(self.dropped)}


def _single(basis, provenance):
    return InstrumentalFamily(factors=(Factor(basis),), terms=np.arange(basis.count).reshape(-1, 1),
                              provenance=provenance)


def build_indicator_family(levels):
    return _single(IndicatorBasis(levels), f'indicator({len(levels)})')


def build_dummy_family(l, zero=0.0, one=1.0):
    """zero/one give the (normalized) values coding 0 and 1 in each dummy column."""
    return _single(DummyBasis(l, zero, one), f'dummy({l})')


def build_spline_family(count):
    return _single(SplineBasis(count), f'spline({count})')


def build_box_family(count, smoothing_fraction=0.1):
    return _single(BoxBasis(count, smoothing_fraction), f'box({count})')


def constant_family():
    """The single function g = 1 (no covariates)."""
    return InstrumentalFamily(factors=(), terms=np.zeros((1, 0), dtype=int), provenance='constant')


def _check_disjoint(families):
    seen = set()
    for fam in families:
        coords = set(fam.coordinates)
        if coords & seen:
            raise InvalidArgumentException(f'coordinates {sorted(coords & seen)} have more than one family')
        seen |= coords
    return seen


def tensor_product(families, dimension=None):
    """All products taking one function from every family.

    With dimension given, every covariate coordinate 1..dimension must be
    covered by exactly one family.
    """
    families = list(families)
    seen = _check_disjoint(families)
    if dimension is not None:
        missing = sorted(set(range(1, dimension + 1)) - seen)
        if missing:
            raise InvalidArgumentException(f'no instrumental family for coordinate(s) {missing}')
    if not families:
        return constant_family()
    factors = tuple(f for fam in families for f in fam.factors)
    rows = []
    weights = []
    for combo in itertools.product(*(range(fam.J) for fam in families)):
        row = []
        w = 1.0
        for fam, j in zip(families, combo, strict=True):
            row.extend(fam.terms[j].tolist())
            w *= fam.weights[j]
        rows.append(row)
        weights.append(w)
    return InstrumentalFamily(factors=factors, terms=np.array(rows, dtype=int), weights=np.array(weights),
                              provenance=' x '.join(fam.provenance for fam in families))


def pairwise_product(families, d=None):
    """Products over every unordered pair of per-covariate families."""
    families = list(families)
    if len(families) < 2 or (d is not None and d < 2):
        raise InvalidArgumentException('pairwise products need at least two covariates')
    _check_disjoint(families)
    factors = tuple(f for fam in families for f in fam.factors)
    offsets = np.cumsum([0] + [len(fam.factors) for fam in families])
    rows = []
    weights = []
    for (a, b) in itertools.combinations(range(len(families)), 2):
        pair = tensor_product([families[a], families[b]])
        for row, w in zip(pair.terms, pair.weights, strict=True):
            full = -np.ones(len(factors), dtype=int)
            na = len(families[a].factors)
            full[offsets[a]:offsets[a] + na] = row[:na]
            full[offsets[b]:offsets[b] + len(families[b].factors)] = row[na:]
            rows.append(full)
            weights.append(w)
    return InstrumentalFamily(factors=factors, terms=np.array(rows), weights=np.array(weights),
                              provenance='pairwise(' + ', '.join(fam.provenance for fam in families) + ')')


@dataclass(frozen=True, eq=False)
class MinMaxNormalizer:
    """N_j(x) = (x + M_j) / (2 M_j); column 0 (intercept) stays 1."""
    bounds: np.ndarray

    kind = 'minmax'

    def transform(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = (x + self.bounds) / (2.0 * self.bounds)
        z[:, 0] = 1.0
        return z

    def transform_column(self, j, values):
        return (np.asarray(values, dtype=float) + self.bounds[j]) / (2.0 * self.bounds[j])

    def describe(self):
        return {'kind': self.kind, 'bounds': self.bounds[1:].tolist()}


def _design_matrix(dataset):
    return np.asarray(dataset.x, dtype=float)


def fit_minmax(dataset, bounds=None, margin=0.05):
    """Fit symmetric bounds M_j; default M_j = (1 + margin) max_i |x_ij|."""
    x = _design_matrix(dataset)
    d1 = x.shape[1]
    if bounds is None:
        m = np.abs(x).max(axis=0) * (1.0 + margin)
        m[m == 0.0] = 1.0
    else:
        m = np.ones(d1)
        m[1:] = np.broadcast_to(np.asarray(bounds, dtype=float), (d1 - 1,))
        if np.any(m <= 0):
            raise InvalidArgumentException('min-max bounds must be positive')
        outside = np.abs(x[:, 1:]) > m[None, 1:]
        if outside.any():
            (row, col) = np.argwhere(outside)[0]
            raise RangeException(f'row {row}: value {x[row, col + 1]} of column {col + 1} '
                                 f'lies outside [-{m[col + 1]}, {m[col + 1]}]')
    m[0] = 1.0
    m.setflags(write=False)
    return MinMaxNormalizer(bounds=m)


def _spread(values, kind, scale):
    if kind == 'sin':
        return np.sin(0.5 * np.pi * values)
    return np.arctan(scale * values) / np.arctan(scale)


@dataclass(frozen=True, eq=False)
class PcaNormalizer:
    """Rotate continuous columns onto principal axes, then pin each score onto [0,1].

    Discrete columns go through the embedded min-max normalizer.
    """
    continuous: tuple
    mean: np.ndarray
    axes: np.ndarray
    score_min: np.ndarray
    score_range: np.ndarray
    discrete: MinMaxNormalizer
    spread: str = 'sin'
    spread_scale: float = 1.0

    kind = 'pca'

    def transform(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = self.discrete.transform(x)
        if not self.continuous:
            return z
        scores = (x[:, list(self.continuous)] - self.mean) @ self.axes
        live = self.score_range > 0
        shifted = np.zeros_like(scores)
        shifted[:, live] = 2.0 * (scores[:, live] - self.score_min[live]) / self.score_range[live] - 1.0
        shifted = np.clip(shifted, -1.0, 1.0)
        out = (_spread(shifted, self.spread, self.spread_scale) + 1.0) / 2.0
        out[:, ~live] = 0.5
        z[:, list(self.continuous)] = out
        return z

    def transform_column(self, j, values):
        if j in self.continuous:
            raise InvalidArgumentException('continuous columns are mixed by the PCA rotation')
        return self.discrete.transform_column(j, values)

    def describe(self):
        return {'kind': self.kind, 'spread': self.spread, 'axes': self.axes.tolist(),
                'degenerate': [int(i) for i in np.flatnonzero(self.score_range == 0)]}


def fit_pca_normalizer(dataset, spread='sin', spread_scale=2.0):
    """Fit the PCA normalizer on the continuous columns of dataset."""
    if spread not in ('sin', 'arctan'):
        raise InvalidArgumentException(f'unknown spread function: {spread!r}')
    if spread == 'arctan' and spread_scale <= 0:
        raise InvalidArgumentException('arctan spread scale must be positive')
    x = _design_matrix(dataset)
    continuous = tuple(j for j, kind in enumerate(dataset.column_kinds, start=1)
                       if kind is ColumnKind.CONTINUOUS)
    discrete = fit_minmax(dataset)
    if not continuous:
        raise InvalidArgumentException('PCA normalizer needs at least one continuous covariate')
    cont = x[:, list(continuous)]
    mean = cont.mean(axis=0)
    centered = cont - mean
    cov = np.atleast_2d(np.cov(centered, rowvar=False)) if cont.shape[0] > 1 else np.zeros((len(continuous),) * 2)
    (eigvals, eigvecs) = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    axes = eigvecs[:, order]
    for i in range(axes.shape[1]):
        lead = np.argmax(np.abs(axes[:, i]))
        if axes[lead, i] < 0:
            axes[:, i] = -axes[:, i]
    scores = centered @ axes
    smin = scores.min(axis=0)
    srange = scores.max(axis=0) - smin
    tiny = srange <= 1e-12 * np.maximum(1.0, np.abs(scores).max(axis=0))
    srange[tiny] = 0.0
    if tiny.any():
        log.info('PCA score coordinate(s) %s have no spread and map to 0.5', np.flatnonzero(tiny).tolist())
    for arr in (mean, axes, smin, srange):
        arr.setflags(write=False)
    return PcaNormalizer(continuous=continuous, mean=mean, axes=axes, score_min=smin, score_range=srange,
                         discrete=discrete, spread=spread, spread_scale=float(spread_scale))


def check_coverage(family, z):
    """Raise CoverageException unless every row of z activates some g_j."""
    g = family.evaluate(z)
    uncovered = np.flatnonzero(~(g > 0).any(axis=1))
    if uncovered.size:
        raise CoverageException(f'{uncovered.size} sample point(s) activate no instrumental function '
                                f'(first: row {uncovered[0]})', rows=uncovered)


def prune_family(family, dataset, normalizer, min_activation=1):
    """Drop functions active on fewer than min_activation sample points."""
    if min_activation < 1:
        raise InvalidArgumentException(f'min_activation must be >= 1, got {min_activation}')
    z = normalizer.transform(dataset.x)
    g = family.evaluate(z)
    counts = (g > 0).sum(axis=0)
    keep = np.flatnonzero(counts >= min_activation)
    if keep.size == 0:
        raise CoverageException('pruning removed every instrumental function', rows=range(z.shape[0]))
    pruned = family if keep.size == family.J else family.subset(keep)
    if keep.size < family.J:
        log.info('pruned %d of %d instrumental functions', family.J - keep.size, family.J)
    check_coverage(pruned, z)
    return pruned


@dataclass(frozen=True)
class FamilySpec:
    """How to build the instrumental family for a dataset.

    entries maps a source column name to (kind, count); columns not listed
    use the default for their kind.
    """
    entries: dict = field(default_factory=dict)
    combine: str = 'tensor'
    normalizer: str = 'pca'
    spline_count: int = 5
    box_smoothing: float = 0.1
    min_activation: int = 1
    prune: bool = True
    spread: str = 'sin'
    spread_scale: float = 2.0

    def describe(self):
        return {'entries': {k: list(v) for k, v in self.entries.items()}, 'combine': self.combine,
                'normalizer': self.normalizer, 'spline_count': self.spline_count,
                'box_smoothing': self.box_smoothing, 'min_activation': self.min_activation,
                'prune': self.prune, 'spread': self.spread}


_ENTRY_RE = re.compile(r'^\s*([^=\s]+)\s*=\s*(spline|box|indicator|dummy)\s*(?::\s*(\d+))?\s*$')


def parse_family_spec(text, base=None):
    """Parse `x1=spline:6,x2=indicator;combine=tensor;normalizer=pca`."""
    spec = base or FamilySpec()
    if not text:
        return spec
    entries = dict(spec.entries)
    options = {}
    for part in text.split(';'):
        part = part.strip()
        if not part:
            continue
        key, _, value = part.partition('=')
        key = key.strip()
        if key in ('combine', 'normalizer', 'spread'):
            options[key] = value.strip()
        elif key in ('min_activation', 'spline_count'):
            options[key] = int(value)
        elif key in ('box_smoothing', 'spread_scale'):
            options[key] = float(value)
        elif key == 'prune':
            options[key] = value.strip().lower() in ('1', 'yes', 'true', 'on')
        else:
            for item in part.split(','):
                m = _ENTRY_RE.match(item)
                if not m:
                    raise InvalidArgumentException(f'bad family entry: {item!r}')
                entries[m.group(1)] = (m.group(2), int(m.group(3)) if m.group(3) else None)
    spec = replace(spec, entries=entries, **options)
    if spec.combine not in ('tensor', 'pairwise'):
        raise InvalidArgumentException(f'unknown combination rule: {spec.combine!r}')
    if spec.normalizer not in ('minmax', 'pca'):
        raise InvalidArgumentException(f'unknown normalizer: {spec.normalizer!r}')
    return spec


def _group_family(dataset, normalizer, spec, source, kind, coords):
    (fkind, count) = spec.entries.get(source, (None, None))
    if kind is ColumnKind.CONTINUOUS:
        fkind = fkind or 'spline'
        count = count or spec.spline_count
        if fkind == 'spline':
            fam = build_spline_family(count)
        elif fkind == 'box':
            fam = build_box_family(count, spec.box_smoothing)
        else:
            raise InvalidArgumentException(f'column {source}: {fkind} functions need a discrete column')
    elif kind is ColumnKind.BINARY:
        if fkind not in (None, 'indicator'):
            raise InvalidArgumentException(f'column {source}: binary columns take indicator functions')
        levels = normalizer.transform_column(coords[0], [0.0, 1.0])
        fam = build_indicator_family(levels)
    else:
        if fkind not in (None, 'dummy', 'indicator'):
            raise InvalidArgumentException(f'column {source}: categorical columns take dummy functions')
        zero = [normalizer.transform_column(j, 0.0) for j in coords]
        one = [normalizer.transform_column(j, 1.0) for j in coords]
        fam = build_dummy_family(len(coords) + 1, zero, one)
    return fam.bound_to(coords, source)


def build_family(dataset, spec=None):
    """Fit the normalizer and assemble the family; returns (family, normalizer)."""
    spec = spec or FamilySpec()
    unknown = set(spec.entries) - {src for (src, _, _) in dataset.groups()}
    if unknown:
        raise InvalidArgumentException(f'family entries for unknown column(s): {sorted(unknown)}')
    has_continuous = any(kind is ColumnKind.CONTINUOUS for kind in dataset.column_kinds)
    if spec.normalizer == 'pca' and has_continuous:
        normalizer = fit_pca_normalizer(dataset, spec.spread, spec.spread_scale)
    else:
        normalizer = fit_minmax(dataset)
    per_group = [_group_family(dataset, normalizer, spec, src, kind, coords)
                 for (src, kind, coords) in dataset.groups()]
    if spec.combine == 'pairwise' and len(per_group) >= 2:
        family = pairwise_product(per_group, len(per_group))
    else:
        family = tensor_product(per_group, dataset.d)
    if spec.prune:
        family = prune_family(family, dataset, normalizer, spec.min_activation)
    else:
        check_coverage(family, normalizer.transform(dataset.x))
    log.debug('instrumental family %s with J=%d', family.provenance, family.J)
    return (family, normalizer)
