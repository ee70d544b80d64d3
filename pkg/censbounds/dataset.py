# vim: sw=4 ts=4 et si:
#
"""Read, build and write censored survival datasets.

A dataset file is a CSV with a header row `y,delta,x1,...,xd` plus a
schema sidecar naming the kind of every covariate column:

    [columns]
    x1 = continuous
    x2 = binary
    x3 = categorical

    [options]
    standardize = yes

JSON schemas ({"columns": {...}, "standardize": true}) are accepted too.
"""

import configparser
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from censbounds import SurvBoundsException
from censbounds.core import ColumnKind, Observation

log = logging.getLogger(__name__)

RESPONSE_COLUMNS = ('y', 'delta')


class ParseException(SurvBoundsException):
    """Bad input data; row is the 0-based data row, or None for header problems."""
    def __init__(self, msg, row=None, column=None):
        where = f'row {row}: ' if row is not None else ''
        super().__init__(f'{where}{msg}')
        self.row = row
        self.column = column


@dataclass(frozen=True)
class Schema:
    """Column kinds for the covariate columns, in no particular order."""
    kinds: dict
    standardize: bool = False
    levels: dict = field(default_factory=dict)

    def kind(self, name):
        try:
            return self.kinds[name]
        except KeyError:
            raise ParseException(f'no kind declared for column {name!r}', column=name) from None


def _parse_kind(name, text):
    """Parse `continuous`, `binary`, `categorical` or `categorical: a, b, c`."""
    kind_text, _, level_text = str(text).partition(':')
    try:
        kind = ColumnKind.from_name(kind_text)
    except SurvBoundsException as e:
        raise ParseException(f'column {name}: {e}', column=name) from None
    levels = tuple(lv.strip() for lv in level_text.split(',') if lv.strip())
    return (kind, levels)


def _schema_from_mapping(columns, standardize):
    kinds = {}
    levels = {}
    for name, text in columns.items():
        if isinstance(text, dict):
            text = '{}: {}'.format(text.get('kind', ''), ', '.join(text.get('levels', ())))
        (kinds[name], lv) = _parse_kind(name, text)
        if lv:
            levels[name] = lv
    return Schema(kinds=kinds, standardize=bool(standardize), levels=levels)


def read_schema(source):
    """Build a Schema from a path (configparser or JSON text) or a mapping."""
    if isinstance(source, Schema):
        return source
    if isinstance(source, dict):
        return _schema_from_mapping(source.get('columns', {}), source.get('standardize', False))
    path = Path(source)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ParseException(f'cannot read schema {path}: {e.strerror}') from None
    if path.suffix == '.json' or text.lstrip().startswith('{'):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseException(f'schema {path}: {e}') from None
        return read_schema(data)
    config = configparser.ConfigParser()
    config.optionxform = str
    try:
        config.read_string(text, source=str(path))
    except configparser.Error as e:
        raise ParseException(f'schema {path}: {e}') from None
    if not config.has_section('columns'):
        raise ParseException(f'schema {path} has no [columns] section')
    standardize = False
    try:
        standardize = config.getboolean('options', 'standardize')
    except (configparser.NoOptionError, configparser.NoSectionError):
        pass
    except ValueError as e:
        raise ParseException(f'schema {path}: {e}') from None
    return _schema_from_mapping(dict(config.items('columns')), standardize)


def write_schema(schema, path):
    config = configparser.ConfigParser()
    config.optionxform = str
    config['columns'] = {}
    for name, kind in schema.kinds.items():
        text = kind.value
        if name in schema.levels:
            text += ': ' + ', '.join(schema.levels[name])
        config['columns'][name] = text
    config['options'] = {'standardize': 'yes' if schema.standardize else 'no'}
    with open(path, 'w', encoding='utf-8') as f:
        config.write(f)


@dataclass(frozen=True)
class Column:
    """One covariate column of the design matrix (after dummy expansion).

    `source` is the CSV column it came from; dummy columns carry the level
    they encode. Standardized columns record center/scale.
    """
    name: str
    kind: ColumnKind
    source: str
    levels: tuple = ()
    level: object = None
    center: float = 0.0
    scale: float = 1.0


@dataclass(frozen=True, eq=False)
class Dataset:
    y: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    columns: tuple
    schema: Schema
    raw: pd.DataFrame

    def __post_init__(self):
        for arr in (self.y, self.delta, self.x):
            arr.setflags(write=False)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.size or self.x.shape[1] != len(self.columns) + 1:
            raise ParseException('design matrix shape does not match the columns')
        if self.y.size < 1:
            raise ParseException('dataset has no rows')

    @property
    def n(self):
        return self.y.size

    @property
    def d(self):
        return len(self.columns)

    @property
    def names(self):
        return ('(intercept)',) + tuple(c.name for c in self.columns)

    @property
    def column_kinds(self):
        return tuple(c.kind for c in self.columns)

    @property
    def standardized(self):
        return self.schema.standardize

    def observation(self, i):
        return Observation(y=float(self.y[i]), delta=int(self.delta[i]), x=tuple(float(v) for v in self.x[i]))

    @property
    def rows(self):
        return [self.observation(i) for i in range(self.n)]

    def groups(self):
        """Covariate groups as (source, kind, [design column indices]).

        Dummy columns of one categorical variable form a single group.
        """
        groups = []
        for idx, col in enumerate(self.columns, start=1):
            if groups and groups[-1][0] == col.source and col.kind is ColumnKind.CATEGORICAL:
                groups[-1][2].append(idx)
            else:
                groups.append((col.source, col.kind, [idx]))
        return [(s, k, tuple(ix)) for (s, k, ix) in groups]

    def destandardize(self, k, value):
        """Map a coefficient on design column k back to the raw covariate scale."""
        if k == 0:
            return value
        col = self.columns[k - 1]
        return value / col.scale

    @classmethod
    def from_arrays(cls, y, delta, covariates, names, kinds, standardize=False):
        """Build a Dataset from in-memory arrays (one column per name)."""
        covariates = np.asarray(covariates, dtype=float).reshape(len(y), -1)
        raw = {'y': [format(float(v), '.17g') for v in y],
               'delta': [str(int(v)) for v in delta]}
        for j, name in enumerate(names):
            if ColumnKind.from_name(kinds[j]) is ColumnKind.CONTINUOUS:
                raw[name] = [format(float(v), '.17g') for v in covariates[:, j]]
            else:
                raw[name] = [format(float(v), 'g') for v in covariates[:, j]]
        schema = Schema(kinds={name: ColumnKind.from_name(kinds[j]) for j, name in enumerate(names)},
                        standardize=standardize)
        return _build(pd.DataFrame(raw, dtype=str), schema)


def _parse_numbers(series, name):
    values = pd.to_numeric(series, errors='coerce').to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ParseException(f'non-numeric value {series.iloc[row]!r} in column {name}', row=row, column=name)
    return values


def _build(raw, schema):
    for name in RESPONSE_COLUMNS:
        if name not in raw.columns:
            raise ParseException(f'missing column {name!r}', column=name)
    y = _parse_numbers(raw['y'], 'y')
    if (y < 0).any():
        row = int(np.flatnonzero(y < 0)[0])
        raise ParseException(f'negative follow-up time {y[row]}', row=row, column='y')
    delta = _parse_numbers(raw['delta'], 'delta')
    bad = (delta != 0) & (delta != 1)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ParseException(f'event indicator must be 0 or 1, got {raw["delta"].iloc[row]!r}', row=row,
                             column='delta')

    for name in schema.kinds:
        if name not in raw.columns:
            raise ParseException(f'missing column {name!r}', column=name)

    design = [np.ones(len(raw))]
    columns = []
    for name in raw.columns:
        if name in RESPONSE_COLUMNS:
            continue
        kind = schema.kind(name)
        if kind is ColumnKind.CATEGORICAL:
            for (col, values) in _expand_categorical(raw[name], name, schema.levels.get(name)):
                columns.append(col)
                design.append(values)
            continue
        values = _parse_numbers(raw[name], name)
        if kind is ColumnKind.BINARY:
            bad = (values != 0) & (values != 1)
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise ParseException(f'binary column {name} holds {raw[name].iloc[row]!r}', row=row, column=name)
            columns.append(Column(name=name, kind=kind, source=name, levels=(0.0, 1.0)))
            design.append(values)
            continue
        center, scale = 0.0, 1.0
        if schema.standardize:
            center = float(values.mean())
            scale = float(values.std(ddof=1)) if values.size > 1 else 0.0
            if scale == 0.0:
                log.warning('column %s has zero spread, left unscaled', name)
                scale = 1.0
            values = (values - center) / scale
        columns.append(Column(name=name, kind=kind, source=name, center=center, scale=scale))
        design.append(values)

    x = np.column_stack(design)
    return Dataset(y=y, delta=delta.astype(np.int8), x=x, columns=tuple(columns), schema=schema, raw=raw)


def _expand_categorical(series, name, declared):
    """Yield (Column, 0/1 values) for the l-1 dummies of one categorical column.

    The reference level is the first declared level, else the first observed.
    """
    labels = series.str.strip()
    observed = list(dict.fromkeys(labels))
    if declared:
        unknown = [lv for lv in observed if lv not in declared]
        if unknown:
            row = int(np.flatnonzero((labels == unknown[0]).to_numpy())[0])
            raise ParseException(f'undeclared level {unknown[0]!r} in column {name}', row=row, column=name)
        levels = tuple(declared)
    else:
        levels = tuple(observed)
    if len(levels) < 2:
        raise ParseException(f'categorical column {name} needs at least two levels', column=name)
    for level in levels[1:]:
        col = Column(name=f'{name}[{level}]', kind=ColumnKind.CATEGORICAL, source=name,
                     levels=levels, level=level)
        yield (col, (labels == level).to_numpy(dtype=float))


def load_dataset(csv_source, schema, standardize=None):
    """Load a CSV file (path or file object) described by schema.

    standardize, when not None, overrides the schema's own flag.
    """
    schema = read_schema(schema)
    if standardize is not None and standardize != schema.standardize:
        schema = Schema(kinds=schema.kinds, standardize=bool(standardize), levels=schema.levels)
    try:
        raw = pd.read_csv(csv_source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseException(f'cannot read {csv_source}: {e}') from None
    raw.columns = [c.strip() for c in raw.columns]
    dataset = _build(raw, schema)
    log.info('loaded %d rows with %d covariate columns', dataset.n, dataset.d)
    return dataset


def write_dataset(dataset, csv_path, schema_path=None):
    """Write the raw columns (and optionally the schema) back to disk."""
    dataset.raw.to_csv(csv_path, index=False)
    if schema_path is not None:
        write_schema(dataset.schema, schema_path)
