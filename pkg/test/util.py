"""Utility functions, common to test_*.py test modules."""

import importlib
import io
import os
import sys
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import numpy as np

from censbounds.dataset import Dataset, write_dataset
from censbounds.instruments import build_family, parse_family_spec
from censbounds.moments import MomentSystem
from censbounds.subvector import OptimizerConfig, TestConfig

# template for the schema file of the two-covariate test data
SCHEMA_TEMPLATE = [
    '[columns]',
    'x1 = continuous',
    'x2 = binary',
    '',
    '[options]',
    'standardize = no',
    ]


def slow_tests_enabled():
    """Expensive replications only run when CENSBOUNDS_SLOW is set."""
    return bool(os.getenv('CENSBOUNDS_SLOW'))


def fast_config(**kwargs):
    """A TestConfig small enough for unit tests."""
    opts = {'n_boot': 60, 'seed': 7, 'optimizer': OptimizerConfig(multistarts=3, max_evals=150)}
    opts.update(kwargs)
    return TestConfig(**opts)


def make_dataset(n=200, seed=1, beta=(0.0, 1.0, -1.0), censor_rate=0.3, binary=True):
    """Cox-model data with independent exponential censoring.

    Columns x1 (standard normal) and, when binary is set, x2 (Bernoulli 0.5).
    """
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(n)
    cols = [x1]
    names = ['x1']
    kinds = ['continuous']
    if binary:
        cols.append((rng.random(n) < 0.5).astype(float))
        names.append('x2')
        kinds.append('binary')
    x = np.column_stack(cols)
    xb = x @ np.asarray(beta[1:1 + x.shape[1]], dtype=float)
    t = np.exp(np.log(rng.exponential(size=n)) - beta[0] - xb)
    c = rng.exponential(1.0 / censor_rate, size=n)
    y = np.minimum(t, c)
    delta = (t <= c).astype(int)
    return Dataset.from_arrays(y, delta, x, names, kinds)


def make_system(dataset, spec='x1=spline:4', t=1.0, link='cox'):
    """The MomentSystem of dataset at time t with the given family spec."""
    (family, normalizer) = build_family(dataset, parse_family_spec(spec))
    return MomentSystem(dataset, link, t, family, normalizer)


def write_csv_and_schema(dataset, dirname):
    """Write dataset to dirname; return (csv path, schema path)."""
    csv_path = Path(dirname) / 'data.csv'
    schema_path = Path(dirname) / 'schema.cfg'
    write_dataset(dataset, csv_path, schema_path)
    return (csv_path, schema_path)


def write_schema_template(dirname):
    schema_path = Path(dirname) / 'schema.cfg'
    with schema_path.open('w', encoding='utf-8') as schemaf:
        for aline in SCHEMA_TEMPLATE:
            print(aline, file=schemaf)
    return schema_path


def import_mut(modname):
    """Import our module under test."""
    dynamic_mod = importlib.import_module(f'censbounds.{modname}')
    return dynamic_mod.main


def call_mut(mut_func, mut, arg_array):
    """Call the modulue under test, passing in the specified arguments.

    We capture stdout and stderr from the test code and return it.
    """
    save_argv = sys.argv
    sys.argv = [mut, *arg_array]
    captured_stdout = io.StringIO()
    captured_stderr = io.StringIO()
    try:
        with redirect_stdout(captured_stdout), redirect_stderr(captured_stderr):
            res = mut_func()
    finally:
        sys.argv = save_argv
    return (res, captured_stdout.getvalue(), captured_stderr.getvalue())
