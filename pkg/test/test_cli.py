"""The test suite for the command line programs.

Each command is called through its main(), with sys.argv set the way the
console scripts would set it.
"""

import json
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from censbounds import cli
from censbounds.dataset import Dataset

from .util import call_mut, import_mut, make_dataset, write_csv_and_schema

# keeps the optimizer cheap for every command below
FAST_CONFIG = [
    '[test]',
    'multistarts = 2',
    'max_evals = 150',
    ]

TINY_DESIGN = [
    '[design]',
    'n = 80',
    'reps = 1',
    'n_boot = 20',
    'n_init = 7',
    'box = 4',
    'censoring_rate = 0.3',
    'multistarts = 2',
    'spline_count = 4',
    'seed = 5',
    ]


def _write_lines(path, lines):
    with Path(path).open('w', encoding='utf-8') as f:
        for aline in lines:
            print(aline, file=f)
    return path


def _all_after_t_dataset(n=120, seed=9):
    """Every observation ends after 2, so no event happens by t = 0.5 or t = 1."""
    rng = np.random.default_rng(seed)
    y = 2.0 + rng.exponential(size=n)
    delta = (rng.random(n) < 0.6).astype(int)
    x = (rng.random(n) < 0.5).astype(float).reshape(-1, 1)
    return Dataset.from_arrays(y, delta, x, ['g'], ['binary'])


class TestEstimate(unittest.TestCase):
    """Test the estimate command end to end on small data."""

    @classmethod
    def setUpClass(cls):
        cls.mut = 'censbounds-estimate'
        cls.mut_func = staticmethod(import_mut('estimatebounds'))
        cls.tmpdir = tempfile.TemporaryDirectory()
        (csv_path, schema_path) = write_csv_and_schema(make_dataset(n=150, seed=61), cls.tmpdir.name)
        cls.config_path = _write_lines(Path(cls.tmpdir.name) / 'fast.cfg', FAST_CONFIG)
        cls.model_args = ['--data', str(csv_path), '--schema', str(schema_path), '--time', '1.0',
                          '--coef', '1', '--family', 'x1=spline:4', '--box', '5', '--n-init', '11',
                          '--n-boot', '40', '--mode', 'single', '--seed', '3',
                          '--config', str(cls.config_path)]
        cls.out = Path(cls.tmpdir.name) / 'out.json'
        cls.first = call_mut(cls.mut_func, cls.mut,
                             [*cls.model_args, '--threads', '1', '--trace', '-o', str(cls.out)])
        cls.doc = json.loads(cls.out.read_text(encoding='utf-8'))

        bad = _all_after_t_dataset()
        bad_dir = Path(cls.tmpdir.name) / 'bad'
        bad_dir.mkdir()
        (bad_csv, bad_schema) = write_csv_and_schema(bad, bad_dir)
        cls.bad_args = ['--data', str(bad_csv), '--schema', str(bad_schema), '--time', '0.5',
                        '--coef', '1', '--box', '2', '--n-init', '7', '--n-boot', '30',
                        '--seed', '1', '--threads', '1', '--config', str(cls.config_path)]

    @classmethod
    def tearDownClass(cls):
        cls.tmpdir.cleanup()

    def test_json_contract(self):
        """Test the top level keys and the reported model."""
        (res, out, err) = self.first
        self.assertEqual(res, 0, err)
        self.assertEqual(out, '')
        for key in ('command', 'version', 'status', 'result', 'config', 'coefficient', 'model'):
            self.assertIn(key, self.doc)
        self.assertEqual(self.doc['command'], 'estimate')
        self.assertEqual(self.doc['status'], 'feasible')
        self.assertEqual(self.doc['coefficient'], {'index': 1, 'name': 'x1'})
        self.assertEqual(self.doc['model']['t'], 1.0)
        self.assertEqual(self.doc['model']['link'], 'cox')
        self.assertEqual(self.doc['config']['sections']['test']['multistarts'], 2)

    def test_intervals(self):
        """Test the bounds are ordered and inside the box."""
        intervals = self.doc['result']['intervals']
        self.assertTrue(intervals)
        for (lo, hi) in intervals:
            self.assertLessEqual(-5.0, lo)
            self.assertLessEqual(lo, hi)
            self.assertLessEqual(hi, 5.0)
        peterson = self.doc['result']['peterson']
        self.assertEqual(len(peterson['lower']), len(peterson['labels']))

    def test_trace(self):
        """Test --trace keeps per-point diagnostics and writes the trace CSV beside the JSON."""
        self.assertIn('cache', self.doc['result'])
        trace = pd.read_csv(f'{self.out}.trace.csv')
        self.assertGreater(len(trace), 0)
        self.assertTrue(trace['r'].is_monotonic_increasing)
        for entry in self.doc['result']['cache']:
            self.assertTrue(entry['minimizers'])
            self.assertIn('histogram', entry['bootstrap'])
            self.assertEqual(len(entry['trajectories']), 2)

    def test_thread_invariant(self):
        """Test 8 worker threads give the same intervals as 1."""
        (res, out, err) = call_mut(self.mut_func, self.mut, [*self.model_args, '--threads', '8'])
        self.assertEqual(res, 0, err)
        self.assertEqual(json.loads(out)['result']['intervals'], self.doc['result']['intervals'])

    def test_misspecified(self):
        """Test no event before t empties the identified set and exits 2."""
        (res, out, err) = call_mut(self.mut_func, self.mut, self.bad_args)
        self.assertEqual(res, 2, err)
        doc = json.loads(out)
        self.assertEqual(doc['status'], 'misspecified')
        self.assertEqual(doc['result']['intervals'], [])

    def test_deterministic(self):
        """Test the same arguments write the same bytes."""
        first = call_mut(self.mut_func, self.mut, self.bad_args)
        again = call_mut(self.mut_func, self.mut, self.bad_args)
        self.assertEqual(first[0], again[0])
        self.assertEqual(first[1], again[1])

    def test_missing_arguments(self):
        """Test --time, --data and --schema are required."""
        args = [a for a in self.bad_args if a != '--time' and a != '0.5']
        (res, _, err) = call_mut(self.mut_func, self.mut, args)
        self.assertEqual(res, 1)
        self.assertIn('--time is required', err)
        (res, _, err) = call_mut(self.mut_func, self.mut, ['--time', '1'])
        self.assertEqual(res, 1)
        self.assertIn('--data and --schema', err)

    def test_bad_coefficient(self):
        """Test k outside 0..d."""
        args = [*self.bad_args, '--coef', '4']
        (res, _, err) = call_mut(self.mut_func, self.mut, args)
        self.assertEqual(res, 1)
        self.assertIn('--coef', err)

    def test_bad_option(self):
        """Test an unknown option."""
        (res, _, err) = call_mut(self.mut_func, self.mut, ['--frobnicate'])
        self.assertEqual(res, 1)
        self.assertIn('Option paring error', err)

    def test_extra_arguments(self):
        """Test positional arguments are refused."""
        (res, _, err) = call_mut(self.mut_func, self.mut, [*self.bad_args, 'extra'])
        self.assertEqual(res, 1)
        self.assertIn('Unexpected arguments', err)

    def test_missing_data_file(self):
        """Test an unreadable data file is an error, not a traceback."""
        args = ['--data', '/nonexistent/data.csv', '--schema', '/nonexistent/schema.cfg', '--time', '1']
        (res, _, err) = call_mut(self.mut_func, self.mut, args)
        self.assertEqual(res, 1)
        self.assertIn('Error:', err)

    def test_help(self):
        """Test --help exits 0 with the usage."""
        (res, out, _) = call_mut(self.mut_func, self.mut, ['--help'])
        self.assertEqual(res, 0)
        self.assertIn('--time', out)


class TestCombine(unittest.TestCase):
    """Test the combine command."""

    @classmethod
    def setUpClass(cls):
        cls.mut = 'censbounds-combine'
        cls.mut_func = staticmethod(import_mut('combinebounds'))
        cls.tmpdir = tempfile.TemporaryDirectory()
        (csv_path, schema_path) = write_csv_and_schema(_all_after_t_dataset(), cls.tmpdir.name)
        config_path = _write_lines(Path(cls.tmpdir.name) / 'fast.cfg', FAST_CONFIG)
        cls.args = ['--data', str(csv_path), '--schema', str(schema_path), '--coef', '1', '--box', '2',
                    '--n-init', '7', '--n-boot', '30', '--seed', '1', '--threads', '2',
                    '--config', str(config_path)]

    @classmethod
    def tearDownClass(cls):
        cls.tmpdir.cleanup()

    def test_all_times_misspecified(self):
        """Test the majority of two misspecified times is empty."""
        (res, out, err) = call_mut(self.mut_func, self.mut, [*self.args, '--times', '1.0,0.5', '--rule', 'majority'])
        self.assertEqual(res, 2, err)
        doc = json.loads(out)
        self.assertEqual(doc['command'], 'combine')
        self.assertEqual(doc['model']['times'], [0.5, 1.0])
        self.assertEqual(doc['model']['levels'], [0.025, 0.025])
        self.assertEqual(doc['result']['intervals'], [])

    def test_times_required(self):
        """Test a missing or malformed --times."""
        (res, _, err) = call_mut(self.mut_func, self.mut, self.args)
        self.assertEqual(res, 1)
        self.assertIn('--times is required', err)
        (res, _, err) = call_mut(self.mut_func, self.mut, [*self.args, '--times', 'a,b'])
        self.assertEqual(res, 1)
        self.assertIn('Option paring error', err)

    def test_bad_rule(self):
        """Test an unknown combination rule."""
        (res, _, err) = call_mut(self.mut_func, self.mut, [*self.args, '--times', '1', '--rule', 'union'])
        self.assertEqual(res, 1)
        self.assertIn('Option paring error', err)


class TestSimulate(unittest.TestCase):
    """Test the simulate command on a one-replication design."""

    def setUp(self):
        self.mut = 'censbounds-simulate'
        self.mut_func = import_mut('simulatebounds')
        self.tmpdir = tempfile.TemporaryDirectory()
        self.design = _write_lines(Path(self.tmpdir.name) / 'tiny.cfg', TINY_DESIGN)

    def tearDown(self):
        self.tmpdir.cleanup()

    def test_tiny_design(self):
        """Test the metrics JSON and the per-replication CSV."""
        out = Path(self.tmpdir.name) / 'sim.json'
        (res, _, err) = call_mut(self.mut_func, self.mut,
                                 ['--design', str(self.design), '--threads', '1', '-o', str(out)])
        self.assertEqual(res, 0, err)
        doc = json.loads(out.read_text(encoding='utf-8'))
        self.assertEqual(doc['command'], 'simulate')
        self.assertEqual(doc['design']['n'], 80)
        self.assertEqual(doc['truth'], 1.0)
        frame = pd.read_csv(f'{out}.reps.csv')
        self.assertEqual(set(frame['rep']), {0})
        self.assertIn('misspecified', frame.columns)

    def test_design_and_preset(self):
        """Test --design and --preset together."""
        (res, _, err) = call_mut(self.mut_func, self.mut, ['--design', str(self.design), '--preset', 'indep-30'])
        self.assertEqual(res, 1)
        self.assertIn('either --design or --preset', err)

    def test_unknown_preset(self):
        """Test a preset that does not exist."""
        (res, _, err) = call_mut(self.mut_func, self.mut, ['--preset', 'indep-99'])
        self.assertEqual(res, 1)
        self.assertIn('unknown preset', err)


class TestOracle(unittest.TestCase):
    """Test the oracle command."""

    def setUp(self):
        self.mut = 'censbounds-oracle'
        self.mut_func = import_mut('oraclebounds')
        self.tmpdir = tempfile.TemporaryDirectory()
        self.design = _write_lines(Path(self.tmpdir.name) / 'tiny.cfg', TINY_DESIGN)

    def tearDown(self):
        self.tmpdir.cleanup()

    def test_coarse_oracle(self):
        """Test a coarse single-draw oracle brackets beta_1 = 1."""
        args = ['--design', str(self.design), '--n-mc', '2000', '--error', '0.5', '--draws', '1',
                '--box', '3', '--threads', '2']
        (res, out, err) = call_mut(self.mut_func, self.mut, args)
        self.assertEqual(res, 0, err)
        doc = json.loads(out)
        self.assertEqual(doc['command'], 'oracle')
        (lo, hi) = doc['result']['coefficient']['bounds']
        self.assertLessEqual(lo, 1.0)
        self.assertGreaterEqual(hi, 1.0)

    def test_errors(self):
        """Test a bad coefficient, an unknown preset and conflicting designs."""
        for args in (['--design', str(self.design), '--coef', '5'], ['--preset', 'nope'],
                     ['--design', str(self.design), '--preset', 'indep-30']):
            (res, _, err) = call_mut(self.mut_func, self.mut, args)
            self.assertEqual(res, 1, msg=str(args))
            self.assertIn('Error:', err)


class TestDispatch(unittest.TestCase):
    """Test the single censbounds entry point."""

    def test_no_command(self):
        """Test no arguments prints the usage and fails."""
        (res, out, err) = call_mut(cli.main, 'censbounds', [])
        self.assertEqual(res, 1)
        self.assertIn('usage:', err)
        self.assertEqual(out, '')

    def test_help_and_version(self):
        """Test help and --version."""
        (res, out, _) = call_mut(cli.main, 'censbounds', ['help'])
        self.assertEqual(res, 0)
        self.assertIn('estimate|combine|simulate|oracle', out)
        (res, out, _) = call_mut(cli.main, 'censbounds', ['--version'])
        self.assertEqual(res, 0)
        self.assertTrue(out.startswith('censbounds '))

    def test_unknown_command(self):
        """Test a command that does not exist."""
        (res, _, err) = call_mut(cli.main, 'censbounds', ['bootstrap'])
        self.assertEqual(res, 1)
        self.assertIn('Unknown command: bootstrap', err)

    def test_forwards_arguments(self):
        """Test the remaining arguments reach the command."""
        (res, _, err) = call_mut(cli.main, 'censbounds', ['estimate', '--frobnicate'])
        self.assertEqual(res, 1)
        self.assertIn('Option paring error', err)


# vim: sw=4 ts=4 et si:
