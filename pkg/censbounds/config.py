# vim: sw=4 ts=4 et si:
"""
Run configuration: defaults, config files, environment, then flags
"""

import configparser
import json
import logging
import os
import site
from pathlib import Path

from censbounds import InvalidArgumentException
from censbounds.instruments import FamilySpec, parse_family_spec
from censbounds.oracle import OracleConfig
from censbounds.subvector import OptimizerConfig, TestConfig
from censbounds.workers import default_threads

log = logging.getLogger(__name__)

CONFIG_SEARCH_PATH = ['/etc/censbounds.cfg',
                      f'{site.USER_BASE}/etc/censbounds.cfg',
                      os.path.expanduser('~/.censbounds.cfg'),
                      './censbounds.cfg']


def _boolean(text):
    value = str(text).strip().lower()
    if value in ('1', 'yes', 'true', 'on'):
        return True
    if value in ('0', 'no', 'false', 'off'):
        return False
    raise ValueError(f'not a boolean: {text!r}')


def _optional(kind):
    def convert(text):
        if text is None or str(text).strip().lower() in ('', 'none', 'auto'):
            return None
        return kind(text)
    return convert


# section -> option -> (converter, default)
DEFAULTS = {
    'test': {'alpha': (float, 0.05), 'n_boot': (int, 600), 'seed': (int, 0),
             'variance_floor': (float, 1e-6), 'gms_large': (float, 1e10),
             'lambda_n': (_optional(float), None), 'multistarts': (int, 10),
             'max_evals': (int, 500), 'tolerance': (float, 1e-8), 'optimizer': (str, 'COBYQA')},
    'search': {'n_init': (int, 100), 'mode': (str, 'auto'), 'root_finder': (str, 'binary'),
               'tol': (_optional(float), None), 'grid_step': (_optional(float), None), 'box': (float, 10.0)},
    'family': {'spec': (str, ''), 'spline_count': (int, 5), 'box_smoothing': (float, 0.1),
               'min_activation': (int, 1), 'prune': (_boolean, True), 'normalizer': (str, 'pca'),
               'combine': (str, 'tensor')},
    'run': {'threads': (int, 1), 'trace': (_boolean, False)},
    'oracle': {'n_mc': (int, 50000), 'error': (float, 0.05), 'draws': (int, 5),
               'initial_points': (int, 21), 'slack': (float, 3.0)},
    }


class Config:
    def __init__(self, config_file=None, search_path=None):
        # Set some sane defaults
        self.values = {section: {opt: default for (opt, (_, default)) in options.items()}
                       for (section, options) in DEFAULTS.items()}
        self.values['run']['threads'] = default_threads()
        self.files_read = []

        self.read_configs(CONFIG_SEARCH_PATH if search_path is None else search_path)
        if config_file:
            if not Path(config_file).is_file():
                raise InvalidArgumentException(f'config file not found: {config_file}')
            self.read_file(config_file)
        self.apply_environment()

    def read_configs(self, paths):
        for path in paths:
            if Path(path).is_file():
                self.read_file(path)

    def read_file(self, path):
        """Read one configparser or JSON file; unknown options are errors."""
        try:
            text = Path(path).read_text(encoding='utf-8')
        except OSError as e:
            raise InvalidArgumentException(f'cannot read config {path}: {e.strerror}') from None
        if str(path).endswith('.json') or text.lstrip().startswith('{'):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as e:
                raise InvalidArgumentException(f'config {path}: {e}') from None
        else:
            parser = configparser.ConfigParser()
            try:
                parser.read_string(text, source=str(path))
            except configparser.Error as e:
                raise InvalidArgumentException(f'config {path}: {e}') from None
            data = {section: dict(parser.items(section)) for section in parser.sections()}
        for (section, options) in data.items():
            self.update(section, options, source=str(path))
        self.files_read.append(str(path))
        log.debug('read config %s', path)

    def update(self, section, options, source='flags'):
        """Set options of a section; None values are skipped."""
        if section not in DEFAULTS:
            raise InvalidArgumentException(f'{source}: unknown config section [{section}]')
        for (opt, value) in options.items():
            if value is None:
                continue
            if opt not in DEFAULTS[section]:
                raise InvalidArgumentException(f'{source}: unknown option {opt!r} in [{section}]')
            convert = DEFAULTS[section][opt][0]
            try:
                self.values[section][opt] = convert(value) if isinstance(value, str) else value
            except ValueError as e:
                raise InvalidArgumentException(f'{source}: bad value for {section}.{opt}: {e}') from None

    def apply_environment(self):
        for (env, section, opt) in (('CENSBOUNDS_THREADS', 'run', 'threads'), ('CENSBOUNDS_SEED', 'test', 'seed')):
            value = os.getenv(env)
            if value:
                self.update(section, {opt: value}, source=env)

    def get(self, section, option):
        return self.values[section][option]

    @property
    def threads(self):
        return max(1, self.values['run']['threads'])

    def test_config(self):
        t = self.values['test']
        optimizer = OptimizerConfig(method=t['optimizer'], multistarts=t['multistarts'],
                                    max_evals=t['max_evals'], tolerance=t['tolerance'])
        return TestConfig(alpha=t['alpha'], n_boot=t['n_boot'], seed=t['seed'], gms_large=t['gms_large'],
                          lambda_n=t['lambda_n'], optimizer=optimizer, threads=self.threads,
                          trace=self.values['run']['trace'])

    def family_spec(self):
        f = self.values['family']
        base = FamilySpec(combine=f['combine'], normalizer=f['normalizer'], spline_count=f['spline_count'],
                          box_smoothing=f['box_smoothing'], min_activation=f['min_activation'], prune=f['prune'])
        return parse_family_spec(f['spec'], base=base)

    def oracle_config(self, box=None):
        o = self.values['oracle']
        return OracleConfig(n_mc=o['n_mc'], error=o['error'], initial_points=o['initial_points'],
                            draws=o['draws'], slack=o['slack'], box=box, threads=self.threads)

    def as_dict(self):
        return {'sections': {s: dict(opts) for (s, opts) in self.values.items()}, 'files': list(self.files_read)}


LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'


def configure_logging(debug=False):
    """Set up the root logger once per command run, on stderr."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_censbounds', False):
            root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._censbounds = True
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if debug else logging.WARNING)
