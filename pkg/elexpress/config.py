# -*- coding: utf-8 -*-
"""Experiment configuration: profiles, YAML files and the output layout.

A configuration file is a flat YAML mapping.  It must carry
``config_version: 1`` and may name a ``profile`` whose values the remaining
keys override.

"""

from dataclasses import asdict, dataclass, fields, replace
import hashlib
import json
import os

import yaml

import elexpress
from elexpress.agents import ChannelSpec
from elexpress.analysis import SIGNIFICANCE_TESTS
from elexpress.games import LOSS_VARIANTS, parse_game_id
from elexpress.meaning import AttributeSpec, generate_input_space

CONFIG_VERSION = 1

# Fields that change where and how runs execute but not their results
RUN_CONTROL_FIELDS = ('workers', 'out_dir', 'train_missing')

# Left out of the experiment hash; each run directory is keyed by its own
# game and seed, and analysis outputs are recomputed on every call
UNHASHED_FIELDS = RUN_CONTROL_FIELDS + ('seeds', 'roster', 'alpha',
                                        'significance_test', 'top_k')


class ConfigError(ValueError):
    """Invalid configuration, with the 1-based line of the problem

    Parameters
    ----------
    message : (str)
        Description of the problem
    line : (int or NoneType)
        Line in the configuration file, None when not tied to a line
        (default=None)

    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = 'line {:d}: {:s}'.format(line, message)
        super().__init__(message)


@dataclass(frozen=True)
class ExperimentConfig:
    """Every setting of an experiment

    Notes
    -----
    Defaults reproduce the published setup: a 4 x 10 input space, messages
    of 6 tokens over 10 symbols, hidden size 256, Adam at 1e-4 and the
    nine-game roster with six seeds.

    """
    n_attributes: int = 4
    n_values: int = 10
    max_space_size: int = 1000000
    message_length: int = 6
    vocab_size: int = 10
    temperature: float = 1.0
    hidden_size: int = 256
    learning_rate: float = 1.0e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1.0e-8
    roster: tuple = ('recon', 'refer2', 'refer10', 'refer100', 'refer1000',
                     'refer2500', 'refer5000', 'refer7500', 'refer10000')
    loss_variant: str = 'contrastive'
    recon_batch_size: int = 1024
    conventional_batch_size: int = 128
    max_epochs: int = 1000
    transfer_max_epochs: int = 1000
    convergence_window: int = 20
    convergence_patience: int = 50
    convergence_tolerance: float = 1.0e-3
    convergence_margin: float = 0.05
    seeds: tuple = (0, 1, 2, 3, 4, 5)
    alpha: float = 0.05
    significance_test: str = 'welch'
    top_k: int = 10
    eval_seed: int = 0
    workers: int = 1
    out_dir: str = 'elexpress_out'
    train_missing: bool = False

    @property
    def attribute_spec(self):
        return AttributeSpec(self.n_attributes, self.n_values)

    @property
    def channel(self):
        return ChannelSpec(self.message_length, self.vocab_size,
                           self.temperature)

    def space(self):
        """Enumerate the input space"""
        return generate_input_space(self.attribute_spec, self.max_space_size)

    def game(self, game_id):
        """Resolve a game id with this configuration's batch settings"""
        return parse_game_id(game_id, self.loss_variant,
                             self.recon_batch_size,
                             self.conventional_batch_size)

    def games(self):
        """List of (game id, GameSpec) pairs in roster order"""
        return [(gid, self.game(gid)) for gid in self.roster]

    def train_config(self, game_id, seed):
        """TrainRunConfig of one source run"""
        from elexpress.trainer import TrainRunConfig

        return TrainRunConfig(
            self.game(game_id), self.channel, self.hidden_size,
            self.learning_rate, (self.beta1, self.beta2), self.adam_eps,
            self.max_epochs, self.convergence_window,
            self.convergence_patience, self.convergence_tolerance,
            self.convergence_margin, int(seed))

    def transfer_config(self):
        """TransferConfig of the transfer listeners"""
        from elexpress.transfer import TransferConfig

        return TransferConfig(
            self.hidden_size, self.learning_rate, (self.beta1, self.beta2),
            self.adam_eps, self.transfer_max_epochs, self.convergence_window,
            self.convergence_patience, self.convergence_tolerance,
            self.convergence_margin, self.eval_seed)

    def validate(self, lines=None):
        """Check the cross-field invariants

        Parameters
        ----------
        lines : (dict or NoneType)
            1-based line of every key of the source file, used to place
            errors (default=None)

        Raises
        ------
        ConfigError for distinct-seed, roster, candidate-count, space-size
        or analysis-setting violations

        """
        try:
            spec = self.attribute_spec
        except ValueError as err:
            raise ConfigError(str(err),
                              _key_line(lines, 'n_attributes', 'n_values'))
        try:
            self.channel
        except ValueError as err:
            raise ConfigError(str(err), _key_line(
                lines, 'message_length', 'vocab_size', 'temperature'))

        if spec.space_size > self.max_space_size:
            raise ConfigError('input space of {:d} meanings exceeds '
                              'max_space_size {:d}'.format(
                                  spec.space_size, self.max_space_size),
                              _key_line(lines, 'n_attributes', 'n_values',
                                        'max_space_size'))
        if len(self.seeds) == 0 or len(set(self.seeds)) != len(self.seeds):
            raise ConfigError('seeds must be a non-empty list of distinct '
                              'integers, got {:}'.format(list(self.seeds)),
                              _key_line(lines, 'seeds'))
        if len(self.roster) == 0:
            raise ConfigError('roster is empty', _key_line(lines, 'roster'))
        names = list()
        for gid in self.roster:
            try:
                game = self.game(gid)
                game.validate(spec.space_size)
            except ValueError as err:
                raise ConfigError(str(err), _key_line(lines, 'roster'))
            names.append(game.name)
        if len(set(names)) != len(names):
            raise ConfigError('roster repeats a game: {:}'.format(
                ', '.join(names)), _key_line(lines, 'roster'))

        if not 0 < self.alpha < 1:
            raise ConfigError('alpha must lie in (0, 1), got {:}'.format(
                self.alpha), _key_line(lines, 'alpha'))
        if self.significance_test not in SIGNIFICANCE_TESTS:
            raise ConfigError('unknown significance_test {:}'.format(
                self.significance_test), _key_line(lines, 'significance_test'))
        if self.loss_variant not in LOSS_VARIANTS:
            raise ConfigError('unknown loss_variant {:}'.format(
                self.loss_variant), _key_line(lines, 'loss_variant'))
        for name in ('hidden_size', 'max_epochs', 'transfer_max_epochs',
                     'convergence_window', 'convergence_patience', 'top_k',
                     'workers', 'recon_batch_size',
                     'conventional_batch_size'):
            if getattr(self, name) < 1:
                raise ConfigError('{:s} must be positive, got {:}'.format(
                    name, getattr(self, name)), _key_line(lines, name))
        if not self.learning_rate > 0:
            raise ConfigError('learning_rate must be positive',
                              _key_line(lines, 'learning_rate'))
        if not 0 <= self.convergence_margin < 1:
            raise ConfigError('convergence_margin must lie in [0, 1), got '
                              '{:}'.format(self.convergence_margin),
                              _key_line(lines, 'convergence_margin'))

        return self


# Desk games need Adam at 1e-3, at 1e-4 the contrastive ones stay at chance
_DESK = dict(n_attributes=3, n_values=10, hidden_size=64,
             roster=('recon', 'refer2', 'refer100', 'refer1000'),
             seeds=(0, 1, 2, 3), recon_batch_size=100,
             conventional_batch_size=32, learning_rate=1.0e-3,
             max_epochs=1000, transfer_max_epochs=500)

# Single refer2 run for checking that a setup learns at all
_PILOT = dict(n_attributes=2, n_values=8, hidden_size=64, roster=('refer2',),
              seeds=(0,), learning_rate=1.0e-3, max_epochs=200,
              transfer_max_epochs=200)

PROFILES = {'paper': dict(),
            'desk': _DESK,
            'pilot': _PILOT,
            'large-channel': dict(message_length=8, vocab_size=20),
            'large-agent': dict(hidden_size=128),
            'large-both': dict(message_length=8, vocab_size=20,
                               hidden_size=128)}


def profile_config(name):
    """Return the ExperimentConfig of a named profile

    Raises
    ------
    ConfigError for an unknown profile

    """
    if name not in PROFILES:
        raise ConfigError('unknown profile {:}; choose from {:}'.format(
            name, ', '.join(sorted(PROFILES))))
    return replace(ExperimentConfig(), **PROFILES[name])


def _coerce(name, value, default, line):
    """Check a YAML value against the type of the field default"""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, tuple):
        ok = isinstance(value, list)
        if ok and name == 'seeds':
            ok = all(isinstance(vv, int) and not isinstance(vv, bool)
                     for vv in value)
        elif ok:
            ok = all(isinstance(vv, str) for vv in value)
        value = tuple(value) if ok else value
    else:
        ok = isinstance(value, str)

    if not ok:
        raise ConfigError('{:s} expects {:s}, got {:}'.format(
            name, type(default).__name__, repr(value)), line)

    return value


def _key_line(lines, *keys):
    """First line among keys, else the profile line that set them"""
    if not lines:
        return None
    found = [lines[key] for key in keys if key in lines]
    if len(found) > 0:
        return min(found)
    return lines.get('profile')


def _key_lines(text):
    """1-based line of every top-level key"""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as err:
        mark = getattr(err, 'problem_mark', None)
        raise ConfigError('invalid YAML: {:}'.format(
            getattr(err, 'problem', err)),
            None if mark is None else mark.line + 1)

    if node is None or not isinstance(node, yaml.MappingNode):
        raise ConfigError('configuration must be a mapping', 1)

    return {key.value: key.start_mark.line + 1 for key, _ in node.value}


def parse_config(text, overrides=None):
    """Build an ExperimentConfig from YAML text

    Parameters
    ----------
    text : (str)
        YAML document
    overrides : (dict or NoneType)
        Field values applied after the file, e.g. from command-line flags
        (default=None)

    Returns
    -------
    config : (ExperimentConfig)
        Validated configuration

    Raises
    ------
    ConfigError with the offending line for syntax errors, a missing or
    unsupported config_version, unknown keys or mistyped values

    """
    lines = _key_lines(text)
    data = yaml.safe_load(text)

    if 'config_version' not in data:
        raise ConfigError('config_version is required', 1)
    if data['config_version'] != CONFIG_VERSION:
        raise ConfigError('unsupported config_version {:}'.format(
            data['config_version']), lines['config_version'])

    line = lines.get('profile')
    try:
        config = profile_config(data.get('profile', 'paper'))
    except ConfigError as err:
        raise ConfigError(str(err), line)

    known = {ff.name for ff in fields(ExperimentConfig)}
    values = dict()
    for key, value in data.items():
        if key in ('config_version', 'profile'):
            continue
        if key not in known:
            raise ConfigError('unknown key {:}'.format(key), lines[key])
        values[key] = _coerce(key, value, getattr(config, key), lines[key])

    if overrides:
        values.update({key: value for key, value in overrides.items()
                       if value is not None})

    config = replace(config, **values)
    config.validate(lines)
    return config


def load_config(fname, overrides=None):
    """Read and validate a configuration file, see parse_config

    Raises
    ------
    ConfigError when the file cannot be read

    """
    try:
        with open(fname, 'r') as fin:
            text = fin.read()
    except OSError as err:
        raise ConfigError('cannot read configuration {:}: {:}'.format(
            fname, err.strerror))

    config = parse_config(text, overrides)
    elexpress.logger.info('loaded configuration {:} ({:s})'.format(
        fname, config_hash(config)))
    return config


def config_hash(config):
    """Short SHA-1 of the result-affecting fields"""
    record = {key: value for key, value in asdict(config).items()
              if key not in UNHASHED_FIELDS}
    text = json.dumps(record, sort_keys=True, default=list)
    return hashlib.sha1(text.encode('utf-8')).hexdigest()[:12]


def experiment_dir(config, *parts):
    """Directory of the experiment, or of one of its parts"""
    return os.path.join(config.out_dir, config_hash(config), *parts)


def run_dir(config, game_id, seed):
    """Directory holding the artifacts of one source run"""
    return experiment_dir(config, 'runs', game_id, 'seed{:d}'.format(
        int(seed)))
