# -*- coding: utf-8 -*-
"""Source-game training runs, recorded languages and run diagnostics.

A run trains a fresh speaker/listener pair on one game over the whole input
space, then greedy-decodes every meaning to record the emergent language.

"""

from collections import namedtuple
from dataclasses import dataclass, field
import os

import numpy as np
import torch

import elexpress
from elexpress.agents import (ChannelSpec, Message, build_agents,
                              save_checkpoint)
from elexpress.analysis import paper_mutual_information
from elexpress.games import GameSpec, listener_episode, make_episode_batch
from elexpress.meaning import AttributeSpec

TrainResult = namedtuple('TrainResult', ['speaker', 'listener', 'language',
                                         'diagnostics', 'initial_language'])

_DIAG_COLUMNS = ['epoch', 'loss', 'score', 'message_types',
                 'mutual_information']


class TrainingDivergedError(RuntimeError):
    """Raised when a training loss stops being finite

    Parameters
    ----------
    epoch : (int)
        Epoch during which the loss diverged
    diagnostics : (list)
        EpochDiagnostics of the epochs completed before divergence

    """

    def __init__(self, epoch, diagnostics, message=None):
        self.epoch = epoch
        self.diagnostics = list(diagnostics)
        if message is None:
            message = 'training loss became non-finite in epoch {:d}'.format(
                epoch)
        super().__init__(message)


@dataclass(frozen=True)
class TrainRunConfig:
    """Settings of one training run

    Parameters
    ----------
    game : (GameSpec)
        Game to train on
    channel : (ChannelSpec)
        Channel capacity and temperature
    hidden_size : (int)
        Agent hidden size (default=256)
    learning_rate : (float)
        Adam learning rate (default=1e-4)
    betas : (tuple)
        Adam beta1 and beta2 (default=(0.9, 0.999))
    adam_eps : (float)
        Adam epsilon (default=1e-8)
    max_epochs : (int)
        Epoch budget (default=1000)
    convergence_window : (int)
        Moving-average window over the epoch scores (default=20)
    convergence_patience : (int)
        Consecutive epochs without improvement before stopping (default=50)
    convergence_tolerance : (float)
        Smallest moving-average improvement that counts (default=1e-3)
    convergence_margin : (float)
        A plateau must lie this far above the chance score of the game to
        count as convergence (default=0.05)
    seed : (int)
        Seed of the run (default=0)

    """
    game: GameSpec
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    hidden_size: int = 256
    learning_rate: float = 1.0e-4
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1.0e-8
    max_epochs: int = 1000
    convergence_window: int = 20
    convergence_patience: int = 50
    convergence_tolerance: float = 1.0e-3
    convergence_margin: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError('learning_rate must be positive, got {:}'.format(
                self.learning_rate))
        if self.max_epochs < 1:
            raise ValueError('max_epochs must be at least 1, got {:}'.format(
                self.max_epochs))
        if self.hidden_size < 1:
            raise ValueError('hidden_size must be positive, got {:}'.format(
                self.hidden_size))
        if self.convergence_window < 1 or self.convergence_patience < 1:
            raise ValueError('convergence window and patience must be '
                             'positive')
        if not 0 <= self.convergence_margin < 1:
            raise ValueError('convergence_margin must lie in [0, 1), got '
                             '{:}'.format(self.convergence_margin))


@dataclass
class EmergentLanguage:
    """Total mapping from meanings to messages

    Parameters
    ----------
    meanings : (np.ndarray)
        Canonical meaning indices, one per row
    messages : (np.ndarray)
        Integer tokens of shape (len(meanings), message_length)
    channel : (ChannelSpec)
        Channel the messages were written on
    attribute_spec : (AttributeSpec)
        Shape of the input space
    game : (str)
        Id of the game the language emerged from (default='')
    seed : (int)
        Seed of the source run (default=-1)
    epoch : (int)
        Epoch at which the language was recorded (default=-1)

    """
    meanings: np.ndarray
    messages: np.ndarray
    channel: ChannelSpec
    attribute_spec: AttributeSpec
    game: str = ''
    seed: int = -1
    epoch: int = -1

    def __post_init__(self):
        self.meanings = np.asarray(self.meanings, dtype=np.int64)
        self.messages = np.asarray(self.messages, dtype=np.int64)
        if self.messages.ndim != 2 or \
           self.messages.shape[0] != self.meanings.shape[0]:
            raise ValueError('need one message per meaning')

    def __len__(self):
        return self.meanings.shape[0]

    def pairs(self):
        """List of (meaning index, Message) tuples"""
        return [(int(mm), Message(tuple(int(tt) for tt in msg)))
                for mm, msg in zip(self.meanings, self.messages)]

    def subset(self, rows):
        """Language restricted to the given row positions"""
        return EmergentLanguage(self.meanings[rows], self.messages[rows],
                                self.channel, self.attribute_spec, self.game,
                                self.seed, self.epoch)


@dataclass(frozen=True)
class EpochDiagnostics:
    """Training statistics of one epoch"""
    epoch: int
    loss: float
    score: float
    message_types: int
    mutual_information: float


def record_language(speaker, space, game='', seed=-1, epoch=-1,
                    batch_size=1024):
    """Greedy-decode every meaning of a space

    Parameters
    ----------
    speaker : (Speaker)
        Trained or untrained speaker
    space : (InputSpace)
        Meanings to describe
    game : (str)
        Id of the source game (default='')
    seed : (int)
        Seed of the source run (default=-1)
    epoch : (int)
        Epoch being recorded (default=-1)
    batch_size : (int)
        Meanings decoded per forward pass (default=1024)

    Returns
    -------
    lang : (EmergentLanguage)
        One message per meaning, in canonical order

    """
    dtype = speaker.token_embedding.weight.dtype
    flat = torch.as_tensor(space.flat, dtype=dtype)
    tokens = []
    with torch.no_grad():
        for start in range(0, len(space), batch_size):
            out = speaker(flat[start:start + batch_size], mode='greedy')
            tokens.append(out.tokens.cpu().numpy())

    messages = np.concatenate(tokens, axis=0) if tokens else \
        np.zeros(shape=(0, speaker.channel.message_length), dtype=np.int64)

    return EmergentLanguage(np.arange(len(space)), messages, speaker.channel,
                            space.spec, game, seed, epoch)


def count_message_types(lang):
    """Number of distinct messages in a language"""
    if len(lang) == 0:
        return 0
    return int(np.unique(lang.messages, axis=0).shape[0])


def has_converged(scores, window=20, patience=50, tolerance=1.0e-3,
                  floor=-np.inf):
    """Test the stopping rule on a history of epoch scores

    Parameters
    ----------
    scores : (array-like)
        Training accuracy or score of every completed epoch
    window : (int)
        Moving-average window (default=20)
    patience : (int)
        Number of most recent moving-average steps that must all improve by
        less than the tolerance (default=50)
    tolerance : (float)
        Improvement threshold (default=1e-3)
    floor : (float)
        A plateau at or below this moving average is not convergence
        (default=-inf)

    Returns
    -------
    converged : (bool)
        False until window + patience epochs are available

    """
    scores = np.asarray(scores, dtype=float)
    if scores.shape[0] < window + patience:
        return False

    moving = np.convolve(scores, np.ones(window) / window, mode='valid')
    if not moving[-1] > floor:
        return False
    return bool(np.all(np.diff(moving)[-patience:] < tolerance))


def _epoch_batches(order, game):
    if game.kind == 'referential' and game.loss_variant == 'contrastive':
        n_full = order.shape[0] // game.batch_size
        return [order[ii * game.batch_size:(ii + 1) * game.batch_size]
                for ii in range(n_full)]
    return [order[start:start + game.batch_size]
            for start in range(0, order.shape[0], game.batch_size)]


def _diverged(game, seed, epoch, diagnostics):
    estr = ''.join(['{:s} seed {:d}: '.format(game.name, seed),
                    'loss became non-finite in epoch {:d}'.format(epoch)])
    elexpress.logger.error(estr)
    raise TrainingDivergedError(epoch, diagnostics, estr)


def train_game(config, space, on_epoch=None):
    """Train a speaker/listener pair on a game until convergence

    Parameters
    ----------
    config : (TrainRunConfig)
        Run settings
    space : (InputSpace)
        Input space, every meaning is visited once per epoch
    on_epoch : (callable or NoneType)
        Called with each EpochDiagnostics as it is produced (default=None)

    Returns
    -------
    result : (TrainResult)
        speaker, listener, the language recorded after the last epoch, the
        list of EpochDiagnostics and the language recorded before training

    Raises
    ------
    ValueError if the game does not fit the space
    TrainingDivergedError if the loss becomes non-finite

    Notes
    -----
    Training stops at max_epochs or once has_converged holds with the floor
    set convergence_margin above the chance score of the game.

    """
    game = config.game
    game.validate(len(space))

    speaker, listener, generator = build_agents(
        space.spec.flat_size, config.hidden_size, config.channel, game.kind,
        config.seed)
    rng = np.random.default_rng(config.seed)
    params = list(speaker.parameters()) + list(listener.parameters())
    optimizer = torch.optim.Adam(params, lr=config.learning_rate,
                                 betas=tuple(config.betas),
                                 eps=config.adam_eps)

    flat = torch.as_tensor(space.flat)
    floor = game.chance_score(space.spec.n_values) + \
        config.convergence_margin
    initial = record_language(speaker, space, game.name, config.seed, 0)
    lang = initial
    diagnostics = list()

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(space))
        total_loss, total_score, total_n = 0.0, 0.0, 0

        for chunk in _epoch_batches(order, game):
            batch = make_episode_batch(game, chunk, len(space), rng)
            out = speaker(flat[chunk], mode='train', generator=generator)
            result = listener_episode(listener, game, space, batch,
                                      out.onehots)

            if not torch.isfinite(result.loss):
                _diverged(game, config.seed, epoch, diagnostics)

            optimizer.zero_grad()
            result.loss.backward()
            optimizer.step()
            if not all(bool(torch.isfinite(pp).all()) for pp in params):
                _diverged(game, config.seed, epoch, diagnostics)

            total_loss += float(result.loss.detach()) * len(chunk)
            total_score += result.score * len(chunk)
            total_n += len(chunk)

        lang = record_language(speaker, space, game.name, config.seed, epoch)
        diag = EpochDiagnostics(epoch, total_loss / total_n,
                                total_score / total_n,
                                count_message_types(lang),
                                paper_mutual_information(lang))
        diagnostics.append(diag)
        elexpress.logger.info(
            '{:s} seed {:d} epoch {:d}: loss {:.4f} score {:.4f} '
            'types {:d}'.format(game.name, config.seed, epoch, diag.loss,
                                diag.score, diag.message_types))
        if on_epoch is not None:
            on_epoch(diag)

        if has_converged([dd.score for dd in diagnostics],
                         config.convergence_window,
                         config.convergence_patience,
                         config.convergence_tolerance, floor):
            elexpress.logger.info('{:s} seed {:d} converged after {:d} '
                                  'epochs'.format(game.name, config.seed,
                                                  epoch))
            break

    return TrainResult(speaker, listener, lang, diagnostics, initial)


def save_language(lang, fname):
    """Write a language, one meaning per row

    Notes
    -----
    Header lines carry game, attribute spec, channel, seed and epoch as
    'key: value'.  Columns are the canonical index, the attribute values and
    the message tokens.

    """
    spec = lang.attribute_spec
    powers = spec.n_values ** np.arange(spec.n_attributes - 1, -1, -1)
    attributes = (lang.meanings[:, np.newaxis] // powers) % spec.n_values
    table = np.column_stack((lang.meanings, attributes, lang.messages))

    names = ['index'] + ['attr_{:d}'.format(ii)
                         for ii in range(spec.n_attributes)] + \
        ['tok_{:d}'.format(ii) for ii in range(lang.channel.message_length)]
    header = '\n'.join([
        'game: {:s}'.format(lang.game),
        'attributes: n_attributes={:d} n_values={:d}'.format(
            spec.n_attributes, spec.n_values),
        'channel: message_length={:d} vocab_size={:d} temperature={:s}'.format(
            lang.channel.message_length, lang.channel.vocab_size,
            repr(float(lang.channel.temperature))),
        'seed: {:d}'.format(int(lang.seed)),
        'epoch: {:d}'.format(int(lang.epoch)),
        ' '.join(names)])
    np.savetxt(fname, table, fmt='%d', header=header)


def _read_header(fname):
    meta = dict()
    with open(fname, 'r') as fin:
        for line in fin:
            if not line.startswith('#'):
                break
            key, sep, value = line.lstrip('#').strip().partition(': ')
            if sep:
                meta[key] = value
    return meta


def _keyvals(value):
    return dict(item.split('=') for item in value.split())


def load_language(fname):
    """Read a language written by save_language

    Raises
    ------
    ValueError if the header is incomplete

    """
    meta = _read_header(fname)
    missing = [key for key in ('game', 'attributes', 'channel', 'seed',
                               'epoch') if key not in meta]
    if len(missing) > 0:
        raise ValueError('language file {:} lacks header keys {:}'.format(
            fname, missing))

    attrs = _keyvals(meta['attributes'])
    spec = AttributeSpec(int(attrs['n_attributes']), int(attrs['n_values']))
    chan = _keyvals(meta['channel'])
    channel = ChannelSpec(int(chan['message_length']),
                          int(chan['vocab_size']), float(chan['temperature']))

    table = np.loadtxt(fname, dtype=np.int64, ndmin=2)
    width = 1 + spec.n_attributes + channel.message_length
    if table.size == 0:
        table = np.zeros(shape=(0, width), dtype=np.int64)
    if table.shape[1] != width:
        raise ValueError('language file {:} has {:d} columns, expected '
                         '{:d}'.format(fname, table.shape[1], width))

    return EmergentLanguage(table[:, 0], table[:, 1 + spec.n_attributes:],
                            channel, spec, meta['game'], int(meta['seed']),
                            int(meta['epoch']))


def save_diagnostics(diagnostics, fname):
    """Write one row of EpochDiagnostics per epoch"""
    table = np.array([[dd.epoch, dd.loss, dd.score, dd.message_types,
                       dd.mutual_information] for dd in diagnostics],
                     dtype=float).reshape(-1, len(_DIAG_COLUMNS))
    np.savetxt(fname, table, fmt=['%d', '%.17g', '%.17g', '%d', '%.17g'],
               header=' '.join(_DIAG_COLUMNS))


def load_diagnostics(fname):
    """Read diagnostics written by save_diagnostics"""
    table = np.loadtxt(fname, dtype=float, ndmin=2)
    if table.size == 0:
        return list()

    return [EpochDiagnostics(int(row[0]), float(row[1]), float(row[2]),
                             int(row[3]), float(row[4])) for row in table]


def save_run(result, run_dir, seed):
    """Store the checkpoint, language and diagnostics of a finished run

    Parameters
    ----------
    result : (TrainResult)
        Output of train_game
    run_dir : (str)
        Run directory, created when missing
    seed : (int)
        Seed of the run

    Returns
    -------
    paths : (dict)
        Filenames keyed by 'checkpoint', 'language', 'initial_language' and
        'diagnostics'

    """
    os.makedirs(run_dir, exist_ok=True)
    paths = {'checkpoint': os.path.join(run_dir, 'checkpoint.pt'),
             'language': os.path.join(run_dir, 'language.txt'),
             'initial_language': os.path.join(run_dir,
                                              'initial_language.txt'),
             'diagnostics': os.path.join(run_dir, 'diagnostics.txt')}

    epoch = result.diagnostics[-1].epoch if result.diagnostics else None
    save_checkpoint(paths['checkpoint'], result.speaker, result.listener,
                    seed, epoch)
    save_language(result.language, paths['language'])
    save_language(result.initial_language, paths['initial_language'])
    save_diagnostics(result.diagnostics, paths['diagnostics'])

    return paths
