# -*- coding: utf-8 -*-
"""Language transfer: retrain fresh listeners on a recorded language.

For every (source game, seed) the recorded language is split into a training
and a held-out part.  A fresh listener learns each target game from the
training pairs only and is scored on the held-out pairs, filling one row of
the transfer matrix.

"""

from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import torch

import elexpress
from elexpress.agents import build_listener
from elexpress.games import (EpisodeBatch, GameSpec, listener_episode,
                             reconstruction_loss, referential_accuracy,
                             sample_distractors)
from elexpress.trainer import (TrainingDivergedError, has_converged,
                               train_game)

STATUS_OK = 'ok'
STATUS_FAILED = 'failed'


@dataclass(frozen=True)
class LanguageSplit:
    """Disjoint training and held-out parts of a language

    Parameters
    ----------
    train : (EmergentLanguage)
        Pairs the transfer listener may learn from
    test : (EmergentLanguage)
        Held-out pairs used only for evaluation
    seed : (int)
        Seed of the shuffle

    """
    train: object
    test: object
    seed: int

    @property
    def train_pairs(self):
        """(meaning index, Message) pairs of the training part"""
        return self.train.pairs()

    @property
    def test_pairs(self):
        """(meaning index, Message) pairs held out for evaluation"""
        return self.test.pairs()


@dataclass(frozen=True)
class TransferConfig:
    """Settings of the transfer listeners

    Parameters
    ----------
    hidden_size : (int)
        Listener hidden size (default=256)
    learning_rate : (float)
        Adam learning rate (default=1e-4)
    betas : (tuple)
        Adam beta1 and beta2 (default=(0.9, 0.999))
    adam_eps : (float)
        Adam epsilon (default=1e-8)
    max_epochs : (int)
        Epoch budget of one transfer listener (default=1000)
    convergence_window : (int)
        Moving-average window (default=20)
    convergence_patience : (int)
        Epochs without improvement before stopping (default=50)
    convergence_tolerance : (float)
        Improvement threshold (default=1e-3)
    convergence_margin : (float)
        Distance above the chance score of the training game a plateau
        needs to stop training (default=0.05)
    eval_seed : (int)
        Seed of the evaluation distractor draws (default=0)

    """
    hidden_size: int = 256
    learning_rate: float = 1.0e-4
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1.0e-8
    max_epochs: int = 1000
    convergence_window: int = 20
    convergence_patience: int = 50
    convergence_tolerance: float = 1.0e-3
    convergence_margin: float = 0.05
    eval_seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError('max_epochs must be at least 1, got {:}'.format(
                self.max_epochs))
        if not self.learning_rate > 0:
            raise ValueError('learning_rate must be positive, got {:}'.format(
                self.learning_rate))
        if not 0 <= self.convergence_margin < 1:
            raise ValueError('convergence_margin must lie in [0, 1), got '
                             '{:}'.format(self.convergence_margin))


@dataclass(frozen=True)
class TransferCell:
    """One entry of the transfer matrix"""
    value: float
    metric: str
    status: str = STATUS_OK

    @property
    def failed(self):
        return self.status != STATUS_OK


@dataclass
class TransferMatrix:
    """Generalisation performance keyed by (source, target, seed)

    Parameters
    ----------
    entries : (OrderedDict)
        TransferCell values keyed by (source id, target id, seed)

    """
    entries: OrderedDict = field(default_factory=OrderedDict)

    def add(self, source, target, seed, cell):
        self.entries[(source, target, int(seed))] = cell

    def _unique(self, pos):
        return list(OrderedDict.fromkeys(key[pos] for key in self.entries))

    @property
    def sources(self):
        return self._unique(0)

    @property
    def targets(self):
        return self._unique(1)

    @property
    def seeds(self):
        return self._unique(2)

    def values(self, source, target):
        """Per-seed values of one cell group, failed seeds excluded"""
        return np.array([cell.value for (ss, tt, _), cell
                         in self.entries.items()
                         if ss == source and tt == target and not cell.failed],
                        dtype=float)

    def metric(self, target):
        """Metric kind reported for a target"""
        for (_, tt, _), cell in self.entries.items():
            if tt == target:
                return cell.metric
        raise KeyError(target)

    def failed_cells(self):
        return [key for key, cell in self.entries.items() if cell.failed]

    def missing(self, sources, targets, seeds):
        """Expected (source, target, seed) keys that have no entry"""
        return [(ss, tt, int(kk)) for ss in sources for tt in targets
                for kk in seeds if (ss, tt, int(kk)) not in self.entries]

    def aggregate(self):
        """Mean, sample standard deviation and seed count per cell group

        Returns
        -------
        summary : (OrderedDict)
            (mean, std, n) keyed by (source, target); std uses ddof=1 and
            is NaN for fewer than two seeds

        """
        summary = OrderedDict()
        for source in self.sources:
            for target in self.targets:
                vals = self.values(source, target)
                mean = float(np.mean(vals)) if vals.size else np.nan
                std = float(np.std(vals, ddof=1)) if vals.size > 1 else np.nan
                summary[(source, target)] = (mean, std, vals.size)
        return summary


def split_language(lang, seed):
    """Shuffle a language and split it into training and held-out parts

    Parameters
    ----------
    lang : (EmergentLanguage)
        Total language
    seed : (int)
        Seed of the shuffle

    Returns
    -------
    split : (LanguageSplit)
        The first floor(train_fraction * |L|) shuffled pairs train

    Raises
    ------
    ValueError if the language has fewer than 10 pairs

    """
    if len(lang) < 10:
        raise ValueError('cannot split a language of {:d} pairs'.format(
            len(lang)))

    order = np.random.default_rng(seed).permutation(len(lang))
    n_train = int(np.floor(round(elexpress.train_fraction * len(lang), 6)))

    return LanguageSplit(lang.subset(order[:n_train]),
                         lang.subset(order[n_train:]), seed)


def _transfer_game(target, n_train):
    """Game a transfer listener is trained on"""
    if target.kind == 'reconstruction':
        return target
    return GameSpec('referential',
                    candidate_count=min(target.candidate_count, n_train),
                    loss_variant='contrastive')


def _listener_seed(seed):
    return int(np.random.SeedSequence([int(seed), 1]).generate_state(1)[0])


def train_transfer_listener(split, target, config, space, on_batch=None):
    """Train a fresh listener on the training part of a language

    Parameters
    ----------
    split : (LanguageSplit)
        Split language
    target : (GameSpec)
        Target game
    config : (TransferConfig)
        Listener settings
    space : (InputSpace)
        Input space of the language
    on_batch : (callable or NoneType)
        Called with the meaning indices of every batch used for a parameter
        update (default=None)

    Returns
    -------
    listener : (Listener)
        Trained listener

    Raises
    ------
    TrainingDivergedError if the loss becomes non-finite

    Notes
    -----
    Referential targets train with the contrastive loss and |B| = |D| capped
    at the size of the training part.  The listener is seeded independently
    of the source run.

    """
    train = split.train
    game = _transfer_game(target, len(train))
    generator = torch.Generator()
    generator.manual_seed(_listener_seed(split.seed))
    listener = build_listener(space.spec.flat_size, config.hidden_size,
                              train.channel, game.kind, generator)
    optimizer = torch.optim.Adam(listener.parameters(),
                                 lr=config.learning_rate,
                                 betas=tuple(config.betas),
                                 eps=config.adam_eps)

    rng = np.random.default_rng(_listener_seed(split.seed) + 1)
    messages = torch.as_tensor(train.messages)
    floor = game.chance_score(space.spec.n_values) + \
        config.convergence_margin
    scores = list()

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train))
        if game.kind == 'referential':
            n_full = len(train) // game.batch_size
            chunks = [order[ii * game.batch_size:(ii + 1) * game.batch_size]
                      for ii in range(n_full)]
        else:
            chunks = [order[start:start + game.batch_size]
                      for start in range(0, len(train), game.batch_size)]

        total_score, total_n = 0.0, 0
        for rows in chunks:
            meanings = train.meanings[rows]
            result = listener_episode(listener, game, space,
                                      EpisodeBatch(meanings),
                                      messages[torch.as_tensor(rows)])
            if not torch.isfinite(result.loss):
                estr = 'transfer to {:s} diverged in epoch {:d}'.format(
                    target.name, epoch)
                elexpress.logger.error(estr)
                raise TrainingDivergedError(epoch, [], estr)

            if on_batch is not None:
                on_batch(meanings)
            optimizer.zero_grad()
            result.loss.backward()
            optimizer.step()

            total_score += result.score * len(rows)
            total_n += len(rows)

        scores.append(total_score / total_n)
        if has_converged(scores, config.convergence_window,
                         config.convergence_patience,
                         config.convergence_tolerance, floor):
            break

    elexpress.logger.info('transfer listener for {:s} stopped after {:d} '
                          'epochs, training score {:.4f}'.format(
                              target.name, len(scores), scores[-1]))
    return listener


def evaluate_generalisation(listener, split, target, space, seed=0):
    """Score a transfer listener on the held-out pairs

    Parameters
    ----------
    listener : (Listener)
        Trained listener
    split : (LanguageSplit)
        Split language
    target : (GameSpec)
        Target game
    space : (InputSpace)
        Input space, referential distractors come from all of it
    seed : (int)
        Seed of the distractor draws (default=0)

    Returns
    -------
    performance : (float)
        Accuracy for referential targets, mean 1 - BCE for reconstruction

    """
    test = split.test
    dtype = listener.token_embedding.weight.dtype
    flat = torch.as_tensor(space.flat, dtype=dtype)

    with torch.no_grad():
        h_m = listener.encode(torch.as_tensor(test.messages))

        if target.kind == 'reconstruction':
            loss = reconstruction_loss(flat[test.meanings],
                                       listener.generator(h_m))
            return 1.0 - float(loss)

        target.validate(len(space))
        rng = np.random.default_rng(seed)
        candidates, positions = sample_distractors(
            test.meanings, target.candidate_count, len(space), rng)
        encoded = listener.candidate_encoder(flat)
        scores = (h_m @ encoded.transpose(0, 1)).numpy()

    return referential_accuracy(np.take_along_axis(scores, candidates, axis=1),
                                positions)


def _failed_row(source, targets, seed):
    return [(source, target.name, seed,
             TransferCell(np.nan, target.metric, STATUS_FAILED))
            for target in targets]


def _transfer_job(source, seed, targets, space, train_config,
                  transfer_config, lang):
    """Fill the matrix row of one (source, seed) pair"""
    if lang is None:
        if train_config is None:
            elexpress.logger.warning('no language for {:s} seed {:d}'.format(
                source.name, seed))
            return _failed_row(source.name, targets, seed)
        try:
            lang = train_game(replace(train_config, game=source, seed=seed),
                              space).language
        except (TrainingDivergedError, ValueError, RuntimeError) as err:
            elexpress.logger.warning('source {:s} seed {:d} failed: '
                                     '{:}'.format(source.name, seed, err))
            return _failed_row(source.name, targets, seed)

    try:
        split = split_language(lang, seed)
    except ValueError as err:
        elexpress.logger.warning('language of {:s} seed {:d} cannot be '
                                 'split: {:}'.format(source.name, seed, err))
        return _failed_row(source.name, targets, seed)

    row = list()
    for target in targets:
        try:
            listener = train_transfer_listener(split, target, transfer_config,
                                               space)
            value = evaluate_generalisation(listener, split, target, space,
                                            transfer_config.eval_seed)
            cell = TransferCell(value, target.metric)
        except (TrainingDivergedError, ValueError, RuntimeError) as err:
            elexpress.logger.warning(''.join([
                'transfer {:s} -> {:s} seed {:d} '.format(source.name,
                                                          target.name, seed),
                'failed: {:}'.format(err)]))
            cell = TransferCell(np.nan, target.metric, STATUS_FAILED)
        row.append((source.name, target.name, seed, cell))

    return row


def run_transfer_experiment(sources, targets, seeds, space, train_config=None,
                            transfer_config=None, languages=None, workers=1):
    """Fill the transfer matrix for every source, target and seed

    Parameters
    ----------
    sources : (list)
        Source GameSpecs
    targets : (list)
        Target GameSpecs
    seeds : (list)
        Seeds; each seeds the source run and the language split
    space : (InputSpace)
        Shared input space
    train_config : (TrainRunConfig or NoneType)
        Template for source runs whose language is not supplied; its game
        and seed are replaced per job (default=None)
    transfer_config : (TransferConfig or NoneType)
        Listener settings, None for defaults (default=None)
    languages : (dict or NoneType)
        Recorded languages keyed by (source id, seed) (default=None)
    workers : (int)
        Number of processes; jobs are (source, seed) pairs (default=1)

    Returns
    -------
    matrix : (TransferMatrix)
        Every (source, target, seed) cell, failed ones marked with NaN

    """
    if transfer_config is None:
        transfer_config = TransferConfig()
    if languages is None:
        languages = dict()

    jobs = [(source, int(seed), list(targets), space, train_config,
             transfer_config, languages.get((source.name, int(seed))))
            for source in sources for seed in seeds]

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_transfer_job, *zip(*jobs)))
    else:
        rows = [_transfer_job(*job) for job in jobs]

    matrix = TransferMatrix()
    for row in rows:
        for source, target, seed, cell in row:
            matrix.add(source, target, seed, cell)

    failed = matrix.failed_cells()
    if len(failed) > 0:
        elexpress.logger.warning('{:d} transfer cells failed'.format(
            len(failed)))

    return matrix


_MATRIX_COLUMNS = ['source', 'target', 'seed', 'metric', 'status', 'value']


def save_matrix(matrix, fname):
    """Write one row per (source, target, seed) cell"""
    rows = [[source, target, str(seed), cell.metric, cell.status,
             '{:.17g}'.format(cell.value)]
            for (source, target, seed), cell in matrix.entries.items()]
    table = np.array(rows, dtype=str).reshape(-1, len(_MATRIX_COLUMNS))
    np.savetxt(fname, table, fmt='%s', header=' '.join(_MATRIX_COLUMNS))


def load_matrix(fname):
    """Read a matrix written by save_matrix"""
    table = np.loadtxt(fname, dtype=str, ndmin=2)
    matrix = TransferMatrix()
    if table.size == 0:
        return matrix

    for source, target, seed, metric, status, value in table:
        matrix.add(source, target, int(seed),
                   TransferCell(float(value), metric, status))

    return matrix


def save_matrix_summary(matrix, fname):
    """Write mean and standard deviation per cell, sources as rows

    Notes
    -----
    Columns are the source id followed by '<target>_mean <target>_std' for
    every target.

    """
    summary = matrix.aggregate()
    targets = matrix.targets
    names = ['source'] + ['{:s}_{:s}'.format(tt, stat) for tt in targets
                          for stat in ('mean', 'std')]
    rows = list()
    for source in matrix.sources:
        row = [source]
        for target in targets:
            mean, std, _ = summary[(source, target)]
            row.extend(['{:.6g}'.format(mean), '{:.6g}'.format(std)])
        rows.append(row)

    table = np.array(rows, dtype=str).reshape(-1, len(names))
    np.savetxt(fname, table, fmt='%s', header=' '.join(names))
