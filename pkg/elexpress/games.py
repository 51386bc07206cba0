# -*- coding: utf-8 -*-
"""Reconstruction and referential games: losses, metrics and episodes.

Game ids follow the ``referN`` convention where N is the candidate-set size
|D|; ``recon`` is the reconstruction game.  A ``-conventional`` or
``-contrastive`` suffix picks the referential loss variant for that game.

"""

from collections import namedtuple
from dataclasses import dataclass
import re

import numpy as np
import torch
import torch.nn.functional as F

import elexpress
from elexpress.agents import listener_encode_message

KINDS = ('reconstruction', 'referential')
LOSS_VARIANTS = ('contrastive', 'conventional')

_GAME_ID = re.compile(r'^(?:(recon)|refer(\d+))(?:-(contrastive|conventional))?$')

EpisodeResult = namedtuple('EpisodeResult', ['loss', 'score', 'batch'])


@dataclass(frozen=True)
class GameSpec:
    """Definition of one game

    Parameters
    ----------
    kind : (str)
        'reconstruction' or 'referential'
    candidate_count : (int or NoneType)
        Candidate-set size |D|, referential games only (default=None)
    loss_variant : (str)
        'contrastive' or 'conventional', referential games only
        (default='contrastive')
    batch_size : (int or NoneType)
        Batch size |B|; forced to |D| by the contrastive variant
        (default=None)

    """
    kind: str
    candidate_count: int = None
    loss_variant: str = 'contrastive'
    batch_size: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError('unknown game kind {:}'.format(self.kind))

        if self.kind == 'reconstruction':
            object.__setattr__(self, 'candidate_count', None)
            object.__setattr__(self, 'loss_variant', None)
            if self.batch_size is None:
                object.__setattr__(self, 'batch_size', 1024)
        else:
            if self.candidate_count is None or self.candidate_count < 2:
                raise ValueError('referential games need at least 2 '
                                 'candidates, got {:}'.format(
                                     self.candidate_count))
            if self.loss_variant not in LOSS_VARIANTS:
                raise ValueError('unknown loss variant {:}'.format(
                    self.loss_variant))
            if self.loss_variant == 'contrastive':
                if self.batch_size not in (None, self.candidate_count):
                    raise ValueError(''.join([
                        'the contrastive variant uses the batch as the ',
                        'candidate set, so batch_size must equal ',
                        'candidate_count ({:d})'.format(
                            self.candidate_count)]))
                object.__setattr__(self, 'batch_size', self.candidate_count)
            elif self.batch_size is None:
                object.__setattr__(self, 'batch_size', 128)

        if self.batch_size < 1:
            raise ValueError('batch_size must be positive, got {:}'.format(
                self.batch_size))

    @property
    def name(self):
        """Canonical game id"""
        if self.kind == 'reconstruction':
            return 'recon'
        name = 'refer{:d}'.format(self.candidate_count)
        if self.loss_variant == 'conventional':
            name += '-conventional'
        return name

    @property
    def metric(self):
        """Kind of generalisation metric reported for this game"""
        return 'accuracy' if self.kind == 'referential' else '1-bce'

    def chance_score(self, n_values):
        """Score of a listener that ignores the message

        Parameters
        ----------
        n_values : (int)
            Values per attribute of the input space

        Returns
        -------
        score : (float)
            1/|D| for referential games; for reconstruction, 1 - BCE of
            predicting every bit at its marginal rate 1/n_values

        """
        if self.kind == 'referential':
            return 1.0 / self.candidate_count
        if n_values < 2:
            return 1.0

        rate = 1.0 / n_values
        return 1.0 + rate * np.log(rate) + (1.0 - rate) * np.log(1.0 - rate)

    def validate(self, space_size):
        """Check the game against an input space size

        Raises
        ------
        ValueError if |D| exceeds the number of meanings

        """
        if self.kind == 'referential' and self.candidate_count > space_size:
            raise ValueError('{:s} needs {:d} candidates but the input space '
                             'has only {:d} meanings'.format(
                                 self.name, self.candidate_count, space_size))


def parse_game_id(game_id, loss_variant='contrastive', recon_batch_size=1024,
                  conventional_batch_size=128):
    """Resolve a game id such as 'recon', 'refer100' or 'refer10-conventional'

    Parameters
    ----------
    game_id : (str)
        Game id
    loss_variant : (str)
        Referential loss variant used when the id carries no suffix
        (default='contrastive')
    recon_batch_size : (int)
        Batch size of reconstruction games (default=1024)
    conventional_batch_size : (int)
        Batch size of conventional referential games (default=128)

    Returns
    -------
    game : (GameSpec)
        Resolved game

    Raises
    ------
    ValueError for an unrecognised id

    """
    match = _GAME_ID.match(str(game_id).strip())
    if match is None:
        raise ValueError(''.join(['unknown game id {:}; '.format(game_id),
                                  'expected recon or referN with an ',
                                  'optional -contrastive/-conventional ',
                                  'suffix']))

    recon, count, variant = match.groups()
    if recon:
        if variant is not None:
            raise ValueError('recon takes no loss variant suffix')
        return GameSpec('reconstruction', batch_size=recon_batch_size)

    variant = loss_variant if variant is None else variant
    batch_size = conventional_batch_size if variant == 'conventional' \
        else None
    return GameSpec('referential', candidate_count=int(count),
                    loss_variant=variant, batch_size=batch_size)


@dataclass
class EpisodeBatch:
    """Targets and candidate sets of one optimisation step

    Parameters
    ----------
    targets : (np.ndarray)
        Canonical meaning indices of the targets
    candidates : (np.ndarray or NoneType)
        (batch, |D|) meaning indices, conventional variant only
    positions : (np.ndarray or NoneType)
        Column of each target inside its candidate row, conventional only

    """
    targets: np.ndarray
    candidates: np.ndarray = None
    positions: np.ndarray = None


def sample_distractors(targets, candidate_count, space_size, rng):
    """Build one candidate set per target

    Parameters
    ----------
    targets : (array-like)
        Canonical indices of the targets
    candidate_count : (int)
        Candidate-set size |D|, target included
    space_size : (int)
        Number of meanings |X|
    rng : (np.random.Generator)
        Random source

    Returns
    -------
    candidates : (np.ndarray)
        (len(targets), |D|) meaning indices; the |D|-1 distractors of a row
        are drawn uniformly without replacement from X minus the target
    positions : (np.ndarray)
        Uniformly drawn column of each target

    """
    targets = np.asarray(targets, dtype=np.int64)
    if candidate_count > space_size:
        raise ValueError('cannot draw {:d} distinct candidates from {:d} '
                         'meanings'.format(candidate_count, space_size))

    candidates = np.empty(shape=(targets.shape[0], candidate_count),
                          dtype=np.int64)
    positions = rng.integers(candidate_count, size=targets.shape[0])
    for irow, (target, pos) in enumerate(zip(targets, positions)):
        drawn = rng.choice(space_size - 1, size=candidate_count - 1,
                           replace=False)
        drawn = drawn + (drawn >= target)
        candidates[irow] = np.insert(drawn, pos, target)

    return candidates, positions


def candidate_scores(h_m, candidates, encoder):
    """Energies h_m . f(x_j) of every candidate

    Parameters
    ----------
    h_m : (torch.Tensor)
        Message embedding(s), shape (hidden,) or (batch, hidden)
    candidates : (torch.Tensor)
        Flat candidates, shape (|D|, n_inputs) or (batch, |D|, n_inputs)
    encoder : (callable)
        Candidate encoder f

    Returns
    -------
    scores : (torch.Tensor)
        Shape (|D|,) or (batch, |D|); the listener's choice distribution is
        their softmax

    """
    if candidates.shape[-2] == 0:
        raise ValueError('candidate list is empty')

    encoded = encoder(candidates)
    return torch.matmul(encoded, h_m.unsqueeze(-1)).squeeze(-1)


def contrastive_choice_scores(message_embeddings, candidate_embeddings):
    """|B| x |B| matrix of h_{m_i} . f(x_j)"""
    return message_embeddings @ candidate_embeddings.transpose(0, 1)


def contrastive_loss(message_embeddings, candidate_embeddings,
                     reduction='mean'):
    """In-batch softmax loss where the batch is the candidate set

    Parameters
    ----------
    message_embeddings : (torch.Tensor)
        h_{m_i}, shape (|B|, hidden)
    candidate_embeddings : (torch.Tensor)
        f(x_i), shape (|B|, hidden)
    reduction : (str)
        'mean' or 'none' (default='mean')

    Returns
    -------
    loss : (torch.Tensor)
        Mean of -log softmax_i over row i of the score matrix, or the
        per-item values

    """
    if message_embeddings.shape != candidate_embeddings.shape:
        raise ValueError('embedding shapes differ: {:} and {:}'.format(
            tuple(message_embeddings.shape),
            tuple(candidate_embeddings.shape)))
    if message_embeddings.shape[0] == 0:
        raise ValueError('contrastive loss needs a non-empty batch')

    scores = contrastive_choice_scores(message_embeddings,
                                       candidate_embeddings)
    labels = torch.arange(scores.shape[0])
    return F.cross_entropy(scores, labels, reduction=reduction)


def conventional_referential_loss(h_m, target_index, candidates, encoder,
                                  reduction='mean'):
    """Cross-entropy of the listener's choice over its own candidate set

    Parameters
    ----------
    h_m : (torch.Tensor)
        Message embedding(s), shape (hidden,) or (batch, hidden)
    target_index : (int or array-like)
        Column of the target in each candidate set
    candidates : (torch.Tensor)
        Flat candidates, shape (|D|, n_inputs) or (batch, |D|, n_inputs);
        every batch element is encoded separately, |B| * |D| encodings
    encoder : (callable)
        Candidate encoder f
    reduction : (str)
        'mean' or 'none' (default='mean')

    Returns
    -------
    loss : (torch.Tensor)
        -log p(target)

    """
    return _choice_loss(candidate_scores(h_m, candidates, encoder),
                        target_index, reduction)


def _choice_loss(scores, target_index, reduction):
    unbatched = scores.dim() == 1
    if unbatched:
        scores = scores.unsqueeze(0)

    target = torch.as_tensor(np.atleast_1d(target_index), dtype=torch.long)
    if target.shape[0] != scores.shape[0]:
        raise ValueError('expected {:d} target indices, got {:d}'.format(
            scores.shape[0], target.shape[0]))
    if torch.any(target < 0) or torch.any(target >= scores.shape[1]):
        raise ValueError('target index not among the {:d} candidates'.format(
            scores.shape[1]))

    loss = F.cross_entropy(scores, target, reduction=reduction)
    return loss[0] if unbatched and reduction == 'none' else loss


def reconstruction_loss(x, logits, reduction='mean'):
    """Mean binary cross-entropy between a meaning and its reconstruction

    Parameters
    ----------
    x : (torch.Tensor)
        Flat binary meaning(s)
    logits : (torch.Tensor)
        Generator outputs g(h^L) of the same shape
    reduction : (str)
        'mean' over the batch or 'none' (default='mean')

    Returns
    -------
    loss : (torch.Tensor)
        (1/K) sum_k -[x log p + (1 - x) log(1 - p)], p = sigmoid(logits)
        clamped to [eps, 1 - eps] with eps = elexpress.prob_clamp

    """
    if x.shape != logits.shape:
        raise ValueError('meaning and logits shapes differ: {:} and '
                         '{:}'.format(tuple(x.shape), tuple(logits.shape)))

    eps = elexpress.prob_clamp
    prob = torch.sigmoid(logits).clamp(min=eps, max=1.0 - eps)
    x = x.to(prob.dtype)
    per_item = -(x * torch.log(prob) +
                 (1.0 - x) * torch.log(1.0 - prob)).mean(dim=-1)

    if reduction == 'none':
        return per_item
    return per_item.mean()


def reconstruction_score(x, logits):
    """Generalisation score of a reconstruction, 1 - BCE"""
    return 1.0 - float(reconstruction_loss(x, logits).detach())


def referential_accuracy(choice_distributions, target_indices):
    """Fraction of choices that pick the target

    Parameters
    ----------
    choice_distributions : (array-like)
        (batch, |D|) probabilities or scores
    target_indices : (array-like)
        Column of each target

    Returns
    -------
    accuracy : (float)
        Ties resolve to the lowest column

    """
    if torch.is_tensor(choice_distributions):
        choice_distributions = choice_distributions.detach().cpu().numpy()
    if torch.is_tensor(target_indices):
        target_indices = target_indices.detach().cpu().numpy()

    choices = np.asarray(choice_distributions)
    if choices.ndim != 2 or choices.shape[0] == 0:
        raise ValueError('expected a non-empty (batch, candidates) array')

    return float(np.mean(np.argmax(choices, axis=1) ==
                         np.asarray(target_indices)))


def make_episode_batch(game, targets, space_size, rng):
    """Attach candidate sets to a batch of targets when the game needs them"""
    targets = np.asarray(targets, dtype=np.int64)
    if game.kind == 'referential' and game.loss_variant == 'conventional':
        candidates, positions = sample_distractors(
            targets, game.candidate_count, space_size, rng)
        return EpisodeBatch(targets, candidates, positions)
    return EpisodeBatch(targets)


def listener_episode(listener, game, space, batch, message):
    """Loss and score of one listener step

    Parameters
    ----------
    listener : (Listener)
        Listener whose action module matches game.kind
    game : (GameSpec)
        Game being played
    space : (InputSpace)
        Input space the batch indexes
    batch : (EpisodeBatch)
        Targets and, for the conventional variant, candidate sets
    message : (torch.Tensor)
        Tokens or straight-through one-hots for the targets

    Returns
    -------
    result : (EpisodeResult)
        Differentiable loss, float score (accuracy or 1 - BCE), batch

    """
    if listener.kind != game.kind:
        raise ValueError('a {:s} listener cannot play {:s}'.format(
            listener.kind, game.name))

    dtype = listener.token_embedding.weight.dtype
    flat = torch.as_tensor(space.flat, dtype=dtype)
    h_m = listener_encode_message(listener, message)

    if game.kind == 'reconstruction':
        x = flat[batch.targets]
        loss = reconstruction_loss(x, listener.generator(h_m))
        score = 1.0 - float(loss.detach())
    elif game.loss_variant == 'contrastive':
        cand = listener.candidate_encoder(flat[batch.targets])
        scores = contrastive_choice_scores(h_m, cand)
        loss = contrastive_loss(h_m, cand)
        score = referential_accuracy(scores, np.arange(len(batch.targets)))
    else:
        cand_x = flat[torch.as_tensor(batch.candidates)]
        scores = candidate_scores(h_m, cand_x, listener.candidate_encoder)
        loss = _choice_loss(scores, batch.positions, 'mean')
        score = referential_accuracy(scores, batch.positions)

    return EpisodeResult(loss, score, batch)
