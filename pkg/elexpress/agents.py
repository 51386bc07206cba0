# -*- coding: utf-8 -*-
"""Speaker and listener networks and the discrete channel between them.

Tokens cross the channel as exact one-hot vectors; gradients flow back
through the temperature-relaxed Gumbel-Softmax sample (straight-through).

"""

from collections import namedtuple
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

import elexpress

CHECKPOINT_VERSION = 1

SpeakerOutput = namedtuple('SpeakerOutput',
                           ['tokens', 'onehots', 'relaxed', 'logits'])


@dataclass(frozen=True)
class ChannelSpec:
    """Capacity of the communication channel

    Parameters
    ----------
    message_length : (int)
        Tokens per message (default=6)
    vocab_size : (int)
        Size of the token inventory (default=10)
    temperature : (float)
        Gumbel-Softmax temperature tau (default=1.0)

    """
    message_length: int = 6
    vocab_size: int = 10
    temperature: float = 1.0

    def __post_init__(self):
        if self.message_length < 1:
            raise ValueError('message_length must be positive, got '
                             '{:}'.format(self.message_length))
        if self.vocab_size < 1:
            raise ValueError('vocab_size must be positive, got {:}'.format(
                self.vocab_size))
        if not self.temperature > 0:
            raise ValueError('temperature must be positive, got {:}'.format(
                self.temperature))

    @property
    def message_space_size(self):
        """Number of distinct messages"""
        return self.vocab_size ** self.message_length


@dataclass(frozen=True)
class Message:
    """Fixed-length token sequence"""
    tokens: tuple

    def check(self, channel):
        """Raise ValueError unless the message fits the channel"""
        if len(self.tokens) != channel.message_length:
            raise ValueError('message has {:d} tokens, channel expects '
                             '{:d}'.format(len(self.tokens),
                                           channel.message_length))
        if any(tt < 0 or tt >= channel.vocab_size for tt in self.tokens):
            raise ValueError('tokens out of range [0, {:d}): {:}'.format(
                channel.vocab_size, self.tokens))


class _StraightThrough(torch.autograd.Function):
    """One-hot of the argmax forward, identity backward"""

    @staticmethod
    def forward(ctx, relaxed):
        index = relaxed.argmax(dim=-1)
        return F.one_hot(index, relaxed.shape[-1]).to(relaxed.dtype)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output


def sample_gumbel(shape, generator=None, dtype=torch.float32):
    """Draw standard Gumbel(0, 1) noise"""
    tiny = torch.finfo(dtype).tiny
    uniform = torch.rand(shape, generator=generator, dtype=dtype)
    uniform = uniform.clamp(min=tiny, max=1.0 - torch.finfo(dtype).eps)
    return -torch.log(-torch.log(uniform))


def gumbel_softmax_sample(logits, temperature, generator=None, noise=None):
    """Draw a straight-through Gumbel-Softmax sample

    Parameters
    ----------
    logits : (torch.Tensor)
        Unnormalised log-probabilities, last dimension is the vocabulary
    temperature : (float)
        Relaxation temperature tau
    generator : (torch.Generator or NoneType)
        Random source for the Gumbel noise (default=None)
    noise : (torch.Tensor or NoneType)
        Pre-drawn Gumbel noise with the shape of logits; used instead of
        sampling so gradients can be checked with the noise held fixed
        (default=None)

    Returns
    -------
    onehot : (torch.Tensor)
        Exact one-hot of the argmax of the relaxed sample, carrying the
        gradient of the relaxed sample
    relaxed : (torch.Tensor)
        softmax((logits + noise) / temperature)

    Raises
    ------
    ValueError for non-finite logits or a non-positive temperature

    """
    if not torch.isfinite(logits).all():
        raise ValueError('logits must be finite')
    if not temperature > 0:
        raise ValueError('temperature must be positive, got {:}'.format(
            temperature))

    if noise is None:
        noise = sample_gumbel(logits.shape, generator=generator,
                              dtype=logits.dtype)

    relaxed = F.softmax((logits + noise) / temperature, dim=-1)
    onehot = _StraightThrough.apply(relaxed)

    return onehot, relaxed


def _mlp(n_in, n_hidden, n_out):
    return nn.Sequential(nn.Linear(n_in, n_hidden), nn.ReLU(),
                         nn.Linear(n_hidden, n_out))


def _uniform_(tensor, bound, generator):
    with torch.no_grad():
        draw = torch.rand(tensor.shape, generator=generator,
                          dtype=tensor.dtype)
        tensor.copy_((2.0 * draw - 1.0) * bound)


def init_parameters(module, generator):
    """Initialise every weight uniformly in +/- 1/sqrt(fan_in)

    Parameters
    ----------
    module : (nn.Module)
        Speaker or listener
    generator : (torch.Generator)
        Seeded random source

    Notes
    -----
    Biases are set to zero.  Submodules are visited in registration order,
    so a fixed generator state always gives the same parameters.

    """
    for sub in module.modules():
        if isinstance(sub, nn.Linear):
            _uniform_(sub.weight, 1.0 / np.sqrt(sub.in_features), generator)
            if sub.bias is not None:
                with torch.no_grad():
                    sub.bias.zero_()
        elif isinstance(sub, nn.LSTMCell):
            _uniform_(sub.weight_ih, 1.0 / np.sqrt(sub.input_size),
                      generator)
            _uniform_(sub.weight_hh, 1.0 / np.sqrt(sub.hidden_size),
                      generator)
            with torch.no_grad():
                sub.bias_ih.zero_()
                sub.bias_hh.zero_()

    if isinstance(module, Speaker):
        _uniform_(module.start_symbol,
                  1.0 / np.sqrt(module.start_symbol.shape[0]), generator)


class Speaker(nn.Module):
    """Perception MLP followed by a fixed-length LSTM message decoder

    Parameters
    ----------
    n_inputs : (int)
        Length of the flat meaning vector
    hidden_size : (int)
        Size of h^S, of the recurrent state and of token embeddings
    channel : (ChannelSpec)
        Channel the speaker writes to

    """

    def __init__(self, n_inputs, hidden_size, channel):
        super().__init__()
        self.n_inputs = n_inputs
        self.hidden_size = hidden_size
        self.channel = channel

        self.perception = _mlp(n_inputs, hidden_size, hidden_size)
        self.cell = nn.LSTMCell(hidden_size, hidden_size)
        self.token_head = nn.Linear(hidden_size, channel.vocab_size)
        self.token_embedding = nn.Linear(channel.vocab_size, hidden_size,
                                         bias=False)
        self.start_symbol = nn.Parameter(torch.zeros(hidden_size))

    def forward(self, x, mode='train', generator=None, noise=None):
        if mode not in ('train', 'greedy'):
            raise ValueError('unknown speaker mode {:}'.format(mode))
        if x.shape[-1] != self.n_inputs:
            raise ValueError('expected inputs of length {:d}, got {:d}'.format(
                self.n_inputs, x.shape[-1]))

        hidden = self.perception(x)
        state = torch.zeros_like(hidden)
        step_in = self.start_symbol.expand(x.shape[0], -1)

        tokens, onehots, relaxed, logits = [], [], [], []
        for step in range(self.channel.message_length):
            hidden, state = self.cell(step_in, (hidden, state))
            step_logits = self.token_head(hidden)

            if mode == 'train':
                step_noise = None if noise is None else noise[:, step]
                step_hot, step_soft = gumbel_softmax_sample(
                    step_logits, self.channel.temperature,
                    generator=generator, noise=step_noise)
            else:
                step_soft = F.softmax(step_logits /
                                      self.channel.temperature, dim=-1)
                step_hot = F.one_hot(step_logits.argmax(dim=-1),
                                     self.channel.vocab_size).to(
                                         step_logits.dtype)

            step_in = self.token_embedding(step_hot)
            tokens.append(step_hot.detach().argmax(dim=-1))
            onehots.append(step_hot)
            relaxed.append(step_soft)
            logits.append(step_logits)

        return SpeakerOutput(torch.stack(tokens, dim=1),
                             torch.stack(onehots, dim=1),
                             torch.stack(relaxed, dim=1),
                             torch.stack(logits, dim=1))


class Listener(nn.Module):
    """LSTM message encoder plus a game-specific action module

    Parameters
    ----------
    n_inputs : (int)
        Length of the flat meaning vector
    hidden_size : (int)
        Size of h^L and of the candidate embeddings
    channel : (ChannelSpec)
        Channel the listener reads from
    kind : (str)
        'referential' adds the candidate encoder f^L, 'reconstruction'
        adds the generator g

    """

    def __init__(self, n_inputs, hidden_size, channel, kind):
        super().__init__()
        self.n_inputs = n_inputs
        self.hidden_size = hidden_size
        self.channel = channel
        self.kind = kind

        self.token_embedding = nn.Linear(channel.vocab_size, hidden_size,
                                         bias=False)
        self.cell = nn.LSTMCell(hidden_size, hidden_size)

        if kind == 'referential':
            self.candidate_encoder = _mlp(n_inputs, hidden_size, hidden_size)
        elif kind == 'reconstruction':
            self.generator = _mlp(hidden_size, hidden_size, n_inputs)
        else:
            raise ValueError('unknown listener kind {:}'.format(kind))

    def encode(self, message):
        """Embed a message, see listener_encode_message"""
        return listener_encode_message(self, message)

    def forward(self, message):
        return self.encode(message)


def speaker_forward(speaker, x, mode='train', generator=None, noise=None):
    """Produce messages for a batch of meanings

    Parameters
    ----------
    speaker : (Speaker)
        Speaker network
    x : (torch.Tensor)
        Flat meanings, shape (batch, n_inputs)
    mode : (str)
        'train' samples straight-through Gumbel-Softmax tokens, 'greedy'
        takes the argmax at every step (default='train')
    generator : (torch.Generator or NoneType)
        Random source for the Gumbel noise (default=None)
    noise : (torch.Tensor or NoneType)
        Fixed Gumbel noise of shape (batch, length, vocab) (default=None)

    Returns
    -------
    out : (SpeakerOutput)
        tokens (batch, length), onehots and relaxed distributions
        (batch, length, vocab), and the step logits

    """
    return speaker(x, mode=mode, generator=generator, noise=noise)


def listener_encode_message(listener, message):
    """Encode a message into the listener embedding h^L

    Parameters
    ----------
    listener : (Listener)
        Listener network
    message : (torch.Tensor)
        Integer tokens of shape (batch, length) or (length,), or token
        distributions of shape (batch, length, vocab); a distribution
        embeds as the probability-weighted mixture of embedding rows

    Returns
    -------
    hidden : (torch.Tensor)
        Final recurrent state, shape (batch, hidden_size) or (hidden_size,)

    Raises
    ------
    ValueError if the message length does not match the channel

    """
    channel = listener.channel
    dtype = listener.token_embedding.weight.dtype

    if message.is_floating_point():
        unbatched = message.dim() == 2
        dists = message.unsqueeze(0) if unbatched else message
        dists = dists.to(dtype)
    else:
        unbatched = message.dim() == 1
        tokens = message.unsqueeze(0) if unbatched else message
        if tokens.numel() and (tokens.min() < 0 or
                               tokens.max() >= channel.vocab_size):
            raise ValueError('tokens out of range [0, {:d})'.format(
                channel.vocab_size))
        dists = F.one_hot(tokens.long(), channel.vocab_size).to(dtype)

    if dists.shape[1] != channel.message_length:
        raise ValueError('message has {:d} tokens, channel expects {:d}'.format(
            dists.shape[1], channel.message_length))

    hidden = torch.zeros(dists.shape[0], listener.hidden_size, dtype=dtype)
    state = torch.zeros_like(hidden)
    for step in range(channel.message_length):
        hidden, state = listener.cell(listener.token_embedding(dists[:, step]),
                                      (hidden, state))

    return hidden[0] if unbatched else hidden


def build_speaker(n_inputs, hidden_size, channel, generator):
    """Create a freshly initialised speaker"""
    speaker = Speaker(n_inputs, hidden_size, channel)
    init_parameters(speaker, generator)
    return speaker


def build_listener(n_inputs, hidden_size, channel, kind, generator):
    """Create a freshly initialised listener"""
    listener = Listener(n_inputs, hidden_size, channel, kind)
    init_parameters(listener, generator)
    return listener


def build_agents(n_inputs, hidden_size, channel, kind, seed):
    """Create a speaker and listener pair from a single seed

    Parameters
    ----------
    n_inputs : (int)
        Length of the flat meaning vector
    hidden_size : (int)
        Agent hidden size
    channel : (ChannelSpec)
        Shared channel
    kind : (str)
        Listener kind, 'referential' or 'reconstruction'
    seed : (int)
        Seed of the initialisation generator

    Returns
    -------
    speaker : (Speaker)
    listener : (Listener)
    generator : (torch.Generator)
        The generator after initialisation, ready to draw Gumbel noise

    """
    generator = torch.Generator()
    generator.manual_seed(int(seed))
    speaker = build_speaker(n_inputs, hidden_size, channel, generator)
    listener = build_listener(n_inputs, hidden_size, channel, kind, generator)
    return speaker, listener, generator


def save_checkpoint(fname, speaker, listener, seed, epoch=None):
    """Write speaker and listener parameters with their configuration

    Parameters
    ----------
    fname : (str)
        Output filename
    speaker : (Speaker or NoneType)
        Speaker to store
    listener : (Listener)
        Listener to store
    seed : (int)
        Seed of the run that produced the parameters
    epoch : (int or NoneType)
        Last completed epoch (default=None)

    """
    record = {'format_version': CHECKPOINT_VERSION,
              'channel': asdict(listener.channel),
              'n_inputs': listener.n_inputs,
              'hidden_size': listener.hidden_size,
              'listener_kind': listener.kind,
              'seed': int(seed),
              'epoch': -1 if epoch is None else int(epoch),
              'listener': listener.state_dict(),
              'speaker': None if speaker is None else speaker.state_dict()}
    torch.save(record, fname)
    elexpress.logger.info('wrote checkpoint {:}'.format(fname))


def load_checkpoint(fname):
    """Read a checkpoint written by save_checkpoint

    Returns
    -------
    speaker : (Speaker or NoneType)
        Restored speaker, None if the checkpoint holds only a listener
    listener : (Listener)
        Restored listener
    meta : (dict)
        channel, seed, epoch, hidden_size and n_inputs

    Raises
    ------
    ValueError for an unknown checkpoint version

    """
    record = torch.load(fname, weights_only=True)
    if record.get('format_version') != CHECKPOINT_VERSION:
        raise ValueError('unsupported checkpoint version {:}'.format(
            record.get('format_version')))

    channel = ChannelSpec(**record['channel'])
    listener = Listener(record['n_inputs'], record['hidden_size'], channel,
                        record['listener_kind'])
    listener.load_state_dict(record['listener'])

    speaker = None
    if record['speaker'] is not None:
        speaker = Speaker(record['n_inputs'], record['hidden_size'], channel)
        speaker.load_state_dict(record['speaker'])

    meta = {'channel': channel, 'seed': record['seed'],
            'epoch': None if record['epoch'] < 0 else record['epoch'],
            'hidden_size': record['hidden_size'],
            'n_inputs': record['n_inputs']}

    return speaker, listener, meta
