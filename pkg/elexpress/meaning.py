# -*- coding: utf-8 -*-
"""Structured input spaces of concatenated one-hot attribute blocks.

A meaning is a tuple of attribute values; its flat form concatenates one
one-hot block per attribute.  The canonical ordering of an input space is
lexicographic over attribute tuples, so the row number of a meaning is its
mixed-radix value.

"""

from dataclasses import dataclass, field
import itertools

import numpy as np

import elexpress


@dataclass(frozen=True)
class AttributeSpec:
    """Shape of the input space

    Parameters
    ----------
    n_attributes : (int)
        Number of attributes per meaning (default=4)
    n_values : (int)
        Number of values each attribute can take (default=10)

    """
    n_attributes: int = 4
    n_values: int = 10

    def __post_init__(self):
        if int(self.n_attributes) != self.n_attributes or \
           self.n_attributes < 1:
            raise ValueError('n_attributes must be a positive integer, got '
                             '{:}'.format(self.n_attributes))
        if int(self.n_values) != self.n_values or self.n_values < 2:
            raise ValueError('n_values must be an integer >= 2, got '
                             '{:}'.format(self.n_values))

    @property
    def flat_size(self):
        """Length of the flattened binary vector"""
        return self.n_attributes * self.n_values

    @property
    def space_size(self):
        """Number of distinct meanings"""
        return self.n_values ** self.n_attributes


@dataclass(frozen=True)
class MeaningVector:
    """One meaning, stored as its attribute tuple

    Parameters
    ----------
    spec : (AttributeSpec)
        Space the meaning belongs to
    attributes : (tuple)
        Attribute values, each in [0, n_values)

    """
    spec: AttributeSpec
    attributes: tuple

    def __post_init__(self):
        attrs = tuple(int(aa) for aa in self.attributes)
        if len(attrs) != self.spec.n_attributes:
            raise ValueError('expected {:d} attributes, got {:d}'.format(
                self.spec.n_attributes, len(attrs)))
        if any(aa < 0 or aa >= self.spec.n_values for aa in attrs):
            raise ValueError('attribute values out of range [0, {:d}): '
                             '{:}'.format(self.spec.n_values, attrs))
        object.__setattr__(self, 'attributes', attrs)

    @property
    def flat(self):
        """Flattened binary vector"""
        return flatten(self.attributes, self.spec)

    @property
    def index(self):
        """Position of the meaning in the canonical ordering"""
        return meaning_index(self.attributes, self.spec)

    @classmethod
    def from_flat(cls, flat, spec):
        """Build a meaning from its flat binary form"""
        return cls(spec, unflatten(flat, spec))


@dataclass(frozen=True)
class InputSpace:
    """Every meaning of an attribute space, in canonical order

    Parameters
    ----------
    spec : (AttributeSpec)
        Shape of the space
    attributes : (np.ndarray)
        Integer array of shape (|X|, n_attributes), row i is meaning i
    flat : (np.ndarray)
        Float32 array of shape (|X|, n_attributes * n_values)

    """
    spec: AttributeSpec
    attributes: np.ndarray = field(repr=False)
    flat: np.ndarray = field(repr=False)

    def __len__(self):
        return self.attributes.shape[0]

    @property
    def samples(self):
        """List of MeaningVector objects in canonical order"""
        return [self.meaning(ii) for ii in range(len(self))]

    def meaning(self, index):
        """Return the MeaningVector stored at a canonical index"""
        return MeaningVector(self.spec, tuple(self.attributes[index]))


def flatten(attributes, spec):
    """Convert an attribute tuple to its concatenated one-hot form

    Parameters
    ----------
    attributes : (array-like)
        Attribute values
    spec : (AttributeSpec)
        Shape of the space

    Returns
    -------
    flat : (np.ndarray)
        Binary vector of length n_attributes * n_values

    """
    attributes = np.asarray(attributes, dtype=int)
    if attributes.shape != (spec.n_attributes,):
        raise ValueError('expected {:d} attributes, got shape {:}'.format(
            spec.n_attributes, attributes.shape))
    if np.any(attributes < 0) or np.any(attributes >= spec.n_values):
        raise ValueError('attribute values out of range [0, {:d})'.format(
            spec.n_values))

    flat = np.zeros(shape=spec.flat_size, dtype=np.uint8)
    flat[np.arange(spec.n_attributes) * spec.n_values + attributes] = 1

    return flat


def unflatten(flat, spec):
    """Convert a concatenated one-hot vector back to its attribute tuple

    Parameters
    ----------
    flat : (array-like)
        Binary vector of length n_attributes * n_values
    spec : (AttributeSpec)
        Shape of the space

    Returns
    -------
    attributes : (tuple)
        Attribute values

    Raises
    ------
    ValueError if any block is not exactly one-hot

    """
    flat = np.asarray(flat)
    if flat.shape != (spec.flat_size,):
        raise ValueError('expected a flat vector of length {:d}, got shape '
                         '{:}'.format(spec.flat_size, flat.shape))

    blocks = flat.reshape(spec.n_attributes, spec.n_values)
    if not np.all(np.isin(blocks, (0, 1))) or \
       np.any(blocks.sum(axis=1) != 1):
        raise ValueError('each attribute block must be exactly one-hot')

    return tuple(int(aa) for aa in blocks.argmax(axis=1))


def meaning_index(attributes, spec):
    """Mixed-radix position of an attribute tuple in the canonical order"""
    index = 0
    for aa in attributes:
        index = index * spec.n_values + int(aa)
    return index


def generate_input_space(spec, max_size=None):
    """Enumerate every meaning of an attribute space

    Parameters
    ----------
    spec : (AttributeSpec)
        Shape of the space
    max_size : (int or NoneType)
        Largest space allowed, None to use elexpress.max_space_size
        (default=None)

    Returns
    -------
    space : (InputSpace)
        All n_values ** n_attributes meanings in lexicographic order

    Raises
    ------
    ValueError if the space is larger than the cap

    """
    if max_size is None:
        max_size = elexpress.max_space_size

    if spec.space_size > max_size:
        estr = ''.join(['input space of {:d} meanings '.format(
            spec.space_size), 'exceeds the cap of {:d}'.format(max_size)])
        elexpress.logger.error(estr)
        raise ValueError(estr)

    attributes = np.array(list(itertools.product(range(spec.n_values),
                                                 repeat=spec.n_attributes)),
                          dtype=np.int64)
    flat = np.zeros(shape=(attributes.shape[0], spec.flat_size),
                    dtype=np.float32)
    cols = np.arange(spec.n_attributes) * spec.n_values + attributes
    np.put_along_axis(flat, cols, 1.0, axis=1)

    for arr in (attributes, flat):
        arr.setflags(write=False)

    return InputSpace(spec, attributes, flat)


def _check_pair(aa, bb):
    if aa.spec != bb.spec:
        raise ValueError('meanings come from different attribute specs: '
                         '{:} and {:}'.format(aa.spec, bb.spec))


def attribute_distance(aa, bb):
    """Number of attributes on which two meanings differ

    Parameters
    ----------
    aa : (MeaningVector)
        First meaning
    bb : (MeaningVector)
        Second meaning

    Returns
    -------
    dist : (int)
        Hamming distance over attribute tuples

    """
    _check_pair(aa, bb)
    return int(sum(ia != ib for ia, ib in zip(aa.attributes, bb.attributes)))


def euclidean_distance(aa, bb):
    """Euclidean distance between the flat forms of two meanings

    Notes
    -----
    Always equals sqrt(2 * attribute_distance(aa, bb)).

    """
    _check_pair(aa, bb)
    return float(np.linalg.norm(aa.flat.astype(float) -
                                bb.flat.astype(float)))


def export_input_space(space, fname):
    """Write an input space as one row per meaning

    Parameters
    ----------
    space : (InputSpace)
        Space to export
    fname : (str or file handle)
        Output file

    Notes
    -----
    Columns are: canonical index, the n_attributes attribute values, then
    the n_attributes * n_values flat bits.  The first header line records
    the attribute spec.

    """
    spec = space.spec
    table = np.column_stack((np.arange(len(space)), space.attributes,
                             space.flat.astype(np.int64)))
    names = ['index'] + ['attr_{:d}'.format(ii)
                         for ii in range(spec.n_attributes)] + \
        ['bit_{:d}'.format(ii) for ii in range(spec.flat_size)]
    header = '\n'.join(['n_attributes={:d} n_values={:d}'.format(
        spec.n_attributes, spec.n_values), ' '.join(names)])
    np.savetxt(fname, table, fmt='%d', header=header)


def load_input_space(fname):
    """Read an input space written by export_input_space

    Raises
    ------
    ValueError if the rows do not match the canonical enumeration

    """
    with open(fname, 'r') as fin:
        first = fin.readline().lstrip('#').split()
    meta = dict(item.split('=') for item in first)
    spec = AttributeSpec(int(meta['n_attributes']), int(meta['n_values']))

    table = np.loadtxt(fname, dtype=np.int64, ndmin=2)
    space = generate_input_space(spec)
    if not np.array_equal(table[:, 1:1 + spec.n_attributes],
                          space.attributes):
        raise ValueError('rows of {:} are not in canonical order'.format(
            fname))

    return space
