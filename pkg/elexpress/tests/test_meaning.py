# -*- coding: utf-8 -*-
from io import StringIO
import logging
import os
import tempfile

import numpy as np
import pytest

import elexpress
from elexpress import meaning


class TestAttributeSpec:
    @pytest.mark.parametrize('n_attr,n_val,flat,size',
                             [(4, 10, 40, 10000), (3, 10, 30, 1000),
                              (2, 8, 16, 64), (1, 2, 2, 2)])
    def test_sizes(self, n_attr, n_val, flat, size):
        """Test the flat length and number of meanings"""
        spec = meaning.AttributeSpec(n_attr, n_val)
        assert spec.flat_size == flat
        assert spec.space_size == size

    @pytest.mark.parametrize('n_attr,n_val', [(0, 10), (4, 1), (-1, 3),
                                              (2.5, 4)])
    def test_bad_spec(self, n_attr, n_val):
        """Test rejection of impossible attribute specs"""
        with pytest.raises(ValueError):
            meaning.AttributeSpec(n_attr, n_val)


class TestFlatten:
    def setup_method(self):
        """Runs before every method to create a clean testing setup"""
        self.spec = meaning.AttributeSpec(3, 4)

    def teardown_method(self):
        """Runs after every method to clean up previous testing"""
        del self.spec

    def test_flatten(self):
        """Test the concatenated one-hot layout"""
        flat = meaning.flatten((0, 3, 1), self.spec)
        np.testing.assert_array_equal(flat, [1, 0, 0, 0, 0, 0, 0, 1,
                                             0, 1, 0, 0])

    def test_unflatten_inverts(self):
        """Test that unflatten recovers the attribute tuple"""
        for attrs in [(0, 0, 0), (3, 2, 1), (1, 3, 3)]:
            assert meaning.unflatten(meaning.flatten(attrs, self.spec),
                                     self.spec) == attrs

    @pytest.mark.parametrize('attrs', [(0, 4, 0), (0, 1), (-1, 0, 0)])
    def test_flatten_bad_attributes(self, attrs):
        """Test rejection of attribute values outside the space"""
        with pytest.raises(ValueError):
            meaning.flatten(attrs, self.spec)

    def test_unflatten_two_hot(self):
        """Test rejection of a block with two active bits"""
        flat = meaning.flatten((0, 0, 0), self.spec)
        flat[1] = 1
        with pytest.raises(ValueError):
            meaning.unflatten(flat, self.spec)

    def test_unflatten_empty_block(self):
        """Test rejection of a block with no active bit"""
        flat = meaning.flatten((0, 0, 0), self.spec)
        flat[0] = 0
        with pytest.raises(ValueError):
            meaning.unflatten(flat, self.spec)

    def test_meaning_vector(self):
        """Test the MeaningVector convenience properties"""
        vec = meaning.MeaningVector(self.spec, (2, 0, 3))
        assert vec.index == 2 * 16 + 0 * 4 + 3
        assert meaning.MeaningVector.from_flat(vec.flat, self.spec) == vec


class TestInputSpace:
    def setup_method(self):
        """Runs before every method to create a clean testing setup"""
        self.spec = meaning.AttributeSpec(2, 3)
        self.space = meaning.generate_input_space(self.spec)
        self.fname = None

    def teardown_method(self):
        """Runs after every method to clean up previous testing"""
        if self.fname is not None and os.path.isfile(self.fname):
            os.remove(self.fname)
        del self.spec, self.space, self.fname

    def test_lexicographic_order(self):
        """Test the canonical enumeration of a 2 x 3 space"""
        np.testing.assert_array_equal(self.space.attributes,
                                      [[0, 0], [0, 1], [0, 2], [1, 0],
                                       [1, 1], [1, 2], [2, 0], [2, 1],
                                       [2, 2]])

    def test_rows_are_distinct_one_hots(self):
        """Test that every row is a valid and distinct flat meaning"""
        assert len(self.space) == 9
        assert np.unique(self.space.flat, axis=0).shape[0] == 9
        np.testing.assert_array_equal(
            self.space.flat.reshape(9, 2, 3).sum(axis=2), 1)

    def test_index_matches_row(self):
        """Test that meaning_index returns the canonical row"""
        for irow, attrs in enumerate(self.space.attributes):
            assert meaning.meaning_index(attrs, self.spec) == irow
            assert self.space.meaning(irow).attributes == tuple(attrs)

    def test_read_only(self):
        """Test that the enumerated arrays cannot be modified"""
        with pytest.raises(ValueError):
            self.space.flat[0, 0] = 5.0

    def test_paper_size(self):
        """Test the 4 x 10 space used by the default configuration"""
        space = meaning.generate_input_space(meaning.AttributeSpec(4, 10))
        assert space.flat.shape == (10000, 40)
        np.testing.assert_array_equal(space.attributes[1234], [1, 2, 3, 4])

    def test_cap_exceeded(self):
        """Test the size cap and its logged error"""
        log_capture = StringIO()
        handler = logging.StreamHandler(log_capture)
        elexpress.logger.addHandler(handler)
        try:
            with pytest.raises(ValueError):
                meaning.generate_input_space(meaning.AttributeSpec(4, 10),
                                             max_size=9999)
        finally:
            elexpress.logger.removeHandler(handler)
        assert log_capture.getvalue().find('exceeds the cap') >= 0

    def test_export_load(self):
        """Test the exported table and reading it back"""
        fd, self.fname = tempfile.mkstemp(suffix='.txt')
        os.close(fd)
        meaning.export_input_space(self.space, self.fname)

        table = np.loadtxt(self.fname, dtype=int)
        assert table.shape == (9, 1 + 2 + 6)
        np.testing.assert_array_equal(table[:, 0], np.arange(9))
        loaded = meaning.load_input_space(self.fname)
        assert loaded.spec == self.spec
        np.testing.assert_array_equal(loaded.flat, self.space.flat)


class TestDistances:
    def setup_method(self):
        """Runs before every method to create a clean testing setup"""
        self.spec = meaning.AttributeSpec(4, 10)

    def teardown_method(self):
        """Runs after every method to clean up previous testing"""
        del self.spec

    @pytest.mark.parametrize('aa,bb,dist',
                             [((0, 0, 0, 0), (0, 0, 0, 0), 0),
                              ((1, 2, 3, 4), (1, 2, 3, 5), 1),
                              ((1, 2, 3, 4), (4, 3, 2, 1), 4),
                              ((9, 0, 9, 0), (9, 1, 9, 1), 2)])
    def test_attribute_distance(self, aa, bb, dist):
        """Test Hamming distance and its Euclidean counterpart"""
        ma = meaning.MeaningVector(self.spec, aa)
        mb = meaning.MeaningVector(self.spec, bb)
        assert meaning.attribute_distance(ma, mb) == dist
        assert meaning.attribute_distance(mb, ma) == dist
        np.testing.assert_allclose(meaning.euclidean_distance(ma, mb),
                                   np.sqrt(2 * dist))

    def test_metric_axioms(self):
        """Test identity, symmetry and the triangle inequality exhaustively"""
        samples = meaning.generate_input_space(
            meaning.AttributeSpec(2, 3)).samples
        dist = np.array([[meaning.attribute_distance(aa, bb) for bb in samples]
                         for aa in samples])

        np.testing.assert_array_equal(dist, dist.T)
        np.testing.assert_array_equal(np.diag(dist), 0)
        assert (dist[~np.eye(len(samples), dtype=bool)] > 0).all()
        assert (dist[:, None, :] <= dist[:, :, None] + dist[None, :, :]).all()

    def test_mismatched_specs(self):
        """Test rejection of meanings from different spaces"""
        ma = meaning.MeaningVector(self.spec, (0, 0, 0, 0))
        mb = meaning.MeaningVector(meaning.AttributeSpec(4, 9), (0, 0, 0, 0))
        with pytest.raises(ValueError):
            meaning.attribute_distance(ma, mb)
