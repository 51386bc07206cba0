# -*- coding: utf-8 -*-
from io import StringIO
import logging
import os
import tempfile

import numpy as np
import pytest

import elexpress
from elexpress import agents, analysis, meaning, trainer, transfer


def _matrix(table, n_seeds=4, spread=0.01, metric='accuracy'):
    """Matrix with seeds spread evenly around the given cell means"""
    offsets = np.linspace(-1, 1, n_seeds) * spread
    matrix = transfer.TransferMatrix()
    for source, row in table.items():
        for target, mean in row.items():
            for seed, off in enumerate(offsets):
                matrix.add(source, target, seed,
                           transfer.TransferCell(mean + off, metric))
    return matrix


def _language(messages, spec):
    messages = np.asarray(messages).reshape(spec.space_size, -1)
    return trainer.EmergentLanguage(
        np.arange(spec.space_size), messages,
        agents.ChannelSpec(messages.shape[1], int(messages.max()) + 1), spec)


class TestSignificance:
    def test_welch(self):
        """Test the Welch p-value against the closed form for 4 dof"""
        p_value = analysis.significance_test([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
        theta = np.arctan(3.0 / np.sqrt(2.0 / 3.0) / 2.0)
        expect = 1.0 - np.sin(theta) * (1.0 + np.cos(theta) ** 2 / 2.0)
        np.testing.assert_allclose(p_value, expect, rtol=1.0e-6)
        np.testing.assert_allclose(p_value, 0.0213, atol=1.0e-4)

    def test_mann_whitney(self):
        """Test the rank test on fully separated samples"""
        p_value = analysis.significance_test([1, 2, 3, 4], [5, 6, 7, 8],
                                             'mannwhitney')
        np.testing.assert_allclose(p_value, 2.0 / 70.0, rtol=1.0e-6)

    def test_constant_samples(self):
        """Test that an undefined test counts as no difference"""
        log_capture = StringIO()
        handler = logging.StreamHandler(log_capture)
        elexpress.logger.addHandler(handler)
        try:
            assert analysis.significance_test([0.5, 0.5], [0.5, 0.5]) == 1.0
        finally:
            elexpress.logger.removeHandler(handler)
        assert log_capture.getvalue().find('undefined') >= 0

    def test_unknown_test(self):
        """Test rejection of an unknown test name"""
        with pytest.raises(ValueError):
            analysis.significance_test([1, 2], [3, 4], 'kruskal')

    def test_unknown_relation(self):
        """Test rejection of a verdict outside the four relations"""
        with pytest.raises(ValueError):
            analysis.OrderVerdict('aa', 'bb', 'better')


class TestPartialOrder:
    def setup_method(self):
        """Runs before every method to create a clean testing setup"""
        self.matrix = _matrix({'aa': {'t1': 0.9, 't2': 0.9, 't3': 0.9},
                               'bb': {'t1': 0.5, 't2': 0.5, 't3': 0.5},
                               'cc': {'t1': 0.5, 't2': 0.5, 't3': 0.5},
                               'dd': {'t1': 0.9, 't2': 0.1, 't3': 0.5}})

    def teardown_method(self):
        """Runs after every method to clean up previous testing"""
        del self.matrix

    def test_greater(self):
        """Test a source better on every target"""
        verdict = analysis.expressivity_partial_order(self.matrix, 'aa', 'bb')
        assert verdict.relation == 'greater'
        assert [ev.direction for ev in verdict.evidence] == ['greater'] * 3

    def test_equal(self):
        """Test identical per-seed values"""
        verdict = analysis.expressivity_partial_order(self.matrix, 'bb', 'cc')
        assert verdict.relation == 'equal'
        np.testing.assert_allclose([ev.p_value for ev in verdict.evidence],
                                   1.0)

    def test_incomparable(self):
        """Test significant differences in both directions"""
        verdict = analysis.expressivity_partial_order(self.matrix, 'dd', 'bb')
        assert verdict.relation == 'incomparable'
        assert [ev.direction for ev in verdict.evidence] == \
            ['greater', 'less', 'equal']

    def test_target_subset(self):
        """Test restricting the comparison to some targets"""
        verdict = analysis.expressivity_partial_order(
            self.matrix, 'dd', 'bb', targets=['t2', 't3'])
        assert verdict.relation == 'less'

    def test_antisymmetry(self):
        """Test that swapping the sources inverts every verdict"""
        for aa in self.matrix.sources:
            for bb in self.matrix.sources:
                fwd = analysis.expressivity_partial_order(self.matrix, aa, bb)
                bwd = analysis.expressivity_partial_order(self.matrix, bb, aa)
                assert analysis._invert(fwd).relation == bwd.relation

    def test_too_few_seeds(self):
        """Test rejection of a single seed"""
        matrix = _matrix({'aa': {'t1': 0.9}, 'bb': {'t1': 0.5}}, n_seeds=1)
        with pytest.raises(ValueError):
            analysis.expressivity_partial_order(matrix, 'aa', 'bb')

    def test_mann_whitney_verdict(self):
        """Test the rank-test alternative"""
        verdict = analysis.expressivity_partial_order(
            _matrix({'aa': {'t1': 0.9}, 'bb': {'t1': 0.5}}, n_seeds=5),
            'aa', 'bb', test='mannwhitney')
        assert verdict.relation == 'greater'


class TestOrderReport:
    def test_dominant_row(self):
        """Test a 3 x 3 matrix with one dominant source"""
        matrix = _matrix({'aa': {'t1': 0.9, 't2': 0.8, 't3': 0.7},
                          'bb': {'t1': 0.5, 't2': 0.8, 't3': 0.4},
                          'cc': {'t1': 0.6, 't2': 0.3, 't3': 0.7}})
        report = analysis.full_order_report(matrix)

        assert report.verdict('aa', 'bb').relation == 'greater'
        assert report.verdict('aa', 'cc').relation == 'greater'
        assert report.verdict('cc', 'aa').relation == 'less'
        assert report.verdict('bb', 'cc').relation == 'incomparable'
        assert report.levels == (('aa',), ('bb', 'cc'))
        assert report.chain == 'aa > bb ≈ cc'
        assert report.chains == (('aa', 'bb'), ('aa', 'cc'))
        assert report.incomparable == (('bb', 'cc'),)

    def test_constant_matrix(self):
        """Test that identical constants give a single level"""
        matrix = _matrix({ss: {'t1': 0.5, 't2': 0.7} for ss in 'abc'},
                         spread=0.0)
        report = analysis.full_order_report(matrix)
        assert all(vv.relation == 'equal' for vv in report.verdicts.values())
        assert report.chain == 'a ≈ b ≈ c'
        assert report.chains == (('a',), ('b',), ('c',))

    def test_strict_chain(self):
        """Test three sources in a strict order"""
        matrix = _matrix({'lo': {'t1': 0.1}, 'mid': {'t1': 0.5},
                          'hi': {'t1': 0.9}})
        report = analysis.full_order_report(matrix)
        assert report.chain == 'hi > mid > lo'
        assert report.chains == (('hi', 'mid', 'lo'),)
        assert len(report.verdicts) == 3

    def test_non_transitive_chains(self):
        """Test chains where the level summary overstates the order"""
        verdicts = {('a', 'b'): analysis.OrderVerdict('a', 'b', 'greater'),
                    ('a', 'c'): analysis.OrderVerdict('a', 'c', 'equal'),
                    ('b', 'c'): analysis.OrderVerdict('b', 'c', 'greater'),
                    ('d', 'a'): analysis.OrderVerdict('d', 'a', 'less')}
        sources = ['a', 'b', 'c', 'd']
        assert analysis.order_levels(verdicts, sources) == \
            (('a',), ('b', 'd'), ('c',))
        assert analysis.maximal_chains(verdicts, sources) == \
            (('a', 'b'), ('a', 'd'), ('b', 'c'))

    def test_missing_cells(self):
        """Test that an incomplete matrix lists its missing cells"""
        matrix = _matrix({'aa': {'t1': 0.9, 't2': 0.8},
                          'bb': {'t1': 0.5, 't2': 0.4}})
        del matrix.entries[('bb', 't2', 3)]
        with pytest.raises(ValueError) as err:
            analysis.full_order_report(matrix)
        assert str(err.value).find('bb->t2 seed 3') >= 0

    def test_failed_seeds(self):
        """Test that a group left with one valid seed is listed"""
        matrix = _matrix({'aa': {'t1': 0.9, 't2': 0.8},
                          'bb': {'t1': 0.5, 't2': 0.4}})
        for seed in (0, 1, 2):
            matrix.add('aa', 't2', seed,
                       transfer.TransferCell(np.nan, 'accuracy',
                                             transfer.STATUS_FAILED))
        assert analysis.incomplete_cells(matrix) == [
            'aa->t2 seed 0 failed', 'aa->t2 seed 1 failed',
            'aa->t2 seed 2 failed']
        with pytest.raises(ValueError) as err:
            analysis.full_order_report(matrix)
        assert str(err.value).find('aa->t2 seed 1 failed') >= 0

    def test_incomplete_cells(self):
        """Test the incomplete-cell listing of complete and thin matrices"""
        table = {'aa': {'t1': 0.9}, 'bb': {'t1': 0.5}}
        assert analysis.incomplete_cells(_matrix(table)) == []
        assert analysis.incomplete_cells(_matrix(table, n_seeds=1)) == [
            'aa->t1 has 1 of 2 seeds', 'bb->t1 has 1 of 2 seeds']
        assert analysis.incomplete_cells(_matrix(table, n_seeds=2),
                                         min_seeds=3) == [
            'aa->t1 has 2 of 3 seeds', 'bb->t1 has 2 of 3 seeds']

    def test_report_files(self):
        """Test the verdict table and chain file"""
        matrix = _matrix({'hi': {'t1': 0.9, 't2': 0.9},
                          'lo': {'t1': 0.1, 't2': 0.1}})
        report = analysis.full_order_report(matrix)
        fd, fname = tempfile.mkstemp(suffix='.txt')
        os.close(fd)
        try:
            analysis.save_verdicts(report, fname)
            table = np.loadtxt(fname, dtype=str, ndmin=2)
            np.testing.assert_array_equal(table[0, :3], ['hi', 'lo',
                                                         'greater'])
            assert table.shape == (1, 5)

            analysis.save_chain(report, fname)
            with open(fname, 'r', encoding='utf-8') as fin:
                assert fin.readline().strip() == 'hi > lo'
                assert fin.read().split('\n')[-2] == 'chain: hi > lo'
        finally:
            os.remove(fname)


class TestPublishedTables:
    def setup_method(self):
        """Runs before every method to create a clean testing setup"""
        self.referential = ['refer2', 'refer10', 'refer100', 'refer1000',
                            'refer2500', 'refer5000', 'refer7500',
                            'refer10000']

    def teardown_method(self):
        """Runs after every method to clean up previous testing"""
        del self.referential

    def test_load_table(self):
        """Test the packaged transfer table"""
        sources, targets, means, stds = analysis.load_published_table()
        assert sources == self.referential + ['recon']
        assert targets == self.referential + ['recon']
        assert means.shape == (9, 9) and stds.shape == (9, 9)
        np.testing.assert_allclose(means[0, 0], 0.9936)
        np.testing.assert_allclose(stds[-1, -1], 0.0356)
        np.testing.assert_allclose(stds[5, 3], 0.0050)

    def test_load_message_types(self):
        """Test the packaged message-type statistics"""
        published = analysis.load_published_message_types()
        np.testing.assert_allclose(published['refer2']['types_mean'],
                                   2872.18)
        np.testing.assert_allclose(published['refer10000']['mi_mean'],
                                   90533.06)
        assert np.isnan(published['refer2']['mi_mean'])

    def test_replay_statistics(self):
        """Test that replayed seeds reproduce the published mean and std"""
        _, _, means, stds = analysis.load_published_table()
        matrix = analysis.replay_published_table()
        summary = matrix.aggregate()
        mean, std, num = summary[('refer100', 'refer1000')]
        np.testing.assert_allclose([mean, std], [means[2, 3], stds[2, 3]],
                                   rtol=1.0e-10)
        assert num == 6
        assert matrix.metric('recon') == '1-bce'

    def test_replay_chain(self):
        """Test the chain of the referential sources on the replayed table"""
        report = analysis.full_order_report(
            analysis.replay_published_table(), sources=self.referential)
        assert report.chain == ''.join(['refer1000 ≈ refer2500 ≈ refer5000',
                                        ' > refer7500 ≈ refer10000',
                                        ' > refer100 > refer10 > refer2'])
        for chain in report.chains:
            assert all(report.verdict(aa, bb).relation == 'greater'
                       for ia, aa in enumerate(chain) for bb in chain[ia + 1:])
        assert set().union(*report.chains) == set(self.referential)

    def test_replay_recon(self):
        """Test that recon beats refer1000 through its own target only"""
        verdict = analysis.expressivity_partial_order(
            analysis.replay_published_table(), 'refer1000', 'recon')
        assert verdict.relation == 'less'
        assert [ev.target for ev in verdict.evidence
                if ev.direction != 'equal'] == ['recon']
        recon = [ev for ev in verdict.evidence if ev.target == 'recon'][0]
        assert recon.direction == 'less'

    def test_random_replay(self):
        """Test the robust relations over random seed draws"""
        rng = np.random.default_rng(2023)
        pairs = [('refer10', 'refer2'), ('refer100', 'refer10'),
                 ('refer1000', 'refer100'), ('refer10000', 'refer100'),
                 ('refer1000', 'refer10000')]
        hits = dict((pair, 0) for pair in pairs)
        n_draws = 100
        for _ in range(n_draws):
            matrix = analysis.replay_published_table(rng=rng)
            for pair in pairs:
                verdict = analysis.expressivity_partial_order(matrix, *pair)
                hits[pair] += verdict.relation == 'greater'

        for pair in pairs:
            assert hits[pair] >= 0.8 * n_draws, pair

    def test_replay_too_few_seeds(self):
        """Test rejection of a single replayed seed"""
        with pytest.raises(ValueError):
            analysis.replay_published_table(n_seeds=1)


class TestMutualInformation:
    def test_bijective(self):
        """Test the maximum for an injective language"""
        messages = np.arange(10000).reshape(-1, 1)
        np.testing.assert_allclose(
            analysis.paper_mutual_information(messages),
            10000 * np.log(10000), rtol=1.0e-12)
        np.testing.assert_allclose(
            analysis.paper_mutual_information(messages), 92103.4, atol=0.05)

    def test_constant(self):
        """Test zero information for a constant language"""
        messages = np.zeros((50, 3), dtype=int)
        assert analysis.paper_mutual_information(messages) == 0.0
        assert analysis.entropy_mi_oracle(messages) == 0.0

    def test_four_meanings(self):
        """Test the language (m1, m1, m2, m3)"""
        messages = [[1], [1], [2], [3]]
        np.testing.assert_allclose(
            analysis.paper_mutual_information(messages), 6 * np.log(2),
            rtol=1.0e-12)
        np.testing.assert_allclose(
            analysis.paper_mutual_information(messages), 4.1589, atol=1.0e-4)

    def test_oracle_agreement(self):
        """Test the brute-force oracle on random small languages"""
        rng = np.random.default_rng(11)
        for _ in range(1000):
            size = int(rng.integers(1, 40))
            messages = rng.integers(int(rng.integers(1, 4)),
                                    size=(size, int(rng.integers(1, 3))))
            np.testing.assert_allclose(
                analysis.entropy_mi_oracle(messages),
                analysis.paper_mutual_information(messages), rtol=1.0e-6,
                atol=1.0e-9)

    def test_language_object(self):
        """Test calling with an EmergentLanguage"""
        spec = meaning.AttributeSpec(2, 3)
        lang = _language(np.arange(9) % 3, spec)
        np.testing.assert_allclose(analysis.paper_mutual_information(lang),
                                   9 * np.log(3))

    def test_mi_curve(self):
        """Test the per-epoch information curve"""
        runs = [[trainer.EpochDiagnostics(ee, 0.0, 0.0, 3, float(ee + ss))
                 for ee in range(1, 4)] for ss in (0, 2)]
        curve = analysis.mi_curve(runs)
        np.testing.assert_allclose(curve.mean, [2.0, 3.0, 4.0])
        np.testing.assert_allclose(curve.std, 1.0)


class TestDegeneracy:
    def test_percentiles(self):
        """Test linear-interpolation percentiles of message-type counts"""
        report = analysis.degeneracy_report({'g': [100, 200, 300, 400]})['g']
        assert report.mean == 250.0
        assert (report.p25, report.p75) == (175.0, 325.0)

        # interpolate order statistics by hand
        counts = np.sort([100, 200, 300, 400]).astype(float)
        for frac, value in [(0.25, report.p25), (0.75, report.p75)]:
            pos = frac * (counts.size - 1)
            low = int(np.floor(pos))
            expect = counts[low] + (pos - low) * (counts[min(low + 1, 3)] -
                                                  counts[low])
            assert value == expect

    def test_permutation_invariant(self):
        """Test that seed order does not matter"""
        rep1 = analysis.degeneracy_report({'g': [5, 9, 1, 7, 3]})['g']
        rep2 = analysis.degeneracy_report({'g': [9, 3, 7, 1, 5]})['g']
        assert (rep1.mean, rep1.p25, rep1.p75) == \
            (rep2.mean, rep2.p25, rep2.p75)

    def test_bijective_group(self):
        """Test identical injective languages"""
        spec = meaning.AttributeSpec(2, 3)
        langs = [_language(np.arange(9), spec) for _ in range(3)]
        report = analysis.degeneracy_report({'recon': langs})['recon']
        assert report.mean == 9.0 and report.p25 == report.p75 == 9.0
        assert report.counts == (9, 9, 9)

    def test_empty_group(self):
        """Test rejection of a group without languages"""
        with pytest.raises(ValueError):
            analysis.degeneracy_report({'g': []})

    def test_collapse_curve(self):
        """Test across-seed statistics and truncation"""
        runs = [[trainer.EpochDiagnostics(ee, 0.0, 0.0, 10 - ee, 0.0)
                 for ee in range(1, nn)] for nn in (5, 4)]
        curve = analysis.collapse_curve(runs)
        np.testing.assert_array_equal(curve.epochs, [1, 2, 3])
        np.testing.assert_allclose(curve.mean, [9, 8, 7])
        np.testing.assert_allclose(curve.std, 0.0)
        assert curve.n_runs == 2

    def test_empty_curve(self):
        """Test rejection of empty diagnostics"""
        with pytest.raises(ValueError):
            analysis.collapse_curve([])
        with pytest.raises(ValueError):
            analysis.collapse_curve([[]])


class TestComponents:
    def setup_method(self):
        """Runs before every method to create a clean testing setup"""
        self.spec = meaning.AttributeSpec(2, 3)
        # meanings (0,0), (0,1) and (0,2) share message 0
        self.messages = np.array([0, 0, 0, 3, 4, 5, 6, 7, 8])

    def teardown_method(self):
        """Runs after every method to clean up previous testing"""
        del self.spec, self.messages

    def test_single_component(self):
        """Test a three-meaning component one attribute apart"""
        comps = analysis.degenerate_component_analysis(
            _language(self.messages, self.spec))
        assert len(comps) == 1
        assert comps[0].meanings == (0, 1, 2)
        assert comps[0].size == 3
        np.testing.assert_allclose(comps[0].mean_distance, 1.0)
        np.testing.assert_allclose(comps[0].mean_euclidean, np.sqrt(2))

    def test_pair(self):
        """Test two meanings differing in every attribute"""
        self.messages[[0, 8]] = 9
        self.messages[[1, 2]] = [1, 2]
        comps = analysis.degenerate_component_analysis(
            _language(self.messages, self.spec))
        assert comps[0].meanings == (0, 8)
        np.testing.assert_allclose(comps[0].mean_distance, 2.0)

    def test_injective(self):
        """Test that an injective language has no components"""
        assert analysis.degenerate_component_analysis(
            _language(np.arange(9), self.spec)) == []

    def test_order_and_top_k(self):
        """Test ordering by size with ties broken by message"""
        messages = np.array([5, 5, 2, 2, 7, 7, 7, 1, 0])
        comps = analysis.degenerate_component_analysis(
            _language(messages, self.spec), top_k=2)
        assert [cc.message for cc in comps] == [(7,), (2,)]

    def test_relabeling_invariant(self):
        """Test that renaming tokens keeps the distances"""
        relabeled = (self.messages + 4) % 9
        comps1 = analysis.degenerate_component_analysis(
            _language(self.messages, self.spec))
        comps2 = analysis.degenerate_component_analysis(
            _language(relabeled, self.spec))
        assert [cc.mean_distance for cc in comps1] == \
            [cc.mean_distance for cc in comps2]

    def test_distance_shift(self):
        """Test the mean component distance before and after training"""
        initial = _language(np.arange(9), self.spec)
        final = _language(self.messages, self.spec)
        before, after = analysis.component_distance_shift(initial, final)
        assert np.isnan(before)
        assert after == 1.0
