# -*- coding: utf-8 -*-
"""Expressivity partial order, degeneracy, mutual information and
degenerate-component structure of emergent languages.

Languages are any objects carrying ``meanings`` and ``messages`` arrays and
an ``attribute_spec``, as produced by :mod:`elexpress.trainer`.

"""

from collections import Counter, OrderedDict, namedtuple
from dataclasses import dataclass, field
from math import log

import numpy as np
from scipy import stats
from scipy.spatial.distance import pdist

import elexpress

RELATIONS = ('greater', 'less', 'equal', 'incomparable')
SIGNIFICANCE_TESTS = ('welch', 'mannwhitney')

TargetEvidence = namedtuple('TargetEvidence', ['target', 'mean_a', 'mean_b',
                                               'p_value', 'direction'])
CurveSeries = namedtuple('CurveSeries', ['epochs', 'mean', 'std', 'n_runs'])


@dataclass(frozen=True)
class OrderVerdict:
    """Expressivity relation of source A to source B

    Parameters
    ----------
    source_a : (str)
        Game id of the first source
    source_b : (str)
        Game id of the second source
    relation : (str)
        One of 'greater', 'less', 'equal' or 'incomparable'
    evidence : (tuple)
        TargetEvidence for every target game

    """
    source_a: str
    source_b: str
    relation: str
    evidence: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError('unknown relation {:}'.format(self.relation))


@dataclass(frozen=True)
class OrderReport:
    """Pairwise verdicts, their levels and maximal chains

    Notes
    -----
    ``chain`` summarises the levels, joined by ' > ' with the members of a
    level joined by ' ≈ '.  Members of one level need not be equal, and a
    member of a higher level need not beat every member below it.  Each of
    the maximal chains in ``chains`` is totally ordered by 'greater'.

    """
    sources: tuple
    verdicts: OrderedDict = field(repr=False)
    levels: tuple
    chain: str
    incomparable: tuple
    chains: tuple = ()

    def verdict(self, source_a, source_b):
        """Verdict of A against B, in either storage order"""
        if (source_a, source_b) in self.verdicts:
            return self.verdicts[(source_a, source_b)]
        return _invert(self.verdicts[(source_b, source_a)])


@dataclass(frozen=True)
class DegeneracyReport:
    """Message-type counts of one source game over seeds"""
    game: str
    counts: tuple
    mean: float
    p25: float
    p75: float


@dataclass(frozen=True)
class DegenerateComponent:
    """Group of two or more meanings sharing one message

    Parameters
    ----------
    message : (tuple)
        Shared message tokens
    meanings : (tuple)
        Canonical indices of the meanings, ascending
    mean_distance : (float)
        Mean attribute (Hamming) distance over all meaning pairs
    mean_euclidean : (float)
        Mean Euclidean distance between flat forms over all pairs

    """
    message: tuple
    meanings: tuple
    mean_distance: float
    mean_euclidean: float

    @property
    def size(self):
        return len(self.meanings)


def significance_test(sample_a, sample_b, test='welch'):
    """Two-sided p-value for a difference between two samples

    Parameters
    ----------
    sample_a : (array-like)
        Per-seed values of the first group
    sample_b : (array-like)
        Per-seed values of the second group
    test : (str)
        'welch' for Welch's unequal-variance t-test or 'mannwhitney' for the
        Mann-Whitney U test (default='welch')

    Returns
    -------
    p_value : (float)
        1.0 when the test is undefined, e.g. two identical constant samples

    """
    if test not in SIGNIFICANCE_TESTS:
        raise ValueError('unknown significance test {:}; choose from '
                         '{:}'.format(test, ', '.join(SIGNIFICANCE_TESTS)))

    if test == 'welch':
        _, p_value = stats.ttest_ind(sample_a, sample_b, equal_var=False)
    else:
        _, p_value = stats.mannwhitneyu(sample_a, sample_b,
                                        alternative='two-sided')

    if not np.isfinite(p_value):
        elexpress.logger.warning('significance test undefined for '
                                 'zero-variance samples, using p = 1')
        return 1.0

    return float(p_value)


def _invert(verdict):
    flip = {'greater': 'less', 'less': 'greater'}
    evidence = tuple(TargetEvidence(ev.target, ev.mean_b, ev.mean_a,
                                    ev.p_value, flip.get(ev.direction,
                                                         ev.direction))
                     for ev in verdict.evidence)
    return OrderVerdict(verdict.source_b, verdict.source_a,
                        flip.get(verdict.relation, verdict.relation),
                        evidence)


def expressivity_partial_order(matrix, source_a, source_b, alpha=0.05,
                               test='welch', targets=None):
    """Compare the expressivity of two source languages

    Parameters
    ----------
    matrix : (TransferMatrix)
        Per-seed transfer performance
    source_a : (str)
        Game id of language A
    source_b : (str)
        Game id of language B
    alpha : (float)
        Significance level per target game (default=0.05)
    test : (str)
        Two-sample test, see significance_test (default='welch')
    targets : (list or NoneType)
        Target games to compare on, None for every target (default=None)

    Returns
    -------
    verdict : (OrderVerdict)
        'greater' when A is significantly better on at least one target and
        significantly worse on none, 'less' symmetrically, 'equal' when no
        target is significant, 'incomparable' when both directions occur

    Raises
    ------
    ValueError if either source has fewer than 2 seeds on a target

    """
    if targets is None:
        targets = matrix.targets

    evidence = list()
    for target in targets:
        vals_a = matrix.values(source_a, target)
        vals_b = matrix.values(source_b, target)
        if vals_a.size < 2 or vals_b.size < 2:
            raise ValueError(''.join(['need at least 2 seeds per source on ',
                                      '{:s}, got {:d} '.format(target,
                                                               vals_a.size),
                                      'for {:s} and {:d} for {:s}'.format(
                                          source_a, vals_b.size,
                                          source_b)]))

        p_value = significance_test(vals_a, vals_b, test)
        mean_a, mean_b = float(np.mean(vals_a)), float(np.mean(vals_b))
        if p_value < alpha and mean_a != mean_b:
            direction = 'greater' if mean_a > mean_b else 'less'
        else:
            direction = 'equal'
        evidence.append(TargetEvidence(target, mean_a, mean_b, p_value,
                                       direction))

    better = any(ev.direction == 'greater' for ev in evidence)
    worse = any(ev.direction == 'less' for ev in evidence)
    if better and worse:
        relation = 'incomparable'
    elif better:
        relation = 'greater'
    elif worse:
        relation = 'less'
    else:
        relation = 'equal'

    return OrderVerdict(source_a, source_b, relation, tuple(evidence))


def order_levels(verdicts, sources):
    """Group sources by their depth in the 'greater' relation

    Parameters
    ----------
    verdicts : (dict)
        OrderVerdict keyed by (source_a, source_b)
    sources : (list)
        Sources to arrange

    Returns
    -------
    levels : (tuple)
        Tuples of sources; level 0 holds the sources nothing beats, every
        other source sits one level below the deepest source that beats it

    """
    above = {ss: set() for ss in sources}
    for (aa, bb), verdict in verdicts.items():
        if verdict.relation == 'greater':
            above[bb].add(aa)
        elif verdict.relation == 'less':
            above[aa].add(bb)

    depth = {ss: 0 for ss in sources}
    for _ in range(len(sources)):
        changed = False
        for ss in sources:
            new = max([depth[aa] + 1 for aa in above[ss]], default=0)
            if new != depth[ss] and new < len(sources):
                depth[ss] = new
                changed = True
        if not changed:
            break

    n_levels = max(depth.values(), default=-1) + 1
    return tuple(tuple(ss for ss in sources if depth[ss] == ll)
                 for ll in range(n_levels))


def maximal_chains(verdicts, sources):
    """Maximal chains of the 'greater' relation

    Parameters
    ----------
    verdicts : (dict)
        OrderVerdict keyed by (source_a, source_b)
    sources : (list)
        Sources to arrange

    Returns
    -------
    chains : (tuple)
        Tuples of sources, most expressive first, in which every member is
        'greater' than each member after it and to which no source can be
        added; a source comparable to nothing forms a chain of its own

    """
    beats = {ss: set() for ss in sources}
    for (aa, bb), verdict in verdicts.items():
        if verdict.relation == 'greater':
            beats[aa].add(bb)
        elif verdict.relation == 'less':
            beats[bb].add(aa)

    found = list()

    def _extend(chain):
        below = [ss for ss in sources if all(ss in beats[cc] for cc in chain)]
        if len(below) == 0:
            found.append(tuple(chain))
        for ss in below:
            _extend(chain + [ss])

    for ss in sources:
        _extend([ss])

    members = [frozenset(chain) for chain in found]
    return tuple(chain for chain, mm in zip(found, members)
                 if not any(mm < other for other in members))


def incomplete_cells(matrix, sources=None, min_seeds=2):
    """Describe the matrix cells that keep sources from being compared

    Parameters
    ----------
    matrix : (TransferMatrix)
        Per-seed transfer performance
    sources : (list or NoneType)
        Sources to check, None for every source (default=None)
    min_seeds : (int)
        Valid seeds a (source, target) group needs (default=2)

    Returns
    -------
    cells : (list)
        'source->target seed k' for every absent cell, then
        'source->target seed k failed' for every failed cell of a group
        left with fewer than min_seeds valid values

    """
    if sources is None:
        sources = matrix.sources

    absent = matrix.missing(sources, matrix.targets, matrix.seeds)
    cells = ['{:s}->{:s} seed {:d}'.format(*cell) for cell in absent]
    failed = matrix.failed_cells()
    for source in sources:
        for target in matrix.targets:
            n_valid = matrix.values(source, target).size
            if n_valid >= min_seeds:
                continue
            lost = ['{:s}->{:s} seed {:d} failed'.format(ss, tt, kk)
                    for ss, tt, kk in failed
                    if ss == source and tt == target]
            if len(lost) == 0 and not any(ss == source and tt == target
                                          for ss, tt, _ in absent):
                lost = ['{:s}->{:s} has {:d} of {:d} seeds'.format(
                    source, target, n_valid, min_seeds)]
            cells.extend(lost)

    return cells


def full_order_report(matrix, alpha=0.05, sources=None, test='welch'):
    """Pairwise verdicts of every source pair, their levels and chains

    Parameters
    ----------
    matrix : (TransferMatrix)
        Per-seed transfer performance
    alpha : (float)
        Significance level per target (default=0.05)
    sources : (list or NoneType)
        Sources to compare, None for every source (default=None)
    test : (str)
        Two-sample test (default='welch')

    Returns
    -------
    report : (OrderReport)
        Verdicts for every ordered pair (A before B in source order), the
        levels, the chain string summarising the levels with levels joined
        by ' > ' and members by ' ≈ ', the incomparable pairs and the
        maximal chains of the 'greater' relation, see maximal_chains

    Raises
    ------
    ValueError listing the cells when any are missing or a source is left
    with fewer than 2 valid seeds on a target, see incomplete_cells

    """
    if sources is None:
        sources = matrix.sources
    sources = list(sources)

    incomplete = incomplete_cells(matrix, sources)
    if len(incomplete) > 0:
        estr = 'transfer matrix is incomplete, missing cells: {:}'.format(
            ', '.join(incomplete))
        elexpress.logger.error(estr)
        raise ValueError(estr)

    verdicts = OrderedDict()
    for ia, source_a in enumerate(sources):
        for source_b in sources[ia + 1:]:
            verdicts[(source_a, source_b)] = expressivity_partial_order(
                matrix, source_a, source_b, alpha=alpha, test=test)

    levels = order_levels(verdicts, sources)
    chain = ' > '.join([' ≈ '.join(level) for level in levels])
    incomparable = tuple(key for key, verdict in verdicts.items()
                         if verdict.relation == 'incomparable')

    return OrderReport(tuple(sources), verdicts, levels, chain, incomparable,
                       maximal_chains(verdicts, sources))


def _message_rows(lang):
    messages = getattr(lang, 'messages', lang)
    return np.asarray(messages).reshape(len(messages), -1)


def paper_mutual_information(lang):
    """Mutual information between meanings and messages, scaled by |X|

    Parameters
    ----------
    lang : (EmergentLanguage or array-like)
        Language, or its (|X|, length) message array

    Returns
    -------
    mi : (float)
        sum over meanings x of ln|X| - ln f(L(x)), f the message frequency;
        |X| ln|X| for an injective language and 0 for a constant one

    """
    messages = _message_rows(lang)
    if messages.shape[0] == 0:
        return 0.0

    _, counts = np.unique(messages, axis=0, return_counts=True)
    counts = counts.astype(float)
    return float(np.sum(counts * (np.log(messages.shape[0]) -
                                  np.log(counts))))


def entropy_mi_oracle(lang):
    """Brute-force N * I(X; M) from the empirical joint distribution

    Parameters
    ----------
    lang : (EmergentLanguage or array-like)
        Language, or its (|X|, length) message array

    Returns
    -------
    mi : (float)
        Equal to paper_mutual_information for every total language

    """
    messages = [tuple(row) for row in _message_rows(lang).tolist()]
    num_samples = len(messages)
    if num_samples == 0:
        return 0.0

    xm_count = Counter()
    x_count = Counter()
    m_count = Counter()
    for meaning, message in enumerate(messages):
        xm_count[(meaning, message)] += 1
        x_count[meaning] += 1
        m_count[message] += 1

    mi = 0.0
    for (meaning, message), count in xm_count.items():
        prob_xm = count / num_samples
        pmi = log(float(count) * num_samples / x_count[meaning] /
                  m_count[message])
        mi += prob_xm * pmi

    return num_samples * mi


def degeneracy_report(groups):
    """Message-type statistics per source game

    Parameters
    ----------
    groups : (dict)
        Lists of languages, or of message-type counts, keyed by game id

    Returns
    -------
    reports : (OrderedDict)
        DegeneracyReport keyed by game id; percentiles interpolate linearly
        between order statistics

    """
    reports = OrderedDict()
    for game, langs in groups.items():
        if len(langs) == 0:
            raise ValueError('no languages for {:}'.format(game))

        counts = np.array([item if np.isscalar(item) else
                           np.unique(_message_rows(item), axis=0).shape[0]
                           for item in langs], dtype=float)
        p25, p75 = np.percentile(counts, [25, 75])
        reports[game] = DegeneracyReport(game, tuple(counts.astype(int)),
                                         float(np.mean(counts)), float(p25),
                                         float(p75))

    return reports


def _attributes(lang):
    spec = lang.attribute_spec
    powers = spec.n_values ** np.arange(spec.n_attributes - 1, -1, -1)
    meanings = np.asarray(lang.meanings)
    return (meanings[:, np.newaxis] // powers) % spec.n_values


def degenerate_component_analysis(lang, top_k=10):
    """The largest many-to-one groups of a language

    Parameters
    ----------
    lang : (EmergentLanguage)
        Total language
    top_k : (int)
        Number of components to return (default=10)

    Returns
    -------
    components : (list)
        DegenerateComponent objects ordered by decreasing size, ties by the
        lexicographic order of the message; empty for injective languages

    """
    messages = _message_rows(lang)
    if messages.shape[0] == 0:
        return list()

    types, inverse, counts = np.unique(messages, axis=0, return_inverse=True,
                                       return_counts=True)
    inverse = np.asarray(inverse).reshape(-1)
    attributes = _attributes(lang)
    n_attributes = attributes.shape[1]

    # np.unique sorts types lexicographically, so a stable sort on size
    # keeps message order among ties
    order = np.argsort(-counts, kind='stable')
    components = list()
    for itype in order[:top_k]:
        if counts[itype] < 2:
            break
        rows = np.flatnonzero(inverse == itype)
        hamming = pdist(attributes[rows], 'hamming') * n_attributes
        components.append(DegenerateComponent(
            tuple(int(tt) for tt in types[itype]),
            tuple(int(mm) for mm in np.sort(np.asarray(lang.meanings)[rows])),
            float(np.mean(hamming)), float(np.mean(np.sqrt(2.0 * hamming)))))

    return components


def component_distance_shift(initial_lang, final_lang, top_k=10):
    """Mean top-k component distance before and after training

    Returns
    -------
    initial : (float)
        Mean of the component mean distances of the initial language, NaN
        when it has no degenerate component
    final : (float)
        Same for the final language

    """
    means = list()
    for lang in (initial_lang, final_lang):
        comps = degenerate_component_analysis(lang, top_k)
        means.append(float(np.mean([cc.mean_distance for cc in comps]))
                     if comps else np.nan)

    return tuple(means)


def _curve(runs, attr):
    runs = [list(run) for run in runs]
    if len(runs) == 0 or any(len(run) == 0 for run in runs):
        raise ValueError('need at least one non-empty diagnostics series')

    n_epochs = min(len(run) for run in runs)
    table = np.array([[getattr(dd, attr) for dd in run[:n_epochs]]
                      for run in runs], dtype=float)
    epochs = np.array([dd.epoch for dd in runs[0][:n_epochs]])

    return CurveSeries(epochs, table.mean(axis=0), table.std(axis=0),
                       len(runs))


def collapse_curve(runs):
    """Per-epoch message-type count across seeds

    Parameters
    ----------
    runs : (list)
        One list of EpochDiagnostics per seed; longer runs are truncated to
        the shortest

    Returns
    -------
    curve : (CurveSeries)
        epochs, mean, population standard deviation and number of runs

    Raises
    ------
    ValueError for empty input

    """
    return _curve(runs, 'message_types')


def mi_curve(runs):
    """Per-epoch mutual information across seeds, see collapse_curve"""
    return _curve(runs, 'mutual_information')


def load_published_table(fname=None):
    """Read the published transfer means and standard deviations

    Parameters
    ----------
    fname : (str or NoneType)
        Table file, None for elexpress.PUBLISHED_TRANSFER_TABLE
        (default=None)

    Returns
    -------
    sources : (list)
        Source game ids, row order
    targets : (list)
        Target game ids, column order
    means : (np.ndarray)
        (sources, targets) means
    stds : (np.ndarray)
        (sources, targets) standard deviations

    """
    if fname is None:
        fname = elexpress.PUBLISHED_TRANSFER_TABLE

    targets = None
    with open(fname, 'r') as fin:
        for line in fin:
            if line.startswith('# source statistic'):
                targets = line.split()[3:]
    if targets is None:
        raise ValueError('no column header in {:}'.format(fname))

    table = np.loadtxt(fname, dtype=str, ndmin=2)
    sources = list(OrderedDict.fromkeys(table[:, 0]))
    means = np.full(shape=(len(sources), len(targets)), fill_value=np.nan)
    stds = np.full(shape=means.shape, fill_value=np.nan)
    for row in table:
        dest = means if row[1] == 'mean' else stds
        dest[sources.index(row[0])] = row[2:].astype(float)

    return sources, targets, means, stds


def load_published_message_types(fname=None):
    """Read the published message-type and mutual-information statistics

    Returns
    -------
    stats : (OrderedDict)
        Dict of types_mean, types_p25, types_p75, mi_mean and mi_std keyed
        by game id

    """
    if fname is None:
        fname = elexpress.PUBLISHED_MESSAGE_TYPES

    table = np.loadtxt(fname, dtype=str, ndmin=2)
    names = ['types_mean', 'types_p25', 'types_p75', 'mi_mean', 'mi_std']
    return OrderedDict((row[0], dict(zip(names, row[1:].astype(float))))
                       for row in table)


def replay_published_table(n_seeds=6, rng=None, fname=None):
    """Build a per-seed transfer matrix from published means and deviations

    Parameters
    ----------
    n_seeds : (int)
        Seeds per cell (default=6)
    rng : (np.random.Generator or NoneType)
        Draws Normal(mean, std) samples when given; None uses fixed evenly
        spaced offsets scaled to a sample standard deviation of exactly std
        (default=None)
    fname : (str or NoneType)
        Table file, None for the packaged table (default=None)

    Returns
    -------
    matrix : (TransferMatrix)
        Cells for every published source, target and seed

    """
    from elexpress.transfer import TransferCell, TransferMatrix

    if n_seeds < 2:
        raise ValueError('need at least 2 seeds, got {:}'.format(n_seeds))

    sources, targets, means, stds = load_published_table(fname)
    offsets = np.linspace(-1.5, 1.5, n_seeds)
    offsets /= np.std(offsets, ddof=1)

    matrix = TransferMatrix()
    for isrc, source in enumerate(sources):
        for itgt, target in enumerate(targets):
            metric = '1-bce' if target == 'recon' else 'accuracy'
            draw = offsets if rng is None else rng.standard_normal(n_seeds)
            values = means[isrc, itgt] + stds[isrc, itgt] * draw
            for seed, value in enumerate(values):
                matrix.add(source, target, seed,
                           TransferCell(float(value), metric))

    return matrix


def save_verdicts(report, fname):
    """Write one row per source pair with the per-target p-values"""
    targets = [ev.target for ev in
               next(iter(report.verdicts.values())).evidence] \
        if report.verdicts else list()
    names = ['source_a', 'source_b', 'relation'] + \
        ['p_{:s}'.format(tt) for tt in targets]
    rows = [[vv.source_a, vv.source_b, vv.relation] +
            ['{:.6g}'.format(ev.p_value) for ev in vv.evidence]
            for vv in report.verdicts.values()]
    table = np.array(rows, dtype=str).reshape(-1, len(names))
    np.savetxt(fname, table, fmt='%s', header=' '.join(names))


def save_chain(report, fname):
    """Write the level summary, the incomparable pairs and the maximal chains

    Notes
    -----
    The first line is the level summary.  Incomparable pairs follow as
    'a incomparable b' and maximal chains as 'chain: a > b > c'.

    """
    with open(fname, 'w', encoding='utf-8') as fout:
        fout.write('{:s}\n'.format(report.chain))
        for source_a, source_b in report.incomparable:
            fout.write('{:s} incomparable {:s}\n'.format(source_a, source_b))
        for chain in report.chains:
            fout.write('chain: {:s}\n'.format(' > '.join(chain)))


def save_degeneracy(reports, fname):
    """Write one row per source game: seeds, mean, 25th and 75th percentile"""
    rows = [[rr.game, str(len(rr.counts)), '{:.2f}'.format(rr.mean),
             '{:.2f}'.format(rr.p25), '{:.2f}'.format(rr.p75)]
            for rr in reports.values()]
    table = np.array(rows, dtype=str).reshape(-1, 5)
    np.savetxt(fname, table, fmt='%s', header='game n_seeds mean p25 p75')


def save_mi_report(groups, fname):
    """Write mean and sample standard deviation of the MI per source game

    Parameters
    ----------
    groups : (dict)
        Lists of languages keyed by game id
    fname : (str)
        Output file

    """
    rows = list()
    for game, langs in groups.items():
        values = np.array([paper_mutual_information(lang) for lang in langs])
        std = np.std(values, ddof=1) if values.size > 1 else np.nan
        rows.append([game, str(values.size), '{:.2f}'.format(np.mean(values)),
                     '{:.2f}'.format(std)])
    table = np.array(rows, dtype=str).reshape(-1, 4)
    np.savetxt(fname, table, fmt='%s', header='game n_seeds mean std')


def save_components(components, fname):
    """Write degenerate components, one row each

    Parameters
    ----------
    components : (dict)
        Lists of DegenerateComponent keyed by a (game, seed, stage) tuple,
        stage being 'initial' or 'final'
    fname : (str)
        Output file

    """
    rows = list()
    for (game, seed, stage), comps in components.items():
        for rank, comp in enumerate(comps):
            rows.append([game, str(seed), stage, str(rank), str(comp.size),
                         '{:.6f}'.format(comp.mean_distance),
                         '{:.6f}'.format(comp.mean_euclidean),
                         '-'.join(str(tt) for tt in comp.message)])
    names = ['game', 'seed', 'stage', 'rank', 'size', 'mean_distance',
             'mean_euclidean', 'message']
    table = np.array(rows, dtype=str).reshape(-1, len(names))
    np.savetxt(fname, table, fmt='%s', header=' '.join(names))
