# -*- coding: utf-8 -*-
"""Static figures of transfer performance, degeneracy and training curves.

Every figure function writes the image and, next to it, a plain-text table
with the plotted values (same name, ``.txt`` suffix).

"""

import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

import elexpress  # noqa: E402


def _table_name(fname):
    return os.path.splitext(fname)[0] + '.txt'


def _save(fig, fname, rows, names):
    fig.savefig(fname, dpi=150, bbox_inches='tight')
    plt.close(fig)

    table = np.array(rows, dtype=str).reshape(-1, len(names))
    np.savetxt(_table_name(fname), table, fmt='%s', header=' '.join(names))
    elexpress.logger.info('wrote figure {:} and its data table'.format(fname))

    return fname, _table_name(fname)


def plot_source_over_targets(matrix, fname):
    """One line per source language across the target games

    Parameters
    ----------
    matrix : (TransferMatrix)
        Per-seed transfer performance
    fname : (str)
        Image filename

    Returns
    -------
    paths : (tuple)
        Image and data-table filenames

    Notes
    -----
    Accuracy of referential targets uses the left axis; 1 - BCE of the
    reconstruction target uses the right axis.

    """
    summary = matrix.aggregate()
    refer = [tt for tt in matrix.targets if matrix.metric(tt) == 'accuracy']
    recon = [tt for tt in matrix.targets if matrix.metric(tt) != 'accuracy']

    fig, ax_acc = plt.subplots(figsize=(9, 5))
    ax_bce = ax_acc.twinx()
    rows = list()
    for source in matrix.sources:
        means = [summary[(source, tt)][0] for tt in refer]
        stds = [summary[(source, tt)][1] for tt in refer]
        line, = ax_acc.plot(np.arange(len(refer)), means, 'o-', label=source)
        ax_acc.fill_between(np.arange(len(refer)),
                            np.subtract(means, np.nan_to_num(stds)),
                            np.add(means, np.nan_to_num(stds)),
                            color=line.get_color(), alpha=0.12)
        for itgt, target in enumerate(recon):
            mean, std, _ = summary[(source, target)]
            ax_bce.errorbar(len(refer) + itgt, mean,
                            yerr=0.0 if np.isnan(std) else std, fmt='s',
                            color=line.get_color())
        for target in refer + recon:
            mean, std, nseed = summary[(source, target)]
            rows.append([source, target, matrix.metric(target),
                         '{:.6g}'.format(mean), '{:.6g}'.format(std),
                         str(nseed)])

    ax_acc.set_xticks(np.arange(len(refer) + len(recon)))
    ax_acc.set_xticklabels(refer + recon, rotation=30)
    ax_acc.set_xlabel('target game')
    ax_acc.set_ylabel('accuracy')
    ax_bce.set_ylabel('1 - BCE')
    ax_acc.legend(fontsize=8, loc='lower left')
    ax_acc.grid(True, alpha=0.15)

    return _save(fig, fname, rows, ['source', 'target', 'metric', 'mean',
                                    'std', 'n_seeds'])


def plot_target_over_sources(matrix, fname):
    """One panel line per target game across the source languages"""
    summary = matrix.aggregate()
    sources = matrix.sources

    fig, ax = plt.subplots(figsize=(9, 5))
    rows = list()
    for target in matrix.targets:
        means = np.array([summary[(ss, target)][0] for ss in sources])
        stds = np.nan_to_num([summary[(ss, target)][1] for ss in sources])
        ax.errorbar(np.arange(len(sources)), means, yerr=stds, marker='o',
                    capsize=3, label='{:s} ({:s})'.format(
                        target, matrix.metric(target)))
        for source, mean, std in zip(sources, means, stds):
            rows.append([target, source, '{:.6g}'.format(mean),
                         '{:.6g}'.format(std)])

    ax.set_xticks(np.arange(len(sources)))
    ax.set_xticklabels(sources, rotation=30)
    ax.set_xlabel('source language')
    ax.set_ylabel('generalisation performance')
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.15)

    return _save(fig, fname, rows, ['target', 'source', 'mean', 'std'])


def plot_degenerate_components(components, fname):
    """Mean meaning distance of the top components before and after training

    Parameters
    ----------
    components : (dict)
        (initial, final) pairs of DegenerateComponent lists keyed by game
    fname : (str)
        Image filename

    """
    games = list(components)
    fig, axes = plt.subplots(len(games), 1, figsize=(8, 2.8 * len(games)),
                             squeeze=False)
    rows = list()
    width = 0.4
    for ax, game in zip(axes[:, 0], games):
        for offset, stage, comps in ((-width / 2, 'initial',
                                      components[game][0]),
                                     (width / 2, 'final',
                                      components[game][1])):
            xpos = np.arange(len(comps)) + offset
            dists = [cc.mean_distance for cc in comps]
            bars = ax.bar(xpos, dists, width, label=stage)
            for bar, comp in zip(bars, comps):
                ax.annotate('{:d}'.format(comp.size),
                            (bar.get_x() + bar.get_width() / 2,
                             bar.get_height()), ha='center', va='bottom',
                            fontsize=7)
            for rank, comp in enumerate(comps):
                rows.append([game, stage, str(rank), str(comp.size),
                             '{:.6f}'.format(comp.mean_distance)])
        ax.set_title(game, fontsize=10)
        ax.set_ylabel('mean distance')
        ax.legend(fontsize=8)
    axes[-1, 0].set_xlabel('component rank (bar labels: meanings)')

    return _save(fig, fname, rows, ['game', 'stage', 'rank', 'size',
                                    'mean_distance'])


def _plot_curves(curves, fname, ylabel):
    fig, ax = plt.subplots(figsize=(8, 5))
    rows = list()
    for label, curve in curves.items():
        line, = ax.plot(curve.epochs, curve.mean, label=label)
        ax.fill_between(curve.epochs, curve.mean - curve.std,
                        curve.mean + curve.std, color=line.get_color(),
                        alpha=0.15)
        for epoch, mean, std in zip(curve.epochs, curve.mean, curve.std):
            rows.append([label, str(int(epoch)), '{:.6g}'.format(mean),
                         '{:.6g}'.format(std)])

    ax.set_xlabel('epoch')
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.15)

    return _save(fig, fname, rows, ['game', 'epoch', 'mean', 'std'])


def plot_collapse_curves(curves, fname):
    """Message-type count over epochs, CurveSeries keyed by game"""
    return _plot_curves(curves, fname, 'message types')


def plot_mi_curves(curves, fname):
    """Mutual information over epochs, CurveSeries keyed by game"""
    return _plot_curves(curves, fname, 'mutual information (nats)')
