# Author: elexpress developers
# Disclaimer: This code is under the MIT license, whose details can be found at
# the root in the LICENSE file
#
# -*- coding: utf-8 -*-
"""Executed when elexpress is invoked with python -m elexpress"""

import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
import logging
import os
import sys

import elexpress
from elexpress import analysis, plotting
from elexpress.config import (ConfigError, experiment_dir, load_config,
                              PROFILES, profile_config, run_dir)
from elexpress.trainer import (TrainingDivergedError, load_diagnostics,
                               load_language, save_diagnostics, save_run,
                               train_game)
from elexpress.transfer import (load_matrix, run_transfer_experiment,
                                save_matrix, save_matrix_summary)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_MISSING = 4


class MissingInputsError(RuntimeError):
    """Inputs a command needs are absent; lists them in the message"""

    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__('missing inputs: {:}'.format(
            ', '.join(self.missing)))


def _build_config(args):
    """Load the configuration file or the --scale profile with flag overrides"""
    overrides = {'out_dir': args.out, 'workers': args.workers}
    if getattr(args, 'seeds', None) is not None:
        overrides['seeds'] = tuple(args.seeds)
    if getattr(args, 'train_missing', False):
        overrides['train_missing'] = True

    if args.config is not None:
        return load_config(args.config, overrides)

    config = profile_config(args.scale)
    return replace(config, **{key: value for key, value in overrides.items()
                              if value is not None}).validate()


def _train_job(config, game_id, seed):
    """Train one (game, seed) run and store its artifacts"""
    game = config.game(game_id)
    out_dir = run_dir(config, game.name, seed)
    diags = list()
    try:
        result = train_game(config.train_config(game_id, seed), config.space(),
                            on_epoch=diags.append)
    except TrainingDivergedError as err:
        os.makedirs(out_dir, exist_ok=True)
        fname = os.path.join(out_dir, 'diagnostics.txt')
        save_diagnostics(err.diagnostics, fname)
        raise TrainingDivergedError(err.epoch, err.diagnostics, ''.join([
            '{:} (diagnostics written to {:})'.format(err, fname)]))

    return save_run(result, out_dir, seed)


def cmd_train(config, game_ids=None):
    """Train source games for every configured seed

    Parameters
    ----------
    config : (ExperimentConfig)
        Validated configuration
    game_ids : (list or NoneType)
        Games to train, None for the whole roster (default=None)

    Returns
    -------
    paths : (list)
        Artifact dictionaries of the finished runs

    Raises
    ------
    ConfigError for games outside the roster
    TrainingDivergedError when a run diverges

    """
    names = [game.name for _, game in config.games()]
    if game_ids is None:
        game_ids = list(config.roster)
    for gid in game_ids:
        try:
            name = config.game(gid).name
        except ValueError as err:
            raise ConfigError('{:}; valid games are {:}'.format(
                err, ', '.join(names)))
        if name not in names:
            raise ConfigError('game {:} is not in the roster; valid games '
                              'are {:}'.format(gid, ', '.join(names)))

    jobs = [(config, gid, seed) for gid in game_ids for seed in config.seeds]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            paths = list(pool.map(_train_job, *zip(*jobs)))
    else:
        paths = [_train_job(*job) for job in jobs]

    for run in paths:
        elexpress.logger.info('wrote {:}'.format(run['language']))

    return paths


def _language_files(config, fname='language.txt'):
    files = dict()
    for _, game in config.games():
        for seed in config.seeds:
            files[(game.name, seed)] = os.path.join(
                run_dir(config, game.name, seed), fname)
    return files


def _missing(files):
    return [fname for fname in files.values() if not os.path.isfile(fname)]


def cmd_transfer(config):
    """Fill and store the transfer matrix

    Returns
    -------
    paths : (tuple)
        Raw matrix and aggregate summary filenames

    Raises
    ------
    MissingInputsError when source languages are absent and
    config.train_missing is False

    """
    files = _language_files(config)
    missing = [key for key, fname in files.items()
               if not os.path.isfile(fname)]
    if len(missing) > 0:
        if not config.train_missing:
            raise MissingInputsError(['{:s} seed {:d}'.format(*key)
                                      for key in missing])
        for name, seed in missing:
            _train_job(config, name, seed)

    languages = {key: load_language(fname) for key, fname in files.items()}
    games = [game for _, game in config.games()]
    matrix = run_transfer_experiment(
        games, games, config.seeds, config.space(),
        transfer_config=config.transfer_config(), languages=languages,
        workers=config.workers)

    out_dir = experiment_dir(config, 'transfer')
    os.makedirs(out_dir, exist_ok=True)
    paths = (os.path.join(out_dir, 'matrix.txt'),
             os.path.join(out_dir, 'summary.txt'))
    save_matrix(matrix, paths[0])
    save_matrix_summary(matrix, paths[1])
    elexpress.logger.info('wrote {:} and {:}'.format(*paths))

    return paths


def cmd_analyze(config):
    """Write verdicts, chain, degeneracy, MI and component reports

    Returns
    -------
    paths : (list)
        Report filenames

    Raises
    ------
    MissingInputsError when recorded languages are absent or the transfer
    matrix lacks cells the verdicts need

    """
    files = _language_files(config)
    missing = _missing(files)
    if len(missing) > 0:
        raise MissingInputsError(missing)

    groups = dict()
    for (name, _), fname in files.items():
        groups.setdefault(name, list()).append(load_language(fname))

    out_dir = experiment_dir(config, 'analysis')
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, 'degeneracy.txt'),
             os.path.join(out_dir, 'mi.txt')]
    analysis.save_degeneracy(analysis.degeneracy_report(groups), paths[0])
    analysis.save_mi_report(groups, paths[1])

    initial = _language_files(config, 'initial_language.txt')
    if len(_missing(initial)) == 0:
        components = dict()
        for (name, seed), fname in files.items():
            components[(name, seed, 'initial')] = \
                analysis.degenerate_component_analysis(
                    load_language(initial[(name, seed)]), config.top_k)
            components[(name, seed, 'final')] = \
                analysis.degenerate_component_analysis(load_language(fname),
                                                       config.top_k)
        paths.append(os.path.join(out_dir, 'components.txt'))
        analysis.save_components(components, paths[-1])

    fmatrix = os.path.join(experiment_dir(config, 'transfer'), 'matrix.txt')
    if len(groups) < 2:
        elexpress.logger.info('single source language, no verdicts')
    elif not os.path.isfile(fmatrix):
        elexpress.logger.warning('no transfer matrix at {:}, skipping '
                                 'verdicts'.format(fmatrix))
    else:
        matrix = load_matrix(fmatrix)
        incomplete = analysis.incomplete_cells(matrix)
        if len(incomplete) > 0:
            raise MissingInputsError(['{:} cell {:s}'.format(fmatrix, cell)
                                      for cell in incomplete])
        report = analysis.full_order_report(matrix, config.alpha,
                                            test=config.significance_test)
        paths.extend([os.path.join(out_dir, 'verdicts.txt'),
                      os.path.join(out_dir, 'chain.txt')])
        analysis.save_verdicts(report, paths[-2])
        analysis.save_chain(report, paths[-1])
        elexpress.logger.info('expressivity chain: {:s}'.format(report.chain))

    return paths


def cmd_report(config):
    """Draw the five figures with their data tables

    Raises
    ------
    MissingInputsError listing absent matrix, language or diagnostics files

    """
    fmatrix = os.path.join(experiment_dir(config, 'transfer'), 'matrix.txt')
    finals = _language_files(config)
    initials = _language_files(config, 'initial_language.txt')
    fdiags = _language_files(config, 'diagnostics.txt')
    missing = _missing({'matrix': fmatrix}) + _missing(finals) + \
        _missing(initials) + _missing(fdiags)
    if len(missing) > 0:
        raise MissingInputsError(missing)

    out_dir = experiment_dir(config, 'figures')
    os.makedirs(out_dir, exist_ok=True)
    matrix = load_matrix(fmatrix)

    components, collapse, mi = dict(), dict(), dict()
    for _, game in config.games():
        seed = config.seeds[0]
        components[game.name] = (
            analysis.degenerate_component_analysis(
                load_language(initials[(game.name, seed)]), config.top_k),
            analysis.degenerate_component_analysis(
                load_language(finals[(game.name, seed)]), config.top_k))
        runs = [load_diagnostics(fdiags[(game.name, ss)])
                for ss in config.seeds]
        runs = [run for run in runs if len(run) > 0]
        if len(runs) > 0:
            collapse[game.name] = analysis.collapse_curve(runs)
            mi[game.name] = analysis.mi_curve(runs)

    paths = list()
    for func, data, name in (
            (plotting.plot_source_over_targets, matrix,
             'source_over_targets.png'),
            (plotting.plot_target_over_sources, matrix,
             'target_over_sources.png'),
            (plotting.plot_degenerate_components, components,
             'degenerate_components.png'),
            (plotting.plot_collapse_curves, collapse, 'collapse_curves.png'),
            (plotting.plot_mi_curves, mi, 'mi_curves.png')):
        paths.extend(func(data, os.path.join(out_dir, name)))

    return paths


def main(argv=None):
    """Entry point for the script"""

    desc = 'Train signalling games, transfer their languages and compare '
    desc += 'their expressivity'
    parser = argparse.ArgumentParser(prog='elexpress', description=desc)

    desc = 'for help, run %(prog)s SUBCOMMAND -h'
    subparsers = parser.add_subparsers(title='Subcommands', prog='elexpress',
                                       dest='subcommand', description=desc)
    subparsers.required = True

    parser_train = subparsers.add_parser(
        'train', help='train source games and record their languages')
    parser_transfer = subparsers.add_parser(
        'transfer', help='train fresh listeners on recorded languages')
    parser_analyze = subparsers.add_parser(
        'analyze', help='expressivity verdicts, degeneracy and MI reports')
    parser_report = subparsers.add_parser(
        'report', help='figures with their plain-data tables')

    for pp in [parser_train, parser_transfer, parser_analyze, parser_report]:
        pp.add_argument('-c', '--config', dest='config', metavar='FILE',
                        default=None, help='YAML configuration file')
        pp.add_argument('--scale', dest='scale', choices=sorted(PROFILES),
                        default='desk',
                        help='profile used without --config (default: desk)')
        pp.add_argument('-o', '--out', dest='out', metavar='DIR',
                        default=None, help='output directory')
        pp.add_argument('-w', '--workers', dest='workers', type=int,
                        default=None, help='number of worker processes')
        pp.add_argument('-s', '--seeds', dest='seeds', type=int, nargs='+',
                        default=None, help='seeds, overriding the config')
        pp.add_argument('-v', '--verbose', dest='verbose',
                        action='store_true', default=False,
                        help='log progress')
        pp.add_argument('-q', '--quiet', dest='quiet', action='store_true',
                        default=False, help='log errors only')

    parser_train.add_argument('-g', '--game', dest='games', nargs='+',
                              default=None, metavar='GAME',
                              help='games to train (default: whole roster)')
    parser_train.add_argument('--seed', dest='seeds', type=int, nargs=1,
                              help='train a single seed')
    parser_transfer.add_argument('--train-missing', dest='train_missing',
                                 action='store_true', default=False,
                                 help='train source runs whose language is '
                                 'missing')

    args = parser.parse_args(argv)

    level = logging.ERROR if args.quiet else \
        logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(format='%(levelname)s: %(message)s', level=level)

    try:
        config = _build_config(args)
        if args.subcommand == 'train':
            cmd_train(config, args.games)
        elif args.subcommand == 'transfer':
            cmd_transfer(config)
        elif args.subcommand == 'analyze':
            cmd_analyze(config)
        elif args.subcommand == 'report':
            cmd_report(config)
    except ConfigError as err:
        elexpress.logger.error(str(err))
        return EXIT_USAGE
    except TrainingDivergedError as err:
        elexpress.logger.error(str(err))
        return EXIT_DIVERGED
    except MissingInputsError as err:
        elexpress.logger.error(str(err))
        return EXIT_MISSING

    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
