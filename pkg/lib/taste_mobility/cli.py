# Copyright (C) 2026 The taste_mobility developers
# All Rights Reserved.
#
# This program is free software; you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software
# Foundation; either version 2 of the License, or (at your option) any later
# version.
#
# This program is distributed in the hope that it will be useful,but WITHOUT
# ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS
# FOR A PARTICULAR PURPOSE. See the GNU General Public License for more
# details.
#
# You should have received a copy of the GNU General Public License along with
# this program; if not, write to the Free Software Foundation, Inc.,51 Franklin
# Street, Fifth Floor, Boston, MA  02110-1301, USA

"""
taste-mobility - analyze how musical taste relates to where listeners live

Usage:
    taste-mobility synth [options] --out-dir <dir> [--synth-config <file>]
    taste-mobility ingest [options] --events <file> --meta <file> --out-dir <dir>
    taste-mobility derive-genres [options] --events <file> --tags <file> --out-dir <dir> [--no-sweep]
    taste-mobility profiles [options] --out-dir <dir>
    taste-mobility experiment [options] (short-term | long-term | regions | ages) --out-dir <dir> [--adjacency <file>]
    taste-mobility score [options] --ground-truth <file> --out-dir <dir>
    taste-mobility --help
    taste-mobility --version

Options:
    --out-dir <dir>         Directory for inputs from earlier commands and outputs
    --events <file>         Tab-separated event log
    --meta <file>           Tab-separated listener demographics
    --tags <file>           Tab-separated artist tags
    --synth-config <file>   JSON file of synthetic data settings
    --ground-truth <file>   Ground truth written by the synth command
    --adjacency <file>      Pairs of bordering regions (default: US states)
    --no-sweep              Skip the cluster count sweep
    --config <file>         JSON file of configuration values overriding the defaults
    --seed <seed>           Random seed, overriding the configuration
    --threads <n>           Number of worker threads [default: 1]
    --dump-config           Print the effective configuration and exit
    --verbose, -v           Verbose
    --quiet, -q             Quiet
    --help, -h              Show this help

Commands:
    synth           Generate a synthetic dataset with planted structure
    ingest          Aggregate an event log and decide listener eligibility
    derive-genres   Cluster artists into genres and build the genre tree
    profiles        Build listener and region taste profiles
    experiment      Run one of the analyses
    score           Compare pipeline outputs with synthetic ground truth

Each command reads the outputs of earlier commands from, and writes its
own outputs to, the directory given by --out-dir.
"""

from __future__ import absolute_import, division, print_function, \
    unicode_literals

from collections import defaultdict, OrderedDict
from concurrent.futures import ThreadPoolExecutor
from functools import partial
import logging
import os
import sys

from docopt import DocoptExit, docopt
import pandas as pd

from .config import config_to_doc, load_config, validate_config
from .error import \
    ConfigError, DegenerateStatisticError, TasteMobilityError
from .experiments import \
    ShiftContext, detect_movers_short_term, diversity_distributions, \
    favorite_genre, holiday_stayers, infer_past_home, load_adjacency, \
    long_term_diversity_test, long_term_shift_test, match_pairs, \
    period_homes, region_genre_zscores, region_profiles, report_to_doc, \
    short_term_controls, short_term_diversity_test, short_term_shift_test, \
    song_age_distribution, current_music_fraction, age_at_release_matrix, \
    subgroup_pairs, top_genres, variability_scale
from .genres import build_taxonomy, parse_tags, sweep_cluster_counts
from .ingest import \
    ParseStats, aggregate_periods, aggregates_from_doc, aggregates_to_doc, \
    filter_listeners, holiday_regions, listener_profiles, \
    location_summaries, parse_events, parse_meta, profiles_from_doc, \
    profiles_to_doc, sample_periods, summaries_from_doc, summaries_to_doc
from .metrics import expand_counts, rarefaction_curve
from .model import \
    AGGREGATE, PERIOD_IDS, ListenerMeta, dumps_document, is_known_region, \
    substream, taxonomy_from_doc, taxonomy_to_doc
from .output import \
    RunManifest, read_document, write_document, write_table
from .synth import \
    generate, load_synth_config, read_ground_truth, score_recovery
from .version import version

logger = logging.getLogger(__name__)

EXPERIMENTS = ('short-term', 'long-term', 'regions', 'ages')

USAGE_EXIT_CODE = 2


def main(argv=None):
    try:
        args = docopt(__doc__, argv=argv, version=version)
    except DocoptExit as e:
        sys.stderr.write('{}\n'.format(e))
        return USAGE_EXIT_CODE

    logging.basicConfig(level=(
        logging.DEBUG if args['--verbose'] else (
            logging.WARNING if args['--quiet'] else logging.INFO)))

    try:
        run(args)

    except TasteMobilityError as e:
        logger.error('%s', e)
        return e.exit_code

    return 0


def _command_name(args):
    if args['experiment']:
        for name in EXPERIMENTS:
            if args[name]:
                return 'experiment-{}'.format(name)

    for name in ('synth', 'ingest', 'derive-genres', 'profiles', 'score'):
        if args[name]:
            return name

    raise TasteMobilityError('No command given.')


def run(args):
    seed = args['--seed']
    if seed is not None:
        try:
            seed = int(seed)
        except ValueError:
            raise ConfigError('Seed "{}" is not an integer.'.format(seed))

    config = load_config(args['--config'], seed=seed)

    violations = validate_config(config)
    if violations:
        raise ConfigError('Invalid configuration: {}.'.format(
            '; '.join(violations)))

    try:
        threads = int(args['--threads'])
    except ValueError:
        threads = 0
    if threads < 1:
        raise ConfigError('The number of threads must be a positive integer.')

    command = _command_name(args)
    out_dir = args['--out-dir']

    if args['--dump-config']:
        sys.stdout.write(dumps_document(OrderedDict((
            ('command', command),
            ('config', config_to_doc(config)),
            ('out_dir', out_dir),
            ('threads', threads),
        ))))
        return

    manifest = RunManifest(command, config_to_doc(config), threads)

    if args['--config'] is not None:
        manifest.record_input(args['--config'])

    handlers = {
        'synth': cmd_synth,
        'ingest': cmd_ingest,
        'derive-genres': cmd_derive_genres,
        'profiles': cmd_profiles,
        'experiment-short-term': cmd_short_term,
        'experiment-long-term': cmd_long_term,
        'experiment-regions': cmd_regions,
        'experiment-ages': cmd_ages,
        'score': cmd_score,
    }

    handlers[command](args, config, Layout(out_dir), manifest, threads)

    manifest.write(Layout(out_dir).path(
        'manifests', '{}.json'.format(command)))


class Layout(object):
    """
    Locations of the files written by each command.
    """

    def __init__(self, out_dir):
        self.out_dir = out_dir

    def path(self, *parts):
        return os.path.join(self.out_dir, *parts)

    def write_document(self, manifest, doc, *parts):
        filename = self.path(*parts)
        write_document(filename, doc)
        manifest.record_output(filename)

    def write_table(self, manifest, table, *parts):
        filename = self.path(*parts)
        write_table(filename, table)
        manifest.record_output(filename)

    def write_report(self, manifest, report, directory, slug):
        self.write_document(
            manifest, report_to_doc(report), directory, slug + '.json')

        for (name, table) in report.tables.items():
            self.write_table(
                manifest, table, directory, '{}-{}.csv'.format(slug, name))

    def read(self, manifest, producer, *parts):
        filename = self.path(*parts)
        doc = read_document(filename, producer)
        manifest.record_input(filename)
        return doc


def cmd_synth(args, config, layout, manifest, threads):
    synth_config_file = args['--synth-config']
    if synth_config_file is not None:
        manifest.record_input(synth_config_file)

    synth_config = load_synth_config(synth_config_file, seed=config.seed)

    with manifest.stage('generate'):
        generate(synth_config, config, layout.path('synth'), threads=threads)

    for name in ('events.tsv', 'meta.tsv', 'tags.tsv', 'ground_truth.json',
                 'run_config.json'):
        manifest.record_output(layout.path('synth', name))


def _meta_to_doc(meta, listeners):
    return OrderedDict(
        (listener_id, OrderedDict((
            ('gender_code', meta[listener_id].gender_code),
            ('age_bucket', meta[listener_id].age_bucket),
        )))
        for listener_id in sorted(listeners))


def _meta_from_doc(doc):
    return OrderedDict(
        (listener_id, ListenerMeta(
            listener_id, entry['gender_code'], entry['age_bucket']))
        for (listener_id, entry) in doc.items())


def cmd_ingest(args, config, layout, manifest, threads):
    events_file = args['--events']
    meta_file = args['--meta']
    manifest.record_input(events_file)
    manifest.record_input(meta_file)

    stats = ParseStats()

    with manifest.stage('parse'):
        events = list(parse_events(events_file, stats))
        meta = parse_meta(meta_file)

    with manifest.stage('aggregate'):
        periods = sample_periods(config)
        aggregates = aggregate_periods(events, periods.values())
        holidays = holiday_regions(events, config.holiday_windows)
        summaries = location_summaries(
            aggregates, holidays, config.holiday_windows)

    with manifest.stage('filter'):
        result = filter_listeners(aggregates, meta, config, summaries)

    if not result.eligible:
        logger.warning('No listeners are eligible for analysis')

    eligible = result.eligible
    listeners = sorted(set(result.excluded.keys()).union(eligible))

    layout.write_document(
        manifest, aggregates_to_doc(aggregates, eligible),
        'ingest', 'aggregates.json')
    layout.write_document(
        manifest, summaries_to_doc(OrderedDict(
            (x, y) for (x, y) in summaries.items() if x in eligible)),
        'ingest', 'locations.json')
    layout.write_document(
        manifest, _meta_to_doc(meta, eligible), 'ingest', 'listeners.json')
    layout.write_table(
        manifest, pd.DataFrame(
            [(x, x in eligible, result.excluded.get(x)) for x in listeners],
            columns=['listener', 'eligible', 'reason']),
        'ingest', 'eligibility.csv')

    summary = stats.to_doc()
    summary['sampled_days'] = OrderedDict(
        (period.id, [x.isoformat() for x in period.sampled_days])
        for period in periods.values())
    summary['n_eligible'] = len(eligible)
    layout.write_document(manifest, summary, 'ingest', 'summary.json')


def _load_ingest(layout, manifest):
    aggregates = aggregates_from_doc(
        layout.read(manifest, 'ingest', 'ingest', 'aggregates.json'))
    summaries = summaries_from_doc(
        layout.read(manifest, 'ingest', 'ingest', 'locations.json'))
    meta = _meta_from_doc(
        layout.read(manifest, 'ingest', 'ingest', 'listeners.json'))

    return (aggregates, summaries, meta, frozenset(meta.keys()))


def cmd_derive_genres(args, config, layout, manifest, threads):
    (aggregates, summaries, meta, eligible) = _load_ingest(layout, manifest)

    events_file = args['--events']
    manifest.record_input(events_file)
    manifest.record_input(args['--tags'])
    tags = parse_tags(args['--tags'])

    with manifest.stage('taxonomy'):
        build = build_taxonomy(
            parse_events(events_file), eligible, aggregates['P1'], tags,
            config)

    taxonomy = build.taxonomy

    layout.write_document(
        manifest, taxonomy_to_doc(taxonomy), 'genres', 'taxonomy.json')

    tree_file = layout.path('genres', 'tree.nwk')
    with open(tree_file, 'w') as f:
        f.write(taxonomy.tree.to_newick() + '\n')
    manifest.record_output(tree_file)

    layout.write_table(
        manifest, pd.DataFrame(
            [(artist, genre, taxonomy.genre_labels[genre])
             for (artist, genre) in taxonomy.artist_to_genre.items()],
            columns=['artist', 'genre', 'label']),
        'genres', 'artist_genres.csv')

    if args['--no-sweep']:
        return

    n_artists = len(build.transitions.artists)
    k_values = [x for x in config.sweep_k_values if x <= n_artists]
    if len(k_values) < len(config.sweep_k_values):
        logger.warning(
            'Cluster counts above %i artists omitted from the sweep',
            n_artists)

    with manifest.stage('sweep'):
        sweep = sweep_cluster_counts(
            build.artist_distance,
            [tags.get(x) for x in build.transitions.artists],
            k_values, config.seed)

    layout.write_table(manifest, sweep, 'genres', 'sweep.csv')


def _load_taxonomy(layout, manifest):
    return taxonomy_from_doc(
        layout.read(manifest, 'derive-genres', 'genres', 'taxonomy.json'))


def _region_profile_sets(profiles, summaries, eligible, meta, n_genres):
    """
    Sum listener profiles by region (and by stratum) for each period.

    Listeners are placed by their modal region in each period, and for
    the aggregate profiles by their present (P2) home.
    """

    by_region = OrderedDict()
    by_stratum = OrderedDict()

    for period_id in PERIOD_IDS + (AGGREGATE,):
        homes = period_homes(
            summaries, 'P2' if period_id == AGGREGATE else period_id,
            eligible)
        by_region[period_id] = region_profiles(
            profiles[period_id], homes, period_id, n_genres)
        by_stratum[period_id] = region_profiles(
            profiles[period_id], homes, period_id, n_genres, meta=meta)

    return (by_region, by_stratum)


def _rarefy_listener(listener_id, profile, config, genre_distance):
    streams = expand_counts(profile)
    tables = []

    for (measure, distances) in (
            ('richness', None), ('rao_stirling', genre_distance)):
        table = rarefaction_curve(
            streams, config.rarefaction_depths,
            config.rarefaction_repetitions, config.seed,
            key='{}:{}'.format(listener_id, measure), distances=distances)
        table.insert(0, 'measure', measure)
        table.insert(0, 'listener', listener_id)
        tables.append(table)

    return pd.concat(tables, ignore_index=True)


def cmd_profiles(args, config, layout, manifest, threads):
    (aggregates, summaries, meta, eligible) = _load_ingest(layout, manifest)
    taxonomy = _load_taxonomy(layout, manifest)

    with manifest.stage('profiles'):
        profiles = listener_profiles(aggregates, taxonomy, eligible)
        (by_region, by_stratum) = _region_profile_sets(
            profiles, summaries, eligible, meta, taxonomy.n_genres)

    layout.write_document(
        manifest, profiles_to_doc(profiles), 'profiles', 'profiles.json')
    layout.write_document(
        manifest, OrderedDict((
            ('region', profiles_to_doc(by_region)),
            ('stratum', profiles_to_doc(by_stratum)),
        )), 'profiles', 'region_profiles.json')

    candidates = [x for (x, profile) in profiles['P1'].items()
                  if profile.total > 0]
    if len(candidates) > config.rarefaction_listeners:
        rng = substream(config.seed, 'rarefaction-listeners')
        candidates = sorted(
            candidates[int(i)] for i in rng.choice(
                len(candidates), size=config.rarefaction_listeners,
                replace=False))

    with manifest.stage('rarefaction'):
        rarefy = partial(
            _rarefy_listener, config=config,
            genre_distance=taxonomy.genre_distance)

        with ThreadPoolExecutor(max_workers=threads) as pool:
            tables = list(pool.map(
                rarefy, candidates,
                [profiles['P1'][x] for x in candidates]))

    if tables:
        curves = pd.concat(tables, ignore_index=True)
    else:
        curves = pd.DataFrame(
            columns=['listener', 'measure', 'depth', 'mean', 'std'])

    layout.write_table(manifest, curves, 'profiles', 'rarefaction.csv')

    if len(curves):
        summary = curves.groupby(['measure', 'depth'], sort=True).agg(
            n_listeners=('listener', 'count'),
            mean=('mean', 'mean')).reset_index()
        layout.write_table(
            manifest, summary, 'profiles', 'rarefaction_summary.csv')


def _load_profiles(layout, manifest):
    profiles = profiles_from_doc(
        layout.read(manifest, 'profiles', 'profiles', 'profiles.json'))
    doc = layout.read(manifest, 'profiles', 'profiles', 'region_profiles.json')

    return (profiles, OrderedDict((
        ('region', profiles_from_doc(doc['region'])),
        ('stratum', profiles_from_doc(doc['stratum'])),
    )))


def _shift_context(config, profiles, regions, taxonomy, summaries, eligible,
                   movers, reference=None):
    if reference is None:
        reference = config.shift_reference

    peers = None
    if reference == 'peer':
        mover_ids = set(x.listener_id for x in movers)
        peers = defaultdict(list)
        for listener_id in sorted(eligible):
            if listener_id in mover_ids:
                continue
            modal = summaries[listener_id].modal_regions
            if is_known_region(modal['P1']) and modal['P1'] == modal['P2']:
                peers[modal['P1']].append(listener_id)

    return ShiftContext(
        profiles,
        regions['stratum'] if reference == 'stratum' else regions['region'],
        tree=taxonomy.tree, method=config.taste_distance,
        normalized=config.unifrac_normalized, reference=reference,
        peers=peers, seed=config.seed)


def _favorite_genres(config, profiles):
    if not config.match_favorite_genre:
        return None

    return OrderedDict(
        (x, favorite_genre(profile)) for (x, profile) in profiles['P1'].items())


def _write_movers(layout, manifest, movers, pairs, directory):
    layout.write_table(
        manifest, pd.DataFrame(
            [tuple(x) for x in movers],
            columns=['listener', 'origin', 'destination', 'basis']),
        directory, 'movers.csv')
    layout.write_table(
        manifest, pd.DataFrame(
            [(x.mover, x.control, x.origin, x.destination,
              '|'.join('{}'.format(y) for y in x.stratum)) for x in pairs],
            columns=['mover', 'control', 'origin', 'destination',
                     'stratum']),
        directory, 'pairs.csv')


def _scale(context, summaries, eligible, movers):
    try:
        return variability_scale(
            short_term_controls(summaries, eligible, movers), context)
    except TasteMobilityError as e:
        logger.warning('Taste changes are not normalized: %s', e)
        return None


def cmd_short_term(args, config, layout, manifest, threads):
    (aggregates, summaries, meta, eligible) = _load_ingest(layout, manifest)
    taxonomy = _load_taxonomy(layout, manifest)
    (profiles, regions) = _load_profiles(layout, manifest)
    directory = os.path.join('experiments', 'short-term')

    with manifest.stage('matching'):
        movers = detect_movers_short_term(summaries, eligible)
        controls = short_term_controls(summaries, eligible, movers)
        match = match_pairs(
            movers, controls, meta, config.seed,
            favorite_genres=_favorite_genres(config, profiles),
            label='short-term')

    logger.info(
        'Short-term movers: %i, matched pairs: %i',
        len(movers), len(match.pairs))

    _write_movers(layout, manifest, movers, match.pairs, directory)

    context = _shift_context(
        config, profiles, regions, taxonomy, summaries, eligible, movers)
    scale = _scale(
        _shift_context(config, profiles, regions, taxonomy, summaries,
                       eligible, movers, reference='region'),
        summaries, eligible, movers)

    per_origin = config.pairs_per_stratum_sample

    with manifest.stage('tests'):
        for later in ('P2', 'P3'):
            layout.write_report(
                manifest, short_term_diversity_test(
                    match.pairs, profiles, taxonomy.genre_distance,
                    per_origin=per_origin, seed=config.seed, later=later),
                directory, 'diversity-{}'.format(later))

            for target in ('origin', 'destination'):
                layout.write_report(
                    manifest, short_term_shift_test(
                        match.pairs, context, target=target, later=later,
                        scale=scale, per_origin=per_origin,
                        seed=config.seed),
                    directory, 'shift-{}-{}'.format(target, later))

        for (group, pairs) in subgroup_pairs(match.pairs).items():
            try:
                report = short_term_shift_test(
                    pairs, context, target='origin', later='P2',
                    scale=scale, per_origin=per_origin, seed=config.seed)
            except DegenerateStatisticError as e:
                logger.warning('Subgroup %s skipped: %s', group, e)
                continue

            layout.write_report(
                manifest, report, directory,
                'shift-origin-P2-{}'.format(group.replace('=', '-')))


def cmd_long_term(args, config, layout, manifest, threads):
    (aggregates, summaries, meta, eligible) = _load_ingest(layout, manifest)
    taxonomy = _load_taxonomy(layout, manifest)
    (profiles, regions) = _load_profiles(layout, manifest)
    directory = os.path.join('experiments', 'long-term')

    adjacency_file = args['--adjacency']
    if adjacency_file is not None:
        manifest.record_input(adjacency_file)
    adjacency = load_adjacency(adjacency_file)

    with manifest.stage('matching'):
        movers = infer_past_home(summaries, config.min_holidays, eligible)
        controls = holiday_stayers(
            summaries, eligible, config.min_holidays, movers)
        match = match_pairs(
            movers, controls, meta, config.seed,
            favorite_genres=_favorite_genres(config, profiles),
            label='long-term')

    logger.info(
        'Long-term movers: %i, matched pairs: %i',
        len(movers), len(match.pairs))

    _write_movers(layout, manifest, movers, match.pairs, directory)

    short_movers = detect_movers_short_term(summaries, eligible)
    scale = _scale(
        _shift_context(config, profiles, regions, taxonomy, summaries,
                       eligible, short_movers, reference='region'),
        summaries, eligible, short_movers)
    context = _shift_context(
        config, profiles, regions, taxonomy, summaries, eligible, movers)

    per_origin = config.pairs_per_stratum_sample

    with manifest.stage('tests'):
        layout.write_report(
            manifest, long_term_diversity_test(
                match.pairs, profiles, taxonomy.genre_distance,
                per_origin=per_origin, seed=config.seed),
            directory, 'diversity')

        layout.write_report(
            manifest, long_term_diversity_test(
                match.pairs, profiles, taxonomy.genre_distance,
                per_origin=per_origin, seed=config.seed,
                adjacency=adjacency),
            directory, 'diversity-non-bordering')

        layout.write_report(
            manifest, long_term_shift_test(
                match.pairs, context, scale=scale, per_origin=per_origin,
                seed=config.seed),
            directory, 'shift')


def cmd_regions(args, config, layout, manifest, threads):
    (aggregates, summaries, meta, eligible) = _load_ingest(layout, manifest)
    taxonomy = _load_taxonomy(layout, manifest)
    (profiles, regions) = _load_profiles(layout, manifest)
    directory = os.path.join('experiments', 'regions')

    region_aggregate = regions['region'][AGGREGATE]
    genres = top_genres(region_aggregate.values(), config.region_genre_count)

    with manifest.stage('regions'):
        layout.write_table(
            manifest, region_genre_zscores(
                region_aggregate, genres, labels=taxonomy.genre_labels),
            directory, 'genre-zscores.csv')

        layout.write_report(
            manifest, diversity_distributions(
                profiles[AGGREGATE], period_homes(summaries, 'P2', eligible),
                region_aggregate, taxonomy.genre_distance),
            directory, 'diversity')


def cmd_ages(args, config, layout, manifest, threads):
    (aggregates, summaries, meta, eligible) = _load_ingest(layout, manifest)
    directory = os.path.join('experiments', 'ages')

    reference_year = config.reference_year
    if reference_year is None:
        reference_year = layout.read(
            manifest, 'ingest', 'ingest', 'summary.json')['max_event_year']

    with manifest.stage('ages'):
        layout.write_table(
            manifest, song_age_distribution(
                aggregates, meta, eligible, reference_year),
            directory, 'song-age.csv')

        layout.write_document(
            manifest, OrderedDict((
                ('reference_year', reference_year),
                ('current_music_fraction', current_music_fraction(
                    aggregates, meta, eligible, reference_year)),
            )), directory, 'current-music.json')

        matrix = age_at_release_matrix(
            aggregates, meta, eligible, config.min_cell_streams,
            axis=config.age_z_axis)

        layout.write_table(
            manifest, matrix.reset_index(), directory, 'age-at-release.csv')


def cmd_score(args, config, layout, manifest, threads):
    truth_file = args['--ground-truth']
    manifest.record_input(truth_file)
    truth = read_ground_truth(truth_file)

    (aggregates, summaries, meta, eligible) = _load_ingest(layout, manifest)

    taxonomy = None
    if os.path.exists(layout.path('genres', 'taxonomy.json')):
        taxonomy = _load_taxonomy(layout, manifest)

    long_term_table = None
    table_file = layout.path(
        'experiments', 'long-term', 'shift-pairs.csv')
    if os.path.exists(table_file):
        manifest.record_input(table_file)
        long_term_table = pd.read_csv(table_file)

    report = score_recovery(
        truth, config.seed, taxonomy=taxonomy,
        short_movers=detect_movers_short_term(summaries, eligible),
        long_movers=infer_past_home(
            summaries, config.min_holidays, eligible),
        eligible=eligible, long_term_table=long_term_table)

    layout.write_document(manifest, report, 'score', 'recovery.json')


if __name__ == '__main__':
    sys.exit(main())
