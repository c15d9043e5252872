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

from __future__ import absolute_import, division, print_function, \
    unicode_literals

from datetime import date
import json
import os
import shutil
import tempfile
from unittest import TestCase

import numpy as np

from taste_mobility.config import default_config, validate_config
from taste_mobility.error import ConfigError, TasteMobilityError
from taste_mobility.experiments import \
    detect_movers_short_term, infer_past_home
from taste_mobility.genres import \
    build_taxonomy, parse_tags, sweep_cluster_counts
from taste_mobility.ingest import \
    aggregate_periods, filter_listeners, holiday_regions, \
    location_summaries, parse_events, parse_meta, sample_periods
from taste_mobility.synth import \
    ListenerPlan, SLOTS_PER_DAY, default_synth_config, generate, \
    load_synth_config, matched_run_config, read_ground_truth, \
    score_recovery, validate_synth_config, _make_plant, _sessions

synth_config = default_synth_config._replace(
    n_regions=3, n_genres=4, artists_per_genre=5, listeners_per_region=30,
    streams_per_period=200, mover_fraction=0.2, past_mover_fraction=0.2,
    holiday_travel_prob=1.0, holiday_sessions=4)

run_config = default_config()._replace(min_streams_per_profile=20)


class SynthTest(TestCase):
    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def test_validate(self):
        self.assertEqual(validate_synth_config(default_synth_config), [])

        self.assertIn(
            'n_regions must be at least 2',
            validate_synth_config(default_synth_config._replace(n_regions=1)))

        self.assertIn(
            'mean_session_length must be at least 1',
            validate_synth_config(
                default_synth_config._replace(mean_session_length=0.5)))

        self.assertIn(
            'mover_fraction and past_mover_fraction must not sum to more '
            'than 1',
            validate_synth_config(default_synth_config._replace(
                mover_fraction=0.6, past_mover_fraction=0.6)))

        self.assertIn(
            'streams_per_period must be at least 200',
            validate_synth_config(
                default_synth_config._replace(streams_per_period=100)))

        with self.assertRaises(ConfigError):
            generate(default_synth_config._replace(n_regions=1), run_config,
                     self.directory)

    def test_matched_run_config(self):
        matched = matched_run_config(default_synth_config, default_config())

        self.assertEqual(matched.top_n_artists, 200)
        self.assertEqual(matched.n_genres, 20)
        self.assertEqual(matched.sweep_k_values, (20, 50, 100, 150, 200))
        self.assertEqual(validate_config(matched), [])

        # Values which already fit the plant are kept.
        small = default_config()._replace(
            top_n_artists=20, n_genres=4, sweep_k_values=(2, 4))
        matched = matched_run_config(synth_config, small)
        self.assertEqual(matched.top_n_artists, 20)
        self.assertEqual(matched.n_genres, 4)
        self.assertEqual(matched.sweep_k_values, (2, 4))

    def test_session_slots(self):
        plant = _make_plant(synth_config)
        plan = ListenerPlan(
            listener_id='L000001', gender_code='F', age_bucket=1990,
            kind='stayer', origin='CA', destination='CA',
            homes=('CA', 'CA', 'CA'), preferences=None,
            holiday_regions=())
        preference = np.full(synth_config.n_genres, 0.25)
        day = date(2017, 3, 1)
        rng = np.random.default_rng(1)

        # Only the last two slots of the day are free.
        occupied = set((day, x) for x in range(SLOTS_PER_DAY - 2))

        events = _sessions(
            rng, synth_config, plant, plan, preference, 'NY', [day], 40,
            occupied)

        self.assertGreater(len(events), 0)
        self.assertTrue(all(x.timestamp.hour >= 20 for x in events))
        self.assertTrue(all(x.region_code == 'NY' for x in events))
        self.assertEqual(len(occupied), SLOTS_PER_DAY)

        # Nothing is left for a later draw on the same day.
        self.assertEqual(_sessions(
            rng, synth_config, plant, plan, preference, 'TX', [day], 40,
            occupied), [])

    def test_load(self):
        filename = os.path.join(self.directory, 'synth.json')
        with open(filename, 'w') as f:
            json.dump({'n_regions': 4}, f)

        config = load_synth_config(filename, seed=99)
        self.assertEqual(config.n_regions, 4)
        self.assertEqual(config.seed, 99)
        self.assertEqual(config.n_genres, default_synth_config.n_genres)

        with open(filename, 'w') as f:
            json.dump({'regions': 4}, f)

        with self.assertRaises(ConfigError):
            load_synth_config(filename)

    def test_deterministic(self):
        first = os.path.join(self.directory, 'first')
        second = os.path.join(self.directory, 'second')

        generate(synth_config, run_config, first, threads=1)
        generate(synth_config, run_config, second, threads=3)

        for name in ('events.tsv', 'meta.tsv', 'tags.tsv',
                     'ground_truth.json'):
            with open(os.path.join(first, name), 'rb') as f:
                expected = f.read()
            with open(os.path.join(second, name), 'rb') as f:
                self.assertEqual(f.read(), expected, name)

    def test_recovery(self):
        generate(synth_config, run_config, self.directory)

        truth = read_ground_truth(
            os.path.join(self.directory, 'ground_truth.json'))
        self.assertEqual(truth['seed'], run_config.seed)
        self.assertEqual(len(truth['listeners']), 90)
        self.assertEqual(len(truth['artist_genre']), 20)

        events = list(parse_events(os.path.join(self.directory, 'events.tsv')))
        meta = parse_meta(os.path.join(self.directory, 'meta.tsv'))
        self.assertEqual(len(meta), 90)

        aggregates = aggregate_periods(
            events, sample_periods(run_config).values())
        summaries = location_summaries(
            aggregates, holiday_regions(events, run_config.holiday_windows),
            run_config.holiday_windows)
        eligible = filter_listeners(
            aggregates, meta, run_config, summaries).eligible

        self.assertGreater(len(eligible), 80)

        short_movers = detect_movers_short_term(summaries, eligible)
        long_movers = infer_past_home(summaries, 2, eligible)

        report = score_recovery(
            truth, run_config.seed, short_movers=short_movers,
            long_movers=long_movers, eligible=eligible)

        self.assertEqual(report['short_term_precision'], 1.0)
        self.assertEqual(report['short_term_recall'], 1.0)
        self.assertEqual(report['short_term_origin_accuracy'], 1.0)
        self.assertEqual(report['long_term_precision'], 1.0)
        self.assertGreaterEqual(report['long_term_recall'], 0.9)
        self.assertEqual(report['long_term_origin_accuracy'], 1.0)
        self.assertEqual(report['planted_adoption_rate'], 0.0)

        with self.assertRaisesRegex(TasteMobilityError, 'seed'):
            score_recovery(truth, run_config.seed + 1)

        truth['listeners'].pop(short_movers[0].listener_id)
        with self.assertRaisesRegex(TasteMobilityError, 'ground truth'):
            score_recovery(truth, run_config.seed, short_movers=short_movers)

    def test_genre_recovery(self):
        config = default_synth_config._replace(
            n_regions=3, listeners_per_region=40, region_concentration=2.0,
            mover_fraction=0.0, past_mover_fraction=0.0, tag_fraction=1.0,
            streams_per_period=200)
        self.assertEqual(config.n_genres, 20)
        self.assertEqual(config.mixing_weight, 0.9)

        generate(config, run_config, self.directory)

        truth = read_ground_truth(
            os.path.join(self.directory, 'ground_truth.json'))
        events = list(parse_events(os.path.join(self.directory, 'events.tsv')))
        aggregates = aggregate_periods(
            events, sample_periods(run_config).values())
        eligible = frozenset(truth['listeners'].keys())

        build = build_taxonomy(
            events, eligible, aggregates['P1'],
            parse_tags(os.path.join(self.directory, 'tags.tsv')),
            run_config._replace(n_genres=20, top_n_artists=200))

        report = score_recovery(
            truth, run_config.seed, taxonomy=build.taxonomy)
        self.assertEqual(report['n_scored_artists'], 200)
        self.assertGreaterEqual(report['genre_ami'], 0.9)

        # The sweep scores best at the planted number of genres.
        sweep = sweep_cluster_counts(
            build.artist_distance,
            [truth['artist_genre'][x] for x in build.transitions.artists],
            [10, 15, 20, 30, 40], run_config.seed,
            methods=('agglomerative',))
        self.assertEqual(int(sweep.loc[sweep['ami'].idxmax(), 'k']), 20)
