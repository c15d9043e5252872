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

from collections import OrderedDict
from unittest import TestCase

import numpy as np

from taste_mobility.error import DegenerateStatisticError, TasteMobilityError
from taste_mobility.experiments import \
    MatchedPair, MoverRecord, ShiftContext, \
    age_at_release_matrix, current_music_fraction, \
    detect_movers_short_term, diversity_distributions, favorite_genre, \
    holiday_stayers, infer_past_home, load_adjacency, \
    long_term_diversity_test, long_term_shift_test, match_pairs, \
    pair_shift_table, period_homes, region_genre_zscores, region_profiles, \
    short_term_controls, short_term_diversity_test, short_term_shift_test, \
    song_age_distribution, stratified_sample, stratum_key, subgroup_pairs, \
    top_genres, variability_scale
from taste_mobility.ingest import LocationSummary, PeriodAggregate
from taste_mobility.metrics import upgma
from taste_mobility.model import \
    AGGREGATE, AMBIGUOUS, ListenerMeta, TasteProfile

holidays = ('christmas-2016', 'thanksgiving-2017', 'christmas-2017')

genre_distance = np.array([[0.0, 2.0, 4.0], [2.0, 0.0, 4.0], [4.0, 4.0, 0.0]])


def summary(listener_id, p1, p2, holiday_regions=(None, None, None)):
    return LocationSummary(
        listener_id=listener_id,
        modal_regions=OrderedDict((('P1', p1), ('P2', p2), ('P3', p2))),
        holiday_regions=tuple(zip(holidays, holiday_regions)))


def random_profile(rng, owner_id, period, distribution, n=400):
    return TasteProfile(owner_id, period, rng.multinomial(n, distribution))


class MoverTest(TestCase):
    def setUp(self):
        self.summaries = OrderedDict((x.listener_id, x) for x in (
            summary('L1', 'CA', 'NY'),
            summary('L2', 'CA', 'CA', ('NY', 'NY', 'CA')),
            summary('L3', 'CA', 'CA', ('NY', None, 'CA')),
            summary('L4', 'CA', 'CA', ('CA', 'CA', 'CA')),
            summary('L5', AMBIGUOUS, 'CA', ('NY', 'NY', 'NY')),
            summary('L6', 'CA', 'CA', ('NY', 'TX', 'CA')),
        ))
        self.eligible = frozenset(self.summaries.keys())

    def test_favorite_genre(self):
        self.assertEqual(favorite_genre(TasteProfile('L', 'P1', [1, 5, 2])), 1)
        self.assertIsNone(favorite_genre(TasteProfile('L', 'P1', [5, 5, 2])))
        self.assertIsNone(favorite_genre(TasteProfile('L', 'P1', [0, 0])))

    def test_short_term(self):
        movers = detect_movers_short_term(self.summaries)

        self.assertEqual(movers, [MoverRecord('L1', 'CA', 'NY', 'modal-shift')])

        self.assertEqual(
            detect_movers_short_term(self.summaries, frozenset(['L2'])), [])

        controls = short_term_controls(self.summaries, self.eligible, movers)
        self.assertEqual(list(controls.keys()), ['L2', 'L3', 'L4', 'L6'])
        self.assertEqual(set(controls.values()), set(['CA']))

    def test_long_term(self):
        movers = infer_past_home(self.summaries)

        self.assertEqual(movers, [MoverRecord('L2', 'NY', 'CA', 'holidays')])

        # A single holiday is enough when allowed; ties give no inference.
        self.assertEqual(
            [x.listener_id for x in infer_past_home(
                self.summaries, min_holidays=1)],
            ['L2', 'L3'])

        stayers = holiday_stayers(self.summaries, self.eligible, 2, movers)
        self.assertEqual(dict(stayers), {'L4': 'CA'})

        # Short-term movers, long-term movers and stayers are disjoint.
        short = set(x.listener_id for x in
                    detect_movers_short_term(self.summaries))
        long = set(x.listener_id for x in movers)
        self.assertFalse(short & long)
        self.assertFalse((short | long) & set(stayers.keys()))

    def test_period_homes(self):
        homes = period_homes(self.summaries, 'P1', ['L5', 'L1', 'L9'])
        self.assertEqual(dict(homes), {'L1': 'CA'})


class MatchTest(TestCase):
    def setUp(self):
        self.movers = [
            MoverRecord('M1', 'CA', 'NY', 'modal-shift'),
            MoverRecord('M2', 'CA', 'TX', 'modal-shift'),
            MoverRecord('M3', 'CA', 'NY', 'modal-shift'),
            MoverRecord('M4', 'TX', 'CA', 'modal-shift'),
        ]
        self.controls = OrderedDict((
            ('C1', 'CA'), ('C2', 'CA'), ('C3', 'CA'), ('C4', 'CA'),
            ('C5', 'NY'),
        ))
        self.meta = OrderedDict((x[0], ListenerMeta(*x)) for x in (
            ('M1', 'F', 1990), ('M2', 'F', 1990), ('M3', 'M', 1985),
            ('M4', 'X', 2000), ('C1', 'F', 1990), ('C2', 'F', 1990),
            ('C3', 'F', 1990), ('C4', 'M', 1985), ('C5', 'F', 1990),
        ))

    def test_match(self):
        result = match_pairs(self.movers, self.controls, self.meta, 7)

        self.assertEqual(result.unmatched, ('M4',))
        self.assertEqual([x.mover for x in result.pairs], ['M1', 'M2', 'M3'])

        by_mover = {x.mover: x for x in result.pairs}
        self.assertEqual(by_mover['M3'].control, 'C4')
        self.assertEqual(by_mover['M3'].stratum, ('CA', 'M', 1985))
        self.assertIn(by_mover['M1'].control, ('C1', 'C2', 'C3'))
        self.assertIn(by_mover['M2'].control, ('C1', 'C2', 'C3'))
        self.assertEqual(by_mover['M2'].destination, 'TX')

        # Controls are drawn without replacement.
        controls = [x.control for x in result.pairs]
        self.assertEqual(len(set(controls)), len(controls))

        self.assertEqual(
            match_pairs(self.movers, self.controls, self.meta, 7), result)

    def test_match_favorite_genre(self):
        favorites = {'M1': 0, 'M3': 2, 'C1': 1, 'C2': 0, 'C3': 0, 'C4': 2}

        result = match_pairs(
            self.movers, self.controls, self.meta, 7,
            favorite_genres=favorites)

        self.assertEqual(result.unmatched, ('M2', 'M4'))
        by_mover = {x.mover: x for x in result.pairs}
        self.assertIn(by_mover['M1'].control, ('C2', 'C3'))
        self.assertEqual(by_mover['M1'].stratum, ('CA', 'F', 1990, 0))
        self.assertEqual(by_mover['M3'].control, 'C4')

    def test_match_errors(self):
        controls = OrderedDict(self.controls)
        controls['M1'] = 'CA'

        with self.assertRaisesRegex(TasteMobilityError, 'both movers'):
            match_pairs(self.movers, controls, self.meta, 7)

        with self.assertRaisesRegex(TasteMobilityError, 'No eligible'):
            match_pairs(self.movers, {}, self.meta, 7)

    def test_sample(self):
        pairs = [
            MatchedPair('M{:02d}'.format(i), 'C{:02d}'.format(i),
                        ('CA', 'F', 1990), 'CA', 'NY')
            for i in range(10)]
        pairs.extend(
            MatchedPair('N{}'.format(i), 'D{}'.format(i),
                        ('NY', 'M', 1985), 'NY', 'CA')
            for i in range(3))

        sample = stratified_sample(pairs, 4, 11)

        self.assertEqual(len(sample), 7)
        self.assertEqual(sum(1 for x in sample if x.origin == 'CA'), 4)
        self.assertTrue(set(sample).issubset(pairs))
        self.assertEqual(stratified_sample(pairs, 4, 11), sample)
        self.assertEqual(stratified_sample(pairs, 100, 11), sorted(pairs))

        groups = subgroup_pairs(pairs)
        self.assertEqual(
            list(groups.keys()),
            ['gender=F', 'gender=M', 'age=1985', 'age=1990'])
        self.assertEqual(len(groups['gender=F']), 10)
        self.assertEqual(len(groups['age=1985']), 3)


class RegionTest(TestCase):
    def test_region_profiles(self):
        profiles = OrderedDict((
            ('L1', TasteProfile('L1', 'P1', [1, 2, 3])),
            ('L2', TasteProfile('L2', 'P1', [4, 0, 1])),
            ('L3', TasteProfile('L3', 'P1', [0, 7, 0])),
            ('L4', TasteProfile('L4', 'P1', [9, 9, 9])),
        ))
        homes = {'L1': 'CA', 'L2': 'CA', 'L3': 'NY'}

        result = region_profiles(profiles, homes, 'P1', 3)

        self.assertEqual(list(result.keys()), ['CA', 'NY'])
        self.assertEqual(list(result['CA'].counts), [5, 2, 4])
        self.assertEqual(result['CA'].owner_id, 'CA')

        # Region totals account for every homed listener's streams.
        self.assertEqual(
            sum(x.total for x in result.values()),
            sum(profiles[x].total for x in homes))

        meta = {'L1': ListenerMeta('L1', 'F', 1990),
                'L2': ListenerMeta('L2', 'M', 1990),
                'L3': ListenerMeta('L3', 'F', 1990)}
        by_stratum = region_profiles(profiles, homes, 'P1', 3, meta=meta)
        self.assertEqual(
            list(by_stratum.keys()),
            ['CA|F|1990', 'CA|M|1990', 'NY|F|1990'])
        self.assertEqual(stratum_key('CA', 'F', 1990), 'CA|F|1990')

    def test_zscores(self):
        table = region_genre_zscores(OrderedDict((
            ('X', TasteProfile('X', AGGREGATE, [2, 8])),
            ('Y', TasteProfile('Y', AGGREGATE, [4, 6])),
        )), [0], labels=('rock', 'jazz'))

        self.assertEqual(table['region'].tolist(), ['X', 'Y'])
        self.assertEqual(table['label'].tolist(), ['rock', 'rock'])
        self.assertTrue(np.allclose(table['fraction'], [0.2, 0.4]))
        self.assertTrue(np.allclose(table['z'], [-0.70711, 0.70711],
                                    atol=1e-5))

        with self.assertRaises(TasteMobilityError):
            region_genre_zscores(
                {'X': TasteProfile('X', AGGREGATE, [2, 8])}, [0])

    def test_top_genres(self):
        profiles = [TasteProfile('A', 'P1', [1, 5, 5, 0]),
                    TasteProfile('B', 'P1', [2, 0, 0, 3])]

        self.assertEqual(top_genres(profiles, 2), [1, 2])
        self.assertEqual(top_genres(profiles, 10), [1, 2, 0, 3])
        self.assertEqual(top_genres([], 2), [])

    def test_diversity_distributions(self):
        rng = np.random.default_rng(31)
        profiles = OrderedDict(
            ('L{}'.format(i), random_profile(
                rng, 'L{}'.format(i), AGGREGATE, [0.5, 0.3, 0.2], 50))
            for i in range(10))
        homes = {'L{}'.format(i): 'CA' if i < 6 else 'NY' for i in range(10)}
        regions = region_profiles(profiles, homes, AGGREGATE, 3)

        report = diversity_distributions(
            profiles, homes, regions, genre_distance)

        individual = report.tables['individual']
        summary = report.tables['summary']

        self.assertEqual(len(individual), 10)
        self.assertEqual(summary['region'].tolist(), ['CA', 'NY'])
        self.assertEqual(summary['n_listeners'].tolist(), [6, 4])
        self.assertEqual(
            list(summary.columns),
            ['region', 'n_listeners', 'mean', 'q05', 'q25', 'q50', 'q75',
             'q95', 'region_diversity'])
        for row in summary.itertuples():
            self.assertLessEqual(row.q05, row.q95)

    def test_adjacency(self):
        adjacency = load_adjacency()

        self.assertIn(frozenset(('NY', 'PA')), adjacency)
        self.assertNotIn(frozenset(('CA', 'NY')), adjacency)


class ShiftTest(TestCase):
    def setUp(self):
        self.tree = upgma(genre_distance)
        self.references = OrderedDict(
            (period, OrderedDict((
                ('A', TasteProfile('A', period, [700, 200, 100])),
                ('B', TasteProfile('B', period, [100, 200, 700])),
            )))
            for period in ('P1', 'P2', 'P3', AGGREGATE))

    def _profiles(self, distributions, seed=3):
        rng = np.random.default_rng(seed)
        profiles = OrderedDict()

        for period in ('P1', 'P2', 'P3', AGGREGATE):
            profiles[period] = OrderedDict(
                (listener_id, random_profile(
                    rng, listener_id, period, distribution))
                for (listener_id, distribution) in distributions.items())

        return profiles

    def test_antisymmetry(self):
        profiles = self._profiles({'L1': [0.3, 0.3, 0.4]})
        context = ShiftContext(profiles, self.references, tree=self.tree)

        forward = context.separation('L1', AGGREGATE, 'A', 'B')
        backward = context.separation('L1', AGGREGATE, 'B', 'A')
        self.assertAlmostEqual(forward, -backward)

        change = context.change('L1', 'A', 'P1', 'P2')
        self.assertAlmostEqual(change, (
            context.distance(profiles['P2']['L1'], self.references['P2']['A'])
            - context.distance(
                profiles['P1']['L1'], self.references['P1']['A'])))

        self.assertIsNone(context.separation('L9', AGGREGATE, 'A', 'B'))
        self.assertIsNone(context.change('L1', 'C', 'P1', 'P2'))

        with self.assertRaises(TasteMobilityError):
            ShiftContext(profiles, self.references, reference='nearby')

    def test_self_pair(self):
        profiles = self._profiles({
            'L1': [0.3, 0.3, 0.4], 'L2': [0.5, 0.3, 0.2]})
        context = ShiftContext(profiles, self.references, tree=self.tree)
        pairs = [MatchedPair('L1', 'L1', ('A', 'F', 1990), 'A', 'B'),
                 MatchedPair('L2', 'L2', ('A', 'F', 1990), 'A', 'B')]

        table = pair_shift_table(pairs, context)
        self.assertEqual(table['difference'].tolist(), [0.0, 0.0])

        with self.assertRaises(DegenerateStatisticError):
            short_term_shift_test(pairs, context)

        with self.assertRaises(TasteMobilityError):
            pair_shift_table(pairs, context, target='sideways')

    def test_short_term(self):
        rng = np.random.default_rng(17)
        distributions = OrderedDict()
        pairs = []
        for i in range(20):
            distributions['M{:02d}'.format(i)] = random_distribution_3(rng)
            distributions['C{:02d}'.format(i)] = random_distribution_3(rng)
            pairs.append(MatchedPair(
                'M{:02d}'.format(i), 'C{:02d}'.format(i),
                ('A', 'F', 1990), 'A', 'B'))

        profiles = self._profiles(distributions)
        context = ShiftContext(profiles, self.references, tree=self.tree)

        report = short_term_shift_test(
            pairs, context, target='destination', later='P3', scale=2.0)

        self.assertEqual(report.values['n_pairs'], 20)
        self.assertEqual(report.results['paired'].n, 20)
        self.assertTrue(np.allclose(
            report.tables['pairs']['normalized'],
            report.tables['pairs']['difference'] / 2.0))

        diversity = short_term_diversity_test(pairs, profiles, genre_distance)
        self.assertEqual(diversity.values['n_pairs'], 20)
        self.assertIn('paired', diversity.results)

        nonmovers = OrderedDict(('C{:02d}'.format(i), 'A') for i in range(20))
        scale = variability_scale(nonmovers, context)
        self.assertGreater(scale, 0.0)

        with self.assertRaises(TasteMobilityError):
            variability_scale({'C00': 'A'}, context)

    def test_variability_degenerate(self):
        profile = [5, 3, 2]
        profiles = OrderedDict(
            (period, OrderedDict(
                (x, TasteProfile(x, period, profile)) for x in ('N1', 'N2')))
            for period in ('P1', 'P2', 'P3'))
        context = ShiftContext(profiles, self.references, tree=self.tree)

        with self.assertRaises(DegenerateStatisticError):
            variability_scale({'N1': 'A', 'N2': 'B'}, context)

    def test_long_term_planted(self):
        past = np.array([0.7, 0.2, 0.1])
        present = np.array([0.1, 0.2, 0.7])

        distributions = OrderedDict()
        pairs = []
        for i in range(20):
            mover = 'M{:02d}'.format(i)
            control = 'C{:02d}'.format(i)
            distributions[mover] = 0.25 * past + 0.75 * present
            distributions[control] = past
            pairs.append(MatchedPair(
                mover, control, ('A', 'F', 1990), 'A', 'B'))

        profiles = self._profiles(distributions)
        context = ShiftContext(profiles, self.references, tree=self.tree)

        report = long_term_shift_test(pairs, context, scale=0.5)

        paired = report.results['paired']
        self.assertEqual(report.values['n_pairs'], 20)
        self.assertEqual(paired.direction, -1)
        self.assertLess(paired.p_value, 1e-6)
        self.assertEqual(report.values['fraction_closer_to_present_home'], 1.0)
        self.assertEqual(
            report.values['fraction_mover_closer_to_past_home'], 0.0)
        self.assertEqual(report.results['mover_skew'].direction, -1)
        self.assertIn('mean_normalized_difference', report.values)

    def test_long_term_degenerate(self):
        rng = np.random.default_rng(5)
        profiles = OrderedDict()
        profiles[AGGREGATE] = OrderedDict()
        pairs = []
        for i in range(5):
            counts = rng.multinomial(100, [0.4, 0.3, 0.3])
            for listener_id in ('M{}'.format(i), 'C{}'.format(i)):
                profiles[AGGREGATE][listener_id] = TasteProfile(
                    listener_id, AGGREGATE, counts)
            pairs.append(MatchedPair(
                'M{}'.format(i), 'C{}'.format(i), ('A', 'F', 1990), 'A', 'B'))

        context = ShiftContext(profiles, self.references, tree=self.tree)
        report = long_term_shift_test(pairs, context)

        self.assertEqual(report.results['paired'].p_value, 1.0)
        self.assertEqual(report.results['paired'].notes,
                         'degenerate: all differences are zero')

    def test_long_term_diversity(self):
        profiles = self._profiles(OrderedDict(
            [('M{}'.format(i), [0.34, 0.33, 0.33]) for i in range(8)] +
            [('C{}'.format(i), [0.9, 0.05, 0.05]) for i in range(8)]))
        pairs = [MatchedPair('M{}'.format(i), 'C{}'.format(i),
                             ('A', 'F', 1990), 'A', 'B') for i in range(8)]

        report = long_term_diversity_test(pairs, profiles, genre_distance)
        self.assertEqual(report.values['n_pairs'], 8)
        self.assertIn('mann_whitney', report.results)
        self.assertNotIn('paired', report.results)
        self.assertGreater(report.values['mean_diversity_mover'],
                           report.values['mean_diversity_control'])

        separated = long_term_diversity_test(
            pairs, profiles, genre_distance,
            adjacency=frozenset([frozenset(('A', 'C'))]))
        self.assertIn('paired', separated.results)
        self.assertGreater(separated.values['relative_difference'], 0.0)

        with self.assertRaises(TasteMobilityError):
            long_term_diversity_test(
                pairs, profiles, genre_distance,
                adjacency=frozenset([frozenset(('A', 'B'))]))


def random_distribution_3(rng):
    values = rng.random(3) + 0.1
    return values / values.sum()


class AgeTest(TestCase):
    def _aggregates(self, year_counts):
        return OrderedDict((('P1', OrderedDict(
            (listener_id, PeriodAggregate(
                listener_id, 'P1', {}, {}, counts))
            for (listener_id, counts) in year_counts.items())),))

    def test_song_age(self):
        aggregates = self._aggregates({
            'L1': {2015: 1, 2017: 3},
            'L2': {2010: 5},
        })
        meta = {'L1': ListenerMeta('L1', 'F', 1990),
                'L2': ListenerMeta('L2', None, 1990)}
        eligible = frozenset(['L1', 'L2'])

        table = song_age_distribution(aggregates, meta, eligible)
        self.assertEqual(table['song_age'].tolist(), [0, 2])
        self.assertEqual(table['streams'].tolist(), [3, 1])
        self.assertTrue(np.allclose(table['fraction'], [0.75, 0.25]))

        # Songs released after the reference year count as current.
        table = song_age_distribution(
            aggregates, meta, eligible, reference_year=2016)
        self.assertEqual(table['song_age'].tolist(), [0, 1])

        self.assertAlmostEqual(
            current_music_fraction(aggregates, meta, eligible), 0.75)
        self.assertIsNone(
            current_music_fraction(aggregates, meta, frozenset()))

    def test_matrix_cells(self):
        aggregates = self._aggregates({'L1': {2010: 10}})
        meta = {'L1': ListenerMeta('L1', 'F', 1990)}

        matrix = age_at_release_matrix(aggregates, meta, frozenset(['L1']), 1)
        self.assertEqual(matrix.index.tolist(), [2010])
        self.assertEqual(matrix.columns.tolist(), [18])
        self.assertEqual(matrix.loc[2010, 18], 0.0)

        masked = age_at_release_matrix(
            aggregates, meta, frozenset(['L1']), 50)
        self.assertTrue(np.isnan(masked.loc[2010, 18]))

        with self.assertRaises(TasteMobilityError):
            age_at_release_matrix(
                aggregates, meta, frozenset(['L1']), 1, axis='diagonal')

    def test_matrix_planted_cohorts(self):
        buckets = (1975, 1980, 1985, 1990, 1995, 2000)
        years = range(1990, 2018)

        year_counts = OrderedDict()
        meta = OrderedDict()
        for bucket in buckets:
            listener_id = 'L{}'.format(bucket)
            meta[listener_id] = ListenerMeta(listener_id, 'F', bucket)
            year_counts[listener_id] = {
                year: 20 + max(0, 200 - 50 * abs(year - (bucket + 17)))
                for year in years}

        matrix = age_at_release_matrix(
            self._aggregates(year_counts), meta, frozenset(meta.keys()), 1,
            axis='release_year')

        peaks = matrix.idxmax(axis=1)
        self.assertEqual(len(peaks), len(years))
        for age in peaks:
            self.assertTrue(13 <= age <= 17)

        by_age = age_at_release_matrix(
            self._aggregates(year_counts), meta, frozenset(meta.keys()), 1)
        self.assertEqual(by_age.shape, matrix.shape)
