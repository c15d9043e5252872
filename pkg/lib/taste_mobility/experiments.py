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

from codecs import utf_8_decode
from collections import Counter, defaultdict, namedtuple, OrderedDict
import logging
from pkgutil import get_data

import numpy as np
import pandas as pd

from .error import \
    DegenerateStatisticError, MissingInputError, TasteMobilityError
from .metrics import rao_stirling, taste_distance
from .model import \
    AGGREGATE, TasteProfile, \
    is_known_region, meta_is_complete, substream, sum_profiles
from .stats import \
    TestResult, mann_whitney_u, one_sample_t_test, paired_t_test, \
    result_to_doc, zscores

logger = logging.getLogger(__name__)

# Listener birth year is approximated as the age bucket start plus this.
BIRTH_YEAR_OFFSET = 2

DIVERSITY_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)

MoverRecord = namedtuple(
    'MoverRecord', ('listener_id', 'origin', 'destination', 'basis'))

MatchedPair = namedtuple(
    'MatchedPair', ('mover', 'control', 'stratum', 'origin', 'destination'))

MatchResult = namedtuple('MatchResult', ('pairs', 'unmatched'))

ExperimentReport = namedtuple(
    'ExperimentReport', ('name', 'results', 'tables', 'values'))

# Region profiles use the same type as listener profiles, owned by a
# region code (or a stratum key).
RegionProfile = TasteProfile

BASIS_MODAL_SHIFT = 'modal-shift'
BASIS_HOLIDAYS = 'holidays'


def new_report(name):
    return ExperimentReport(name, OrderedDict(), OrderedDict(), OrderedDict())


def report_to_doc(report):
    return OrderedDict((
        ('name', report.name),
        ('results', OrderedDict(
            (name, result_to_doc(result))
            for (name, result) in report.results.items())),
        ('values', OrderedDict(
            (name, None if value is None else float(value))
            for (name, value) in report.values.items())),
        ('tables', list(report.tables.keys())),
    ))


def favorite_genre(profile):
    """
    Get the genre with the strictly largest count, or None if there is
    a tie or the profile is empty.
    """

    counts = profile.counts
    if len(counts) == 0 or profile.total == 0:
        return None

    top = counts.max()
    leaders = np.flatnonzero(counts == top)

    if len(leaders) != 1:
        return None

    return int(leaders[0])


def detect_movers_short_term(summaries, eligible=None):
    """
    Find listeners whose modal region differs between P1 and P2.
    """

    movers = []

    for (listener_id, summary) in summaries.items():
        if eligible is not None and listener_id not in eligible:
            continue

        origin = summary.modal_regions.get('P1')
        destination = summary.modal_regions.get('P2')

        if is_known_region(origin) and is_known_region(destination) and \
                origin != destination:
            movers.append(MoverRecord(
                listener_id, origin, destination, BASIS_MODAL_SHIFT))

    return movers


def short_term_controls(summaries, eligible, movers=()):
    """
    Get listeners who stayed in the same modal region in P1 and P2,
    mapped to that region.
    """

    exclude = set(x.listener_id for x in movers)
    controls = OrderedDict()

    for (listener_id, summary) in summaries.items():
        if listener_id not in eligible or listener_id in exclude:
            continue

        region = summary.modal_regions.get('P1')
        if is_known_region(region) and \
                region == summary.modal_regions.get('P2'):
            controls[listener_id] = region

    return controls


def _holiday_region_counts(summary):
    return Counter(
        region for (holiday_id, region) in summary.holiday_regions
        if is_known_region(region))


def infer_past_home(summaries, min_holidays=2, eligible=None):
    """
    Find listeners who live in one region but spend the holidays in
    another.

    The present home b is the modal region shared by P1 and P2.  The
    past home a is a different region which is the modal holiday region
    in at least "min_holidays" windows.  If several regions qualify,
    the most frequent is used, and a tie gives no inference.
    """

    movers = []

    for (listener_id, summary) in summaries.items():
        if eligible is not None and listener_id not in eligible:
            continue

        home = summary.modal_regions.get('P1')
        if not is_known_region(home) or \
                home != summary.modal_regions.get('P2'):
            continue

        counts = _holiday_region_counts(summary)
        candidates = [
            (count, region) for (region, count) in counts.items()
            if region != home and count >= min_holidays]

        if not candidates:
            continue

        top = max(x[0] for x in candidates)
        leaders = [x[1] for x in candidates if x[0] == top]

        if len(leaders) != 1:
            continue

        movers.append(MoverRecord(
            listener_id, leaders[0], home, BASIS_HOLIDAYS))

    return movers


def holiday_stayers(summaries, eligible, min_holidays=2, movers=()):
    """
    Get listeners who live in one region and spent every observed
    holiday (at least "min_holidays" of them) there, mapped to that
    region.
    """

    exclude = set(x.listener_id for x in movers)
    controls = OrderedDict()

    for (listener_id, summary) in summaries.items():
        if listener_id not in eligible or listener_id in exclude:
            continue

        home = summary.modal_regions.get('P1')
        if not is_known_region(home) or \
                home != summary.modal_regions.get('P2'):
            continue

        counts = _holiday_region_counts(summary)
        if set(counts.keys()) == set([home]) and \
                counts[home] >= min_holidays:
            controls[listener_id] = home

    return controls


def match_pairs(
        movers, controls, meta, seed, favorite_genres=None, label='pairs'):
    """
    Match each mover to a control from the same stratum, without
    replacement.

    The stratum is (origin region, gender, age bucket), plus the
    favorite genre if "favorite_genres" is given.  Controls are given
    as a dictionary mapping listener to home region.  Within a stratum,
    movers are processed in identifier order and draw a control
    uniformly from the remaining pool using a substream of the seed
    named by "label" and the stratum.  Movers without a control are
    returned as unmatched.
    """

    mover_ids = set(x.listener_id for x in movers)
    overlap = mover_ids.intersection(controls.keys())
    if overlap:
        raise TasteMobilityError(
            '{} listeners are both movers and controls, e.g. {}.'.format(
                len(overlap), sorted(overlap)[0]))

    def stratum_of(listener_id, region):
        info = meta.get(listener_id)
        if not meta_is_complete(info):
            return None

        stratum = (region, info.gender_code, info.age_bucket)

        if favorite_genres is not None:
            genre = favorite_genres.get(listener_id)
            if genre is None:
                return None
            stratum += (genre,)

        return stratum

    pools = defaultdict(list)
    for (listener_id, region) in sorted(controls.items()):
        stratum = stratum_of(listener_id, region)
        if stratum is not None:
            pools[stratum].append(listener_id)

    if not pools:
        raise TasteMobilityError(
            'No eligible controls are available for matching {}.'.format(
                label))

    strata = defaultdict(list)
    unmatched = []

    for mover in movers:
        stratum = stratum_of(mover.listener_id, mover.origin)
        if stratum is None:
            unmatched.append(mover.listener_id)
        else:
            strata[stratum].append(mover)

    pairs = []

    for stratum in sorted(strata.keys()):
        pool = list(pools.get(stratum, ()))
        rng = substream(seed, 'match', label, *stratum)

        for mover in sorted(strata[stratum]):
            if not pool:
                unmatched.append(mover.listener_id)
                continue

            control = pool.pop(int(rng.integers(len(pool))))
            pairs.append(MatchedPair(
                mover=mover.listener_id, control=control, stratum=stratum,
                origin=mover.origin, destination=mover.destination))

    if unmatched:
        logger.info(
            'Matching %s: %i movers had no available control',
            label, len(unmatched))

    return MatchResult(
        pairs=sorted(pairs), unmatched=tuple(sorted(unmatched)))


def stratified_sample(pairs, per_origin, seed, label='sample'):
    """
    Keep at most "per_origin" pairs from each origin region, chosen
    uniformly without replacement.
    """

    by_origin = defaultdict(list)
    for pair in pairs:
        by_origin[pair.origin].append(pair)

    result = []

    for origin in sorted(by_origin.keys()):
        group = sorted(by_origin[origin])

        if len(group) > per_origin:
            rng = substream(seed, label, origin)
            chosen = sorted(int(x) for x in rng.choice(
                len(group), size=per_origin, replace=False))
            group = [group[i] for i in chosen]

        result.extend(group)

    return sorted(result)


def subgroup_pairs(pairs):
    """
    Split matched pairs by gender and by age bucket.
    """

    groups = OrderedDict()

    for (field, position) in (('gender', 1), ('age', 2)):
        values = sorted(set(x.stratum[position] for x in pairs))
        for value in values:
            groups['{}={}'.format(field, value)] = [
                x for x in pairs if x.stratum[position] == value]

    return groups


def period_homes(summaries, period_id, listeners):
    """
    Map listeners to their modal region in a period, omitting those
    whose region is ambiguous.
    """

    homes = OrderedDict()

    for listener_id in sorted(listeners):
        summary = summaries.get(listener_id)
        if summary is None:
            continue

        region = summary.modal_regions.get(period_id)
        if is_known_region(region):
            homes[listener_id] = region

    return homes


def stratum_key(region, gender_code, age_bucket):
    return '{}|{}|{}'.format(region, gender_code, age_bucket)


def region_profiles(profiles, homes, period, n_genres, meta=None):
    """
    Sum listener profiles by region.

    "homes" maps listeners to regions.  If listener metadata are given,
    profiles are summed by (region, gender, age bucket) stratum instead,
    keyed by `stratum_key`.
    """

    groups = defaultdict(list)

    for (listener_id, profile) in profiles.items():
        region = homes.get(listener_id)
        if region is None:
            continue

        if meta is None:
            key = region
        else:
            info = meta.get(listener_id)
            if not meta_is_complete(info):
                continue
            key = stratum_key(region, info.gender_code, info.age_bucket)

        groups[key].append(profile)

    return OrderedDict(
        (key, sum_profiles(key, period, groups[key], n_genres))
        for key in sorted(groups.keys()))


class ShiftContext(object):
    """
    Everything needed to measure how a listener's taste moves relative
    to reference profiles.

    "references" maps period identifiers to dictionaries of reference
    profiles, keyed by region, by stratum key ("stratum" reference) or
    by listener ("peer" reference, when "peers" maps regions to lists of
    candidate listeners).
    """

    def __init__(self, profiles, references, tree=None, method='unifrac',
                 normalized=False, reference='region', peers=None, seed=0):
        if reference not in ('region', 'stratum', 'peer'):
            raise TasteMobilityError(
                'Shift reference "{}" not recognized.'.format(reference))

        if reference == 'peer':
            if peers is None:
                raise TasteMobilityError(
                    'Peer references require the candidate peers.')
            references = profiles

        self.profiles = profiles
        self.references = references
        self.tree = tree
        self.method = method
        self.normalized = normalized
        self.reference = reference
        self.peers = peers
        self.seed = seed

    def distance(self, p, q):
        return taste_distance(
            p, q, tree=self.tree, method=self.method,
            normalized=self.normalized)

    def reference_key(self, pair, region):
        if self.reference == 'region':
            return region

        elif self.reference == 'stratum':
            return stratum_key(region, pair.stratum[1], pair.stratum[2])

        candidates = [
            x for x in self.peers.get(region, ())
            if x != pair.mover and x != pair.control]

        if not candidates:
            return None

        rng = substream(self.seed, 'peer', pair.mover, region)
        return candidates[int(rng.integers(len(candidates)))]

    def profile(self, period, listener_id):
        profile = self.profiles.get(period, {}).get(listener_id)
        if profile is None or profile.total == 0:
            return None
        return profile

    def change(self, listener_id, key, earlier, later):
        """
        Compute D = d(x_later, R_later) - d(x_earlier, R_earlier), or
        None if a profile is missing.
        """

        values = []

        for period in (earlier, later):
            profile = self.profile(period, listener_id)
            reference = self.references.get(period, {}).get(key)

            if profile is None or reference is None or reference.total == 0:
                return None

            values.append(self.distance(profile, reference))

        return values[1] - values[0]

    def separation(self, listener_id, period, origin_key, destination_key):
        """
        Compute D = d(x, R_destination) - d(x, R_origin) within one
        period, or None if a profile is missing.
        """

        profile = self.profile(period, listener_id)
        references = self.references.get(period, {})
        origin = references.get(origin_key)
        destination = references.get(destination_key)

        if profile is None or origin is None or destination is None or \
                origin.total == 0 or destination.total == 0:
            return None

        return (self.distance(profile, destination) -
                self.distance(profile, origin))


def pair_shift_table(pairs, context, target='origin', later='P2',
                     scale=None):
    """
    Tabulate each pair's taste change relative to the reference for the
    origin or destination region between P1 and a later period.

    The difference column is D(mover) - D(control).  Pairs with a
    missing profile are skipped.
    """

    if target not in ('origin', 'destination'):
        raise TasteMobilityError(
            'Shift target "{}" not recognized.'.format(target))

    rows = []
    n_skipped = 0

    for pair in pairs:
        region = pair.origin if target == 'origin' else pair.destination
        key = context.reference_key(pair, region)

        d_mover = d_control = None
        if key is not None:
            d_mover = context.change(pair.mover, key, 'P1', later)
            d_control = context.change(pair.control, key, 'P1', later)

        if d_mover is None or d_control is None:
            n_skipped += 1
            continue

        rows.append((pair.mover, pair.control, pair.origin,
                     pair.destination, d_mover, d_control,
                     d_mover - d_control))

    if n_skipped:
        logger.warning(
            'Shift towards %s in %s: skipped %i pairs with missing profiles',
            target, later, n_skipped)

    table = pd.DataFrame(rows, columns=[
        'mover', 'control', 'origin', 'destination',
        'd_mover', 'd_control', 'difference'])

    if scale is not None:
        table['normalized'] = table['difference'] / scale

    return table


def short_term_shift_test(
        pairs, context, target='origin', later='P2', scale=None,
        per_origin=1000, seed=0):
    """
    Test whether movers' tastes move away from their origin (or towards
    their destination) more than their matched controls' do.
    """

    sample = stratified_sample(pairs, per_origin, seed, 'short-term-sample')
    table = pair_shift_table(
        sample, context, target=target, later=later, scale=scale)

    report = new_report('short-term shift {} {}'.format(target, later))
    report.tables['pairs'] = table
    report.results['paired'] = paired_t_test(table['difference'].values)
    report.values['n_pairs'] = len(table)

    if scale is not None:
        report.values['mean_normalized_difference'] = \
            float(table['normalized'].mean())

    return report


def short_term_diversity_test(
        pairs, profiles, genre_distance, per_origin=1000, seed=0,
        later='P2'):
    """
    Test whether movers' Rao-Stirling diversity changes between P1 and
    a later period more than their controls' does.
    """

    sample = stratified_sample(pairs, per_origin, seed, 'short-term-sample')
    rows = []

    for pair in sample:
        changes = []
        for listener_id in (pair.mover, pair.control):
            early = profiles['P1'].get(listener_id)
            late = profiles[later].get(listener_id)
            if early is None or late is None or \
                    early.total == 0 or late.total == 0:
                break
            changes.append(
                rao_stirling(late, genre_distance) -
                rao_stirling(early, genre_distance))
        else:
            rows.append((pair.mover, pair.control, pair.origin,
                         pair.destination, changes[0], changes[1],
                         changes[0] - changes[1]))

    table = pd.DataFrame(rows, columns=[
        'mover', 'control', 'origin', 'destination',
        'change_mover', 'change_control', 'difference'])

    report = new_report('short-term diversity {}'.format(later))
    report.tables['pairs'] = table
    report.results['paired'] = paired_t_test(table['difference'].values)
    report.values['n_pairs'] = len(table)

    return report


def variability_scale(nonmovers, context):
    """
    Estimate the typical size of taste changes of listeners who did not
    move.

    For each non-mover n with home region a, computes
    D(n, a | P2, P1) - D(n, a | P3, P2), and returns the sample
    standard deviation of these values.  "nonmovers" maps listeners to
    their home region.
    """

    values = []

    for (listener_id, region) in nonmovers.items():
        first = context.change(listener_id, region, 'P1', 'P2')
        second = context.change(listener_id, region, 'P2', 'P3')

        if first is not None and second is not None:
            values.append(first - second)

    if len(values) < 2:
        raise TasteMobilityError(
            'At least 2 non-movers with complete profiles are needed for '
            'the variability scale, found {}.'.format(len(values)))

    scale = float(np.std(values, ddof=1))

    if scale == 0:
        raise DegenerateStatisticError(
            'Non-mover taste changes have zero variability.')

    logger.info('Variability scale %g from %i non-movers', scale, len(values))

    return scale


def load_adjacency(filename=None):
    """
    Read pairs of bordering regions, one tab-separated pair per line.

    Returns a frozenset of frozensets.  Without a filename, the packaged
    list of bordering US states is used.
    """

    if filename is None:
        text = utf_8_decode(
            get_data('taste_mobility', 'data/us_state_adjacency.txt'))[0]
    else:
        try:
            with open(filename, 'rb') as f:
                text = utf_8_decode(f.read())[0]
        except (IOError, OSError) as e:
            raise MissingInputError(
                'Could not read region adjacency {}: {}'.format(filename, e))

    pairs = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith('#'):
            continue

        fields = line.split()
        if len(fields) != 2:
            raise TasteMobilityError(
                'Adjacency line "{}" does not contain two regions.'.format(
                    line))

        pairs.append(frozenset(fields))

    return frozenset(pairs)


def long_term_diversity_test(
        pairs, profiles, genre_distance, per_origin=1000, seed=0,
        adjacency=None):
    """
    Compare the diversity of long-term movers with that of their
    controls, using aggregate profiles.

    If "adjacency" is given, pairs whose past and present homes border
    each other are dropped, and a paired t-test and the relative mean
    difference are reported as well.
    """

    if adjacency is not None:
        pairs = [x for x in pairs
                 if frozenset((x.origin, x.destination)) not in adjacency]

        if not pairs:
            raise TasteMobilityError(
                'No matched pairs remain after removing moves between '
                'bordering regions.')

    sample = stratified_sample(pairs, per_origin, seed, 'long-term-sample')
    aggregate = profiles[AGGREGATE]
    rows = []

    for pair in sample:
        mover = aggregate.get(pair.mover)
        control = aggregate.get(pair.control)
        if mover is None or control is None or \
                mover.total == 0 or control.total == 0:
            continue

        rows.append((pair.mover, pair.control, pair.origin, pair.destination,
                     rao_stirling(mover, genre_distance),
                     rao_stirling(control, genre_distance)))

    table = pd.DataFrame(rows, columns=[
        'mover', 'control', 'origin', 'destination',
        'diversity_mover', 'diversity_control'])

    report = new_report('long-term diversity')
    report.tables['pairs'] = table
    report.results['mann_whitney'] = mann_whitney_u(
        table['diversity_mover'].values, table['diversity_control'].values)
    report.values['n_pairs'] = len(table)
    report.values['mean_diversity_mover'] = float(
        table['diversity_mover'].mean())
    report.values['mean_diversity_control'] = float(
        table['diversity_control'].mean())

    if adjacency is not None:
        report.results['paired'] = paired_t_test(
            (table['diversity_mover'] - table['diversity_control']).values)
        report.values['relative_difference'] = (
            report.values['mean_diversity_mover'] /
            report.values['mean_diversity_control'] - 1.0)

    return report


def long_term_shift_test(
        pairs, context, scale=None, per_origin=1000, seed=0):
    """
    Test whether long-term movers' tastes lie closer to their past home
    than to their present home, and whether they lie closer to the
    present home than their controls' tastes do.

    Uses aggregate profiles, with D(x, a, b) = d(x, R_b) - d(x, R_a)
    where a is the past home and b the present home.
    """

    sample = stratified_sample(pairs, per_origin, seed, 'long-term-sample')
    rows = []

    for pair in sample:
        origin_key = context.reference_key(pair, pair.origin)
        destination_key = context.reference_key(pair, pair.destination)
        if origin_key is None or destination_key is None:
            continue

        d_mover = context.separation(
            pair.mover, AGGREGATE, origin_key, destination_key)
        d_control = context.separation(
            pair.control, AGGREGATE, origin_key, destination_key)

        if d_mover is None or d_control is None:
            continue

        rows.append((pair.mover, pair.control, pair.origin, pair.destination,
                     d_mover, d_control, d_mover - d_control))

    table = pd.DataFrame(rows, columns=[
        'mover', 'control', 'origin', 'destination',
        'd_mover', 'd_control', 'difference'])

    if scale is not None:
        table['normalized'] = table['difference'] / scale

    report = new_report('long-term shift')
    report.tables['pairs'] = table
    report.values['n_pairs'] = len(table)

    mover_values = table['d_mover'].values
    differences = table['difference'].values

    report.results['mover_skew'] = one_sample_t_test(mover_values)
    report.values['fraction_mover_closer_to_past_home'] = \
        float(np.mean(mover_values > 0)) if len(table) else None

    if len(differences) >= 2 and np.all(differences == 0):
        logger.warning('Long-term shift: all paired differences are zero')
        report.results['paired'] = TestResult(
            test='paired t', statistic=0.0, p_value=1.0,
            n=len(differences), n2=None, df=len(differences) - 1,
            direction=0, effect_size=0.0,
            notes='degenerate: all differences are zero')
    else:
        report.results['paired'] = paired_t_test(differences)

    report.values['fraction_closer_to_present_home'] = \
        float(np.mean(differences < 0)) if len(table) else None

    if scale is not None:
        report.values['mean_normalized_difference'] = \
            float(table['normalized'].mean())

    return report


def region_genre_zscores(region_profiles, genres, labels=None):
    """
    Standardize, across regions, the fraction of each region's streams
    belonging to each of the given genres.

    Returns a table with columns region, genre, label, fraction and z.
    """

    if len(region_profiles) < 2:
        raise TasteMobilityError(
            'Genre z-scores need at least 2 regions, found {}.'.format(
                len(region_profiles)))

    regions = sorted(region_profiles.keys())
    rows = []

    for genre in genres:
        fractions = np.array([
            region_profiles[x].counts[genre] / region_profiles[x].total
            if region_profiles[x].total else 0.0
            for x in regions])

        for (region, fraction, z) in zip(
                regions, fractions, zscores(fractions)):
            rows.append((
                region, int(genre),
                None if labels is None else labels[genre],
                float(fraction), float(z)))

    return pd.DataFrame(
        rows, columns=['region', 'genre', 'label', 'fraction', 'z'])


def top_genres(profiles, n):
    """
    Get the n genres with the most streams over the given profiles.
    """

    profiles = list(profiles)
    if not profiles:
        return []

    totals = np.sum([x.counts for x in profiles], axis=0)
    order = sorted(range(len(totals)), key=lambda x: (-totals[x], x))

    return order[:n]


def diversity_distributions(profiles, homes, region_profiles, genre_distance):
    """
    Summarize the Rao-Stirling diversity of individual listeners in each
    region alongside the diversity of the region's aggregate profile.
    """

    individual = []

    for (listener_id, profile) in profiles.items():
        region = homes.get(listener_id)
        if region is None or profile.total == 0:
            continue

        individual.append((
            region, listener_id, rao_stirling(profile, genre_distance)))

    individual = pd.DataFrame(
        individual, columns=['region', 'listener', 'diversity'])

    quantile_names = ['q{:02d}'.format(int(round(100 * x)))
                      for x in DIVERSITY_QUANTILES]
    summary = []

    for (region, group) in individual.groupby('region', sort=True):
        values = group['diversity'].values
        region_profile = region_profiles.get(region)

        summary.append(
            [region, len(values), float(np.mean(values))] +
            [float(x) for x in np.quantile(values, DIVERSITY_QUANTILES)] +
            [None if region_profile is None or region_profile.total == 0
             else rao_stirling(region_profile, genre_distance)])

    summary = pd.DataFrame(
        summary,
        columns=(['region', 'n_listeners', 'mean'] + quantile_names +
                 ['region_diversity']))

    report = new_report('regional diversity')
    report.tables['individual'] = individual
    report.tables['summary'] = summary

    return report


def _release_year_counts(aggregates, meta, eligible):
    """
    Iterate over (age bucket, release year, streams) for eligible
    listeners with complete demographics.
    """

    for (period_id, period_aggregates) in aggregates.items():
        if period_id == AGGREGATE:
            continue

        for (listener_id, aggregate) in period_aggregates.items():
            if listener_id not in eligible:
                continue

            info = meta.get(listener_id)
            if not meta_is_complete(info):
                continue

            for (year, count) in aggregate.release_year_counts.items():
                yield (info.age_bucket, year, count)


def _song_age_counts(aggregates, meta, eligible, reference_year):
    records = list(_release_year_counts(aggregates, meta, eligible))

    if reference_year is None:
        if not records:
            return (None, Counter())
        reference_year = max(x[1] for x in records)

    counts = Counter()
    n_negative = 0

    for (age_bucket, year, count) in records:
        song_age = reference_year - year
        if song_age < 0:
            n_negative += count
            song_age = 0
        counts[(age_bucket, song_age)] += count

    if n_negative:
        logger.warning(
            '%i streams of songs released after %i counted as age 0',
            n_negative, reference_year)

    return (reference_year, counts)


def song_age_distribution(aggregates, meta, eligible, reference_year=None):
    """
    Tabulate, for each age bucket, the fraction of streams by song age
    (reference year minus release year).

    Without a reference year, the latest release year present is used.
    Negative ages are clamped to zero.
    """

    (reference_year, counts) = _song_age_counts(
        aggregates, meta, eligible, reference_year)

    bucket_totals = Counter()
    for ((age_bucket, song_age), count) in counts.items():
        bucket_totals[age_bucket] += count

    rows = [
        (age_bucket, song_age, count, count / bucket_totals[age_bucket])
        for ((age_bucket, song_age), count) in sorted(counts.items())]

    return pd.DataFrame(
        rows, columns=['age_bucket', 'song_age', 'streams', 'fraction'])


def current_music_fraction(aggregates, meta, eligible, reference_year=None):
    """
    Get the fraction of streams of songs less than a year old.
    """

    (reference_year, counts) = _song_age_counts(
        aggregates, meta, eligible, reference_year)

    total = sum(counts.values())
    if total == 0:
        return None

    return sum(count for ((age_bucket, song_age), count) in counts.items()
               if song_age == 0) / total


def age_at_release_matrix(
        aggregates, meta, eligible, min_cell_streams, axis='listener_age'):
    """
    Compute z-scores of the fraction of each release year's streams
    coming from listeners of each age at release.

    Age at release is the release year minus the listener's approximate
    birth year.  Cells with fewer than "min_cell_streams" streams are
    masked (NaN).  Z-scores are taken within each listener-age column
    across release years, or within each release-year row if "axis" is
    "release_year".  A line with fewer than two unmasked cells, or with
    constant values, gets z-scores of zero.
    """

    if axis not in ('listener_age', 'release_year'):
        raise TasteMobilityError(
            'Age matrix axis "{}" not recognized.'.format(axis))

    counts = Counter()
    for (age_bucket, year, count) in _release_year_counts(
            aggregates, meta, eligible):
        counts[(year, year - (age_bucket + BIRTH_YEAR_OFFSET))] += count

    years = sorted(set(x[0] for x in counts.keys()))
    ages = sorted(set(x[1] for x in counts.keys()))
    matrix = np.zeros((len(years), len(ages)))

    year_index = {x: i for (i, x) in enumerate(years)}
    age_index = {x: i for (i, x) in enumerate(ages)}
    for ((year, age), count) in counts.items():
        matrix[year_index[year], age_index[age]] = count

    row_totals = matrix.sum(axis=1, keepdims=True)
    fractions = matrix / np.where(row_totals > 0, row_totals, 1.0)
    unmasked = matrix >= min_cell_streams
    if min_cell_streams <= 0:
        unmasked = np.ones(matrix.shape, dtype=bool)

    z = np.full(matrix.shape, np.nan)

    lines = range(len(ages)) if axis == 'listener_age' else range(len(years))
    n_degenerate = 0

    for line in lines:
        if axis == 'listener_age':
            selection = (slice(None), line)
        else:
            selection = (line, slice(None))

        mask = unmasked[selection]
        values = fractions[selection][mask]

        if len(values) == 0:
            continue

        if len(values) < 2 or np.ptp(values) == 0:
            n_degenerate += 1
            line_z = np.zeros(len(values))
        else:
            line_z = zscores(values)

        target = z[selection]
        target[mask] = line_z
        z[selection] = target

    if n_degenerate:
        logger.warning(
            'Age at release: %i lines had too few or constant values; '
            'z-scores set to zero', n_degenerate)

    return pd.DataFrame(
        z, index=pd.Index(years, name='release_year'),
        columns=pd.Index(ages, name='listener_age'))
