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

from collections import Counter, defaultdict, namedtuple, OrderedDict
from datetime import datetime, timedelta, timezone
import io
import logging

from .error import MissingInputError, TasteMobilityError
from .model import \
    AGGREGATE, AMBIGUOUS, GENDER_CODES, PERIOD_IDS, \
    ListenEvent, ListenerMeta, SamplePeriod, TasteProfile, \
    is_known_region, is_region_code, meta_is_complete, substream

logger = logging.getLogger(__name__)

event_columns = (
    'listener_id', 'timestamp', 'artist_id', 'release_year', 'region_code')

meta_columns = ('listener_id', 'gender_code', 'age_bucket_start')

MIN_RELEASE_YEAR = 1900

# Number of malformed lines quoted when the malformed fraction is fatal.
N_MALFORMED_SAMPLES = 5

PeriodAggregate = namedtuple(
    'PeriodAggregate',
    ('listener_id', 'period', 'artist_counts', 'region_counts',
     'release_year_counts'))

LocationSummary = namedtuple(
    'LocationSummary',
    ('listener_id', 'modal_regions', 'holiday_regions'))

FilterResult = namedtuple('FilterResult', ('eligible', 'excluded'))

EXCLUDE_LOW_ACTIVITY = 'low activity'
EXCLUDE_DEMOGRAPHICS = 'missing demographics'
EXCLUDE_LOCATION = 'unreliable location'


class ParseStats(object):
    """
    Counts of lines read from an event log, and a few examples of
    malformed lines.
    """

    def __init__(self):
        self.n_lines = 0
        self.n_events = 0
        self.n_malformed = 0
        self.samples = []
        self.max_event_year = None

    def record_malformed(self, line_number, line, problem):
        self.n_malformed += 1
        if len(self.samples) < N_MALFORMED_SAMPLES:
            self.samples.append('line {}: {} ({})'.format(
                line_number, line, problem))

    @property
    def malformed_fraction(self):
        if self.n_lines == 0:
            return 0.0
        return self.n_malformed / self.n_lines

    def to_doc(self):
        return OrderedDict((
            ('n_lines', self.n_lines),
            ('n_events', self.n_events),
            ('n_malformed', self.n_malformed),
            ('max_event_year', self.max_event_year),
        ))


def parse_timestamp(value):
    """
    Parse an ISO-8601 timestamp, returning a UTC datetime.

    Timestamps without an offset are taken to be UTC.
    """

    if value.endswith('Z'):
        value = value[:-1] + '+00:00'

    timestamp = datetime.fromisoformat(value)

    if timestamp.tzinfo is None:
        return timestamp.replace(tzinfo=timezone.utc)

    return timestamp.astimezone(timezone.utc)


def format_timestamp(timestamp):
    return timestamp.astimezone(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ')


def _parse_event_line(line, max_year):
    """
    Parse one event log line, returning an (event, problem) pair.

    The event is None when the line cannot be used at all.  A problem
    with only the release year or region leaves that field unknown.
    """

    fields = line.split('\t')

    if len(fields) != len(event_columns):
        return (None, 'expected {} fields, found {}'.format(
            len(event_columns), len(fields)))

    (listener_id, timestamp, artist_id, release_year, region_code) = fields

    if not listener_id:
        return (None, 'missing listener')

    if not artist_id:
        return (None, 'missing artist')

    try:
        timestamp = parse_timestamp(timestamp)
    except ValueError:
        return (None, 'invalid timestamp "{}"'.format(timestamp))

    problem = None

    if release_year == '':
        release_year = None
    else:
        try:
            release_year = int(release_year)
        except ValueError:
            problem = 'invalid release year "{}"'.format(release_year)
            release_year = None
        else:
            if not (MIN_RELEASE_YEAR <= release_year <= max_year):
                problem = 'release year {} out of range'.format(release_year)
                release_year = None

    if region_code == '':
        region_code = None
    elif not is_region_code(region_code):
        problem = 'invalid region "{}"'.format(region_code)
        region_code = None

    return (
        ListenEvent(listener_id, timestamp, artist_id,
                    release_year, region_code),
        problem)


def parse_events(filename, stats=None, max_malformed_fraction=0.01):
    """
    Read listening events from a tab-separated event log.

    This is a generator.  Malformed lines are counted in "stats" (a
    `ParseStats` object, if given).  Once the whole file has been read,
    an error is raised if the fraction of malformed lines exceeds
    "max_malformed_fraction".
    """

    if stats is None:
        stats = ParseStats()

    max_year = datetime.now(timezone.utc).year

    try:
        f = io.open(filename, 'r', encoding='utf-8')
    except (IOError, OSError) as e:
        raise MissingInputError(
            'Could not read event log {}: {}'.format(filename, e))

    with f:
        header = tuple(f.readline().rstrip('\r\n').split('\t'))

        if header != event_columns:
            raise TasteMobilityError(
                'Event log {} does not start with the header line: {}'.format(
                    filename, ' '.join(event_columns)))

        for (line_number, line) in enumerate(f, 2):
            line = line.rstrip('\r\n')
            if not line:
                continue

            stats.n_lines += 1

            (event, problem) = _parse_event_line(line, max_year)

            if problem is not None:
                stats.record_malformed(line_number, line, problem)

            if event is not None:
                stats.n_events += 1
                year = event.timestamp.year
                if stats.max_event_year is None or year > stats.max_event_year:
                    stats.max_event_year = year

                yield event

    if stats.n_malformed:
        logger.warning(
            'Event log %s: %i of %i lines malformed',
            filename, stats.n_malformed, stats.n_lines)

    if stats.malformed_fraction > max_malformed_fraction:
        raise TasteMobilityError(
            'Event log {} has {} malformed lines out of {}, more than '
            '{:.1%}.  Examples:\n{}'.format(
                filename, stats.n_malformed, stats.n_lines,
                max_malformed_fraction, '\n'.join(stats.samples)))


def write_events(f, events, header=True):
    """
    Write events to an open text file in event log format, starting
    with the header line unless "header" is false.
    """

    if header:
        f.write('\t'.join(event_columns) + '\n')

    for event in events:
        f.write('{}\t{}\t{}\t{}\t{}\n'.format(
            event.listener_id,
            format_timestamp(event.timestamp),
            event.artist_id,
            '' if event.release_year is None else event.release_year,
            '' if event.region_code is None else event.region_code))


def parse_meta(filename):
    """
    Read listener demographics from a tab-separated file.

    Unrecognized gender codes and age buckets are recorded as None so
    that the listener is later excluded for missing demographics.
    """

    meta = OrderedDict()

    try:
        f = io.open(filename, 'r', encoding='utf-8')
    except (IOError, OSError) as e:
        raise MissingInputError(
            'Could not read listener metadata {}: {}'.format(filename, e))

    n_bad = 0

    with f:
        header = tuple(f.readline().rstrip('\r\n').split('\t'))
        if header != meta_columns:
            raise TasteMobilityError(
                'Listener metadata {} does not start with the header '
                'line: {}'.format(filename, ' '.join(meta_columns)))

        for line in f:
            line = line.rstrip('\r\n')
            if not line:
                continue

            fields = line.split('\t')
            if len(fields) != len(meta_columns) or not fields[0]:
                n_bad += 1
                continue

            (listener_id, gender_code, age_bucket) = fields

            if gender_code not in GENDER_CODES:
                gender_code = None

            try:
                age_bucket = int(age_bucket)
                if age_bucket % 5 != 0:
                    age_bucket = None
            except ValueError:
                age_bucket = None

            meta[listener_id] = ListenerMeta(
                listener_id, gender_code, age_bucket)

    if n_bad:
        logger.warning(
            'Listener metadata %s: skipped %i malformed lines',
            filename, n_bad)

    return OrderedDict(sorted(meta.items()))


def write_meta(f, meta):
    f.write('\t'.join(meta_columns) + '\n')

    for info in meta:
        f.write('{}\t{}\t{}\n'.format(
            info.listener_id,
            '' if info.gender_code is None else info.gender_code,
            '' if info.age_bucket is None else info.age_bucket))


def draw_sampled_days(period_range, n_days, seed):
    """
    Choose the sampled days of a period uniformly without replacement,
    using a substream of the seed named after the period.
    """

    n_total = (period_range.end - period_range.start).days + 1

    if not (0 < n_days <= n_total):
        raise TasteMobilityError(
            'Cannot sample {} days from period {} of {} days.'.format(
                n_days, period_range.id, n_total))

    rng = substream(seed, 'sampled-days', period_range.id)
    offsets = sorted(int(x) for x in rng.choice(
        n_total, size=n_days, replace=False))

    return SamplePeriod(
        id=period_range.id,
        start=period_range.start,
        end=period_range.end,
        sampled_days=tuple(
            period_range.start + timedelta(days=x) for x in offsets))


def sample_periods(config):
    return OrderedDict(
        (x.id, draw_sampled_days(x, config.sampled_days_per_period, config.seed))
        for x in config.periods)


def _sorted_counter(counter):
    return OrderedDict(sorted(counter.items()))


def aggregate_periods(events, periods):
    """
    Aggregate events over the sampled days of each period in a single
    pass.

    Returns an ordered dictionary by period identifier of ordered
    dictionaries by listener identifier of `PeriodAggregate` tuples.
    Events on days which were not sampled are ignored.
    """

    periods = list(periods)
    day_period = {}
    for period in periods:
        for day in period.sampled_days:
            day_period[day] = period.id

    artist_counts = defaultdict(Counter)
    region_counts = defaultdict(Counter)
    year_counts = defaultdict(Counter)

    for event in events:
        period_id = day_period.get(event.timestamp.date())
        if period_id is None:
            continue

        key = (period_id, event.listener_id)
        artist_counts[key][event.artist_id] += 1

        if event.region_code is not None:
            region_counts[key][event.region_code] += 1

        if event.release_year is not None:
            year_counts[key][event.release_year] += 1

    result = OrderedDict((x.id, OrderedDict()) for x in periods)

    for key in sorted(artist_counts.keys()):
        (period_id, listener_id) = key
        result[period_id][listener_id] = PeriodAggregate(
            listener_id=listener_id,
            period=period_id,
            artist_counts=_sorted_counter(artist_counts[key]),
            region_counts=_sorted_counter(region_counts[key]),
            release_year_counts=_sorted_counter(year_counts[key]))

    return result


def aggregate_period(events, period):
    return aggregate_periods(events, [period])[period.id]


def aggregates_to_doc(aggregates, listeners=None):
    return OrderedDict(
        (period_id, OrderedDict(
            (listener_id, OrderedDict((
                ('artists', aggregate.artist_counts),
                ('regions', aggregate.region_counts),
                ('release_years', OrderedDict(
                    ('{}'.format(year), count) for (year, count)
                    in aggregate.release_year_counts.items())),
            )))
            for (listener_id, aggregate) in period_aggregates.items()
            if listeners is None or listener_id in listeners))
        for (period_id, period_aggregates) in aggregates.items())


def aggregates_from_doc(doc):
    return OrderedDict(
        (period_id, OrderedDict(
            (listener_id, PeriodAggregate(
                listener_id=listener_id,
                period=period_id,
                artist_counts=_sorted_counter(entry['artists']),
                region_counts=_sorted_counter(entry['regions']),
                release_year_counts=_sorted_counter(Counter(
                    {int(year): count for (year, count)
                     in entry['release_years'].items()}))))
            for (listener_id, entry) in sorted(period_doc.items())))
        for (period_id, period_doc) in doc.items())


def modal_region(region_counts):
    """
    Get the region with the strictly largest count, or `AMBIGUOUS` if
    there is a tie or there are no counts.
    """

    if not region_counts:
        return AMBIGUOUS

    top = max(region_counts.values())
    leaders = [x for (x, count) in region_counts.items() if count == top]

    if len(leaders) != 1:
        return AMBIGUOUS

    return leaders[0]


def holiday_regions(events, holiday_windows):
    """
    Find each listener's modal region during each holiday window.

    Returns an ordered dictionary by listener of tuples of
    (holiday identifier, region) pairs, in window order.  The region is
    None when the listener has no located streams in the window and
    `AMBIGUOUS` when there is a tie.
    """

    holiday_windows = list(holiday_windows)
    day_window = {}
    for window in holiday_windows:
        day = window.start
        while day <= window.end:
            day_window[day] = window.id
            day += timedelta(days=1)

    counts = defaultdict(Counter)

    for event in events:
        if event.region_code is None:
            continue

        window_id = day_window.get(event.timestamp.date())
        if window_id is None:
            continue

        counts[(event.listener_id, window_id)][event.region_code] += 1

    listeners = sorted(set(x[0] for x in counts.keys()))

    return OrderedDict(
        (listener_id, tuple(
            (window.id, modal_region(counts[(listener_id, window.id)])
             if (listener_id, window.id) in counts else None)
            for window in holiday_windows))
        for listener_id in listeners)


def location_summaries(aggregates, holidays, holiday_windows):
    """
    Combine each listener's per-period modal region with their holiday
    regions.
    """

    listeners = sorted(set(
        x for period_aggregates in aggregates.values()
        for x in period_aggregates.keys()))

    no_holidays = tuple((x.id, None) for x in holiday_windows)

    result = OrderedDict()

    for listener_id in listeners:
        modal_regions = OrderedDict()
        for (period_id, period_aggregates) in aggregates.items():
            aggregate = period_aggregates.get(listener_id)
            modal_regions[period_id] = modal_region(
                {} if aggregate is None else aggregate.region_counts)

        result[listener_id] = LocationSummary(
            listener_id=listener_id,
            modal_regions=modal_regions,
            holiday_regions=holidays.get(listener_id, no_holidays))

    return result


def summaries_to_doc(summaries):
    return OrderedDict(
        (listener_id, OrderedDict((
            ('modal_regions', summary.modal_regions),
            ('holiday_regions', [list(x) for x in summary.holiday_regions]),
        )))
        for (listener_id, summary) in summaries.items())


def summaries_from_doc(doc):
    return OrderedDict(
        (listener_id, LocationSummary(
            listener_id=listener_id,
            modal_regions=OrderedDict(sorted(entry['modal_regions'].items())),
            holiday_regions=tuple(
                (holiday_id, region)
                for (holiday_id, region) in entry['holiday_regions'])))
        for (listener_id, entry) in sorted(doc.items()))


def filter_listeners(aggregates, meta, config, summaries=None):
    """
    Decide which listeners are eligible for analysis.

    A listener needs at least "min_streams_per_profile" streams in every
    sample period, complete demographics, and an unambiguous modal
    region in each of P1 and P2.  Returns a `FilterResult` with the
    eligible listeners (a frozenset) and a dictionary giving the reason
    each other listener was excluded.
    """

    if summaries is None:
        summaries = location_summaries(aggregates, {}, ())

    listeners = sorted(set(meta.keys()).union(
        x for period_aggregates in aggregates.values()
        for x in period_aggregates.keys()))

    eligible = []
    excluded = OrderedDict()

    for listener_id in listeners:
        totals = []
        for period_id in PERIOD_IDS:
            aggregate = aggregates.get(period_id, {}).get(listener_id)
            totals.append(
                0 if aggregate is None
                else sum(aggregate.artist_counts.values()))

        if min(totals) < config.min_streams_per_profile:
            excluded[listener_id] = EXCLUDE_LOW_ACTIVITY
            continue

        if not meta_is_complete(meta.get(listener_id)):
            excluded[listener_id] = EXCLUDE_DEMOGRAPHICS
            continue

        summary = summaries.get(listener_id)
        if summary is None or not all(
                is_known_region(summary.modal_regions.get(x))
                for x in ('P1', 'P2')):
            excluded[listener_id] = EXCLUDE_LOCATION
            continue

        eligible.append(listener_id)

    counts = Counter(excluded.values())
    logger.info(
        'Eligible listeners: %i; excluded: %s', len(eligible),
        ', '.join('{} {}'.format(n, reason)
                  for (reason, n) in sorted(counts.items())) or 'none')

    return FilterResult(frozenset(eligible), excluded)


def profile_from_artist_counts(
        owner_id, period, artist_counts, artist_to_genre, n_genres):
    """
    Convert artist stream counts to a genre profile, dropping artists
    outside the taxonomy.
    """

    counts = [0] * n_genres

    for (artist_id, count) in artist_counts.items():
        genre = artist_to_genre.get(artist_id)
        if genre is not None:
            counts[genre] += count

    return TasteProfile(owner_id, period, counts)


def listener_profiles(aggregates, taxonomy, eligible):
    """
    Build genre profiles for eligible listeners in each period, plus
    each listener's profile summed over all periods under the
    `AGGREGATE` key.
    """

    n_genres = taxonomy.n_genres
    result = OrderedDict()

    for (period_id, period_aggregates) in aggregates.items():
        result[period_id] = OrderedDict(
            (listener_id, profile_from_artist_counts(
                listener_id, period_id, aggregate.artist_counts,
                taxonomy.artist_to_genre, n_genres))
            for (listener_id, aggregate) in period_aggregates.items()
            if listener_id in eligible)

    combined = OrderedDict()
    for listener_id in sorted(eligible):
        counts = [0] * n_genres
        for period_profiles in result.values():
            profile = period_profiles.get(listener_id)
            if profile is not None:
                counts = profile.counts + counts
        combined[listener_id] = TasteProfile(listener_id, AGGREGATE, counts)

    result[AGGREGATE] = combined

    return result


def profiles_to_doc(profiles):
    return OrderedDict(
        (period_id, OrderedDict(
            (owner_id, [int(x) for x in profile.counts])
            for (owner_id, profile) in period_profiles.items()))
        for (period_id, period_profiles) in profiles.items())


def profiles_from_doc(doc):
    return OrderedDict(
        (period_id, OrderedDict(
            (owner_id, TasteProfile(owner_id, period_id, counts))
            for (owner_id, counts) in sorted(period_doc.items())))
        for (period_id, period_doc) in doc.items())
