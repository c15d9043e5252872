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
from collections import namedtuple, OrderedDict
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timedelta, timezone
from functools import partial
import io
import json
import logging
import os

import numpy as np

from .config import config_to_doc
from .error import ConfigError, MissingInputError, TasteMobilityError
from .genres import adjusted_mutual_information, tag_columns
from .ingest import sample_periods, write_events, write_meta
from .model import ListenEvent, ListenerMeta, dumps_document, substream

logger = logging.getLogger(__name__)

SynthConfig = namedtuple(
    'SynthConfig',
    ('seed', 'n_regions', 'n_genres', 'artists_per_genre',
     'listeners_per_region', 'region_concentration',
     'individual_concentration', 'mixing_weight', 'mover_fraction',
     'past_mover_fraction', 'adoption_rate', 'holiday_travel_prob',
     'streams_per_period', 'mean_session_length', 'session_stickiness',
     'tag_fraction', 'nostalgia_weight', 'nostalgia_age',
     'recency_mean_years', 'zipf_exponent', 'holiday_sessions'))

default_synth_config = SynthConfig(
    seed=2018,
    n_regions=6,
    n_genres=20,
    artists_per_genre=10,
    listeners_per_region=150,
    region_concentration=0.3,
    individual_concentration=0.5,
    mixing_weight=0.9,
    mover_fraction=0.1,
    past_mover_fraction=0.1,
    adoption_rate=0.0,
    holiday_travel_prob=0.9,
    streams_per_period=300,
    mean_session_length=8.0,
    session_stickiness=0.85,
    tag_fraction=0.8,
    nostalgia_weight=0.3,
    nostalgia_age=15,
    recency_mean_years=1.5,
    zipf_exponent=None,
    holiday_sessions=2)

REGION_CODES = (
    'CA', 'TX', 'NY', 'FL', 'IL', 'PA', 'OH', 'GA', 'NC', 'MI',
    'WA', 'AZ', 'MA', 'TN', 'IN', 'MO', 'MD', 'WI', 'CO', 'MN')

AGE_BUCKETS = (1975, 1980, 1985, 1990, 1995, 2000)

GENDER_PROBABILITIES = (('M', 0.48), ('F', 0.48), ('X', 0.04))

KIND_STAYER = 'stayer'
KIND_MOVER = 'mover'
KIND_PAST_MOVER = 'past-mover'

# Each day is divided into slots, each holding at most one session.
# Sessions start within the first half hour of their slot and last at
# most MAX_SESSION_LENGTH streams, so consecutive sessions are always
# separated by more than a 30 minute gap.
SLOT_HOURS = 2
SLOTS_PER_DAY = 24 // SLOT_HOURS
SESSION_START_SECONDS = 1800
MAX_SESSION_LENGTH = 20
STREAM_SPACING_SECONDS = (150, 180)

NOSTALGIA_SPREAD_YEARS = 2.0

# Lowest mean number of streams per listener in each sample period.
MIN_STREAMS_PER_PERIOD = 200

ListenerPlan = namedtuple(
    'ListenerPlan',
    ('listener_id', 'gender_code', 'age_bucket', 'kind', 'origin',
     'destination', 'homes', 'preferences', 'holiday_regions'))

Plant = namedtuple(
    'Plant',
    ('regions', 'region_preferences', 'artists', 'artist_genres',
     'artist_weights', 'tags'))


def load_synth_config(filename=None, seed=None):
    doc = default_synth_config._asdict()

    if filename is not None:
        try:
            with open(filename, 'rb') as f:
                user_doc = json.loads(utf_8_decode(f.read())[0])
        except (IOError, OSError) as e:
            raise MissingInputError(
                'Could not read synthetic data configuration {}: {}'.format(
                    filename, e))
        except ValueError as e:
            raise ConfigError(
                'Synthetic data configuration {} is not valid JSON: '
                '{}'.format(filename, e))

        unknown = sorted(set(user_doc.keys()) - set(SynthConfig._fields))
        if unknown:
            raise ConfigError(
                'Unknown synthetic data configuration keys: {}.'.format(
                    ', '.join(unknown)))

        doc.update(user_doc)

    if seed is not None:
        doc['seed'] = seed

    return SynthConfig(**doc)


def validate_synth_config(config):
    violations = []

    for name in ('n_regions', 'n_genres', 'artists_per_genre',
                 'listeners_per_region', 'streams_per_period',
                 'region_concentration', 'individual_concentration',
                 'holiday_sessions'):
        if not getattr(config, name) > 0:
            violations.append('{} must be positive'.format(name))

    if config.streams_per_period < MIN_STREAMS_PER_PERIOD:
        violations.append('streams_per_period must be at least {}'.format(
            MIN_STREAMS_PER_PERIOD))

    if not config.mean_session_length >= 1:
        violations.append('mean_session_length must be at least 1')

    if config.n_regions < 2:
        violations.append('n_regions must be at least 2')

    if config.n_regions > len(REGION_CODES):
        violations.append('n_regions must not exceed {}'.format(
            len(REGION_CODES)))

    for name in ('mixing_weight', 'mover_fraction', 'past_mover_fraction',
                 'adoption_rate', 'holiday_travel_prob',
                 'session_stickiness', 'tag_fraction', 'nostalgia_weight'):
        if not (0.0 <= getattr(config, name) <= 1.0):
            violations.append('{} must be between 0 and 1'.format(name))

    if config.mover_fraction + config.past_mover_fraction > 1.0:
        violations.append(
            'mover_fraction and past_mover_fraction must not sum to more '
            'than 1')

    if config.zipf_exponent is not None and config.zipf_exponent <= 0:
        violations.append('zipf_exponent must be positive')

    return violations


def matched_run_config(config, run_config):
    """
    Adapt a run configuration to a synthetic plant.

    The number of top artists is capped at the number of planted
    artists and K becomes the planted genre count.  Sweep cluster
    counts above the artist count are dropped and the planted count is
    added.
    """

    n_artists = config.n_genres * config.artists_per_genre
    top_n_artists = min(run_config.top_n_artists, n_artists)

    sweep_k_values = set(
        x for x in run_config.sweep_k_values if x <= top_n_artists)
    if config.n_genres >= 2:
        sweep_k_values.add(config.n_genres)

    return run_config._replace(
        top_n_artists=top_n_artists,
        n_genres=min(config.n_genres, top_n_artists),
        sweep_k_values=tuple(sorted(sweep_k_values)))


def _make_plant(config):
    rng = substream(config.seed, 'plant')

    regions = REGION_CODES[:config.n_regions]
    region_preferences = OrderedDict(
        (region, rng.dirichlet(
            np.full(config.n_genres, config.region_concentration)))
        for region in regions)

    artists = []
    artist_genres = []
    for genre in range(config.n_genres):
        for i in range(config.artists_per_genre):
            artists.append('A{:05d}'.format(len(artists)))
            artist_genres.append(genre)

    if config.zipf_exponent is None:
        weights = np.full(config.artists_per_genre,
                          1.0 / config.artists_per_genre)
    else:
        weights = 1.0 / np.arange(
            1, config.artists_per_genre + 1) ** config.zipf_exponent
        weights /= weights.sum()

    tags = OrderedDict(
        (artist, 'genre-{:02d}'.format(genre))
        for (artist, genre) in zip(artists, artist_genres)
        if rng.random() < config.tag_fraction)

    return Plant(
        regions=regions, region_preferences=region_preferences,
        artists=tuple(artists), artist_genres=np.array(artist_genres),
        artist_weights=weights, tags=tags)


def _plan_listeners(config, plant, holiday_windows, first_period_start):
    """
    Assign each listener demographics, a kind (stayer, mover or past
    mover), homes by period, taste preferences by period and a region
    for each holiday window.
    """

    rng = substream(config.seed, 'plan')
    plans = []

    (genders, gender_p) = zip(*GENDER_PROBABILITIES)
    n_movers = int(round(config.mover_fraction * config.listeners_per_region))
    n_past = int(round(
        config.past_mover_fraction * config.listeners_per_region))

    for region in plant.regions:
        kinds = (
            [KIND_MOVER] * n_movers + [KIND_PAST_MOVER] * n_past +
            [KIND_STAYER] * (config.listeners_per_region - n_movers - n_past))
        kinds = [kinds[i] for i in rng.permutation(len(kinds))]

        for kind in kinds:
            listener_id = 'L{:06d}'.format(len(plans))
            gender_code = genders[rng.choice(len(genders), p=gender_p)]
            age_bucket = AGE_BUCKETS[rng.integers(len(AGE_BUCKETS))]
            individual = rng.dirichlet(
                np.full(config.n_genres, config.individual_concentration))

            def base(home):
                return (config.mixing_weight *
                        plant.region_preferences[home] +
                        (1.0 - config.mixing_weight) * individual)

            origin = region
            if kind == KIND_STAYER:
                destination = region
            else:
                others = [x for x in plant.regions if x != region]
                destination = others[rng.integers(len(others))]

            adopted = ((1.0 - config.adoption_rate) * base(origin) +
                       config.adoption_rate * base(destination))

            if kind == KIND_STAYER:
                homes = (origin, origin, origin)
                preferences = (base(origin),) * 3
            elif kind == KIND_MOVER:
                homes = (origin, destination, destination)
                preferences = (base(origin), adopted, adopted)
            else:
                homes = (destination,) * 3
                preferences = (adopted,) * 3

            holidays = []
            for window in holiday_windows:
                travels = rng.random() < config.holiday_travel_prob
                if kind == KIND_STAYER:
                    holidays.append(origin)
                elif kind == KIND_MOVER and window.end < first_period_start:
                    holidays.append(origin)
                else:
                    holidays.append(origin if travels else destination)

            plans.append(ListenerPlan(
                listener_id=listener_id, gender_code=gender_code,
                age_bucket=age_bucket, kind=kind, origin=origin,
                destination=destination, homes=homes,
                preferences=preferences, holiday_regions=tuple(holidays)))

    return plans


def _session_lengths(rng, n_streams, mean_length):
    lengths = []
    remaining = n_streams

    while remaining > 0:
        length = min(int(rng.geometric(1.0 / mean_length)),
                     MAX_SESSION_LENGTH, remaining)
        lengths.append(length)
        remaining -= length

    return lengths


def _sessions(rng, config, plant, plan, preference, region, days,
              n_streams, occupied):
    """
    Generate streams in sessions placed on distinct slots of the given
    days.  Slots in the set "occupied" are skipped, and the slots used
    are added to it.

    Within a session the genre is kept with probability
    "session_stickiness" and otherwise redrawn from the preference.
    """

    slots = [(day, slot) for day in days for slot in range(SLOTS_PER_DAY)
             if (day, slot) not in occupied]
    lengths = _session_lengths(rng, n_streams, config.mean_session_length)

    if len(lengths) > len(slots):
        lengths = lengths[:len(slots)]

    chosen = sorted(int(x) for x in rng.choice(
        len(slots), size=len(lengths), replace=False))
    occupied.update(slots[x] for x in chosen)

    birth_year = plan.age_bucket + 2
    events = []

    for (length, slot_number) in zip(lengths, chosen):
        (day, slot) = slots[slot_number]
        time = datetime(day.year, day.month, day.day, tzinfo=timezone.utc) + \
            timedelta(seconds=(
                slot * SLOT_HOURS * 3600 +
                int(rng.integers(SESSION_START_SECONDS))))

        draws = rng.choice(config.n_genres, size=length, p=preference)
        keep = rng.random(length) < config.session_stickiness
        members = rng.choice(
            config.artists_per_genre, size=length, p=plant.artist_weights)
        nostalgic = rng.random(length) < config.nostalgia_weight
        nostalgia_years = np.rint(
            birth_year + config.nostalgia_age +
            rng.normal(0.0, NOSTALGIA_SPREAD_YEARS, size=length))
        recency_ages = rng.geometric(
            1.0 / (1.0 + config.recency_mean_years), size=length) - 1
        spacing = rng.integers(
            STREAM_SPACING_SECONDS[0], STREAM_SPACING_SECONDS[1] + 1,
            size=length)

        genre = draws[0]
        for i in range(length):
            if i > 0 and not keep[i]:
                genre = draws[i]

            if nostalgic[i]:
                release_year = min(int(nostalgia_years[i]), time.year)
            else:
                release_year = time.year - int(recency_ages[i])

            events.append(ListenEvent(
                listener_id=plan.listener_id,
                timestamp=time,
                artist_id=plant.artists[
                    genre * config.artists_per_genre + members[i]],
                release_year=max(1900, release_year),
                region_code=region))

            time += timedelta(seconds=int(spacing[i]))

    return events


def _listener_events(plan, config, plant, periods, holiday_windows):
    rng = substream(config.seed, 'listener', plan.listener_id)
    events = []
    occupied = set()

    for (period, home, preference) in zip(
            periods, plan.homes, plan.preferences):
        events.extend(_sessions(
            rng, config, plant, plan, preference, home, period.sampled_days,
            int(rng.poisson(config.streams_per_period)), occupied))

    for (window, region) in zip(holiday_windows, plan.holiday_regions):
        days = [window.start + timedelta(days=i)
                for i in range((window.end - window.start).days + 1)]

        # Use the preference in effect at the time of the holiday.
        preference = plan.preferences[0]
        for (period, period_preference) in zip(periods, plan.preferences):
            if window.start >= period.start:
                preference = period_preference

        events.extend(_sessions(
            rng, config, plant, plan, preference, region, days,
            int(round(config.holiday_sessions * config.mean_session_length)),
            occupied))

    events.sort(key=lambda x: x.timestamp)

    return events


def generate(config, run_config, out_dir, threads=1):
    """
    Generate a synthetic event log, listener metadata, artist tags and
    the ground truth used to generate them, writing them to "out_dir".

    Streams in the sample periods fall on the days sampled with the run
    configuration's seed, so that a pipeline run with the same seed
    sees them.
    """

    violations = validate_synth_config(config)
    if violations:
        raise ConfigError(
            'Invalid synthetic data configuration: {}.'.format(
                '; '.join(violations)))

    plant = _make_plant(config)
    periods = list(sample_periods(run_config).values())
    holiday_windows = list(run_config.holiday_windows)
    plans = _plan_listeners(config, plant, holiday_windows, periods[0].start)

    if not os.path.exists(out_dir):
        os.makedirs(out_dir)

    logger.info(
        'Generating streams for %i listeners in %i regions',
        len(plans), len(plant.regions))

    generate_listener = partial(
        _listener_events, config=config, plant=plant, periods=periods,
        holiday_windows=holiday_windows)

    n_events = 0
    with io.open(os.path.join(out_dir, 'events.tsv'), 'w',
                 encoding='utf-8', newline='\n') as f:
        write_events(f, [])
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for events in pool.map(generate_listener, plans):
                write_events(f, events, header=False)
                n_events += len(events)

    with io.open(os.path.join(out_dir, 'meta.tsv'), 'w',
                 encoding='utf-8', newline='\n') as f:
        write_meta(f, [
            ListenerMeta(x.listener_id, x.gender_code, x.age_bucket)
            for x in plans])

    with io.open(os.path.join(out_dir, 'tags.tsv'), 'w',
                 encoding='utf-8', newline='\n') as f:
        f.write('\t'.join(tag_columns) + '\n')
        for (artist, tag) in plant.tags.items():
            f.write('{}\t{}\n'.format(artist, tag))

    truth = ground_truth_doc(config, run_config, plant, plans)

    with io.open(os.path.join(out_dir, 'ground_truth.json'), 'w',
                 encoding='utf-8', newline='\n') as f:
        f.write(dumps_document(truth))

    with io.open(os.path.join(out_dir, 'run_config.json'), 'w',
                 encoding='utf-8', newline='\n') as f:
        f.write(dumps_document(config_to_doc(
            matched_run_config(config, run_config))))

    logger.info('Wrote %i events', n_events)

    return truth


def ground_truth_doc(config, run_config, plant, plans):
    return OrderedDict((
        ('seed', run_config.seed),
        ('synth_config', config._asdict()),
        ('adoption_rate', config.adoption_rate),
        ('regions', OrderedDict(
            (region, [float(x) for x in preference])
            for (region, preference) in plant.region_preferences.items())),
        ('artist_genre', OrderedDict(
            (artist, int(genre)) for (artist, genre)
            in zip(plant.artists, plant.artist_genres))),
        ('listeners', OrderedDict(
            (x.listener_id, OrderedDict((
                ('kind', x.kind),
                ('origin', x.origin),
                ('destination', x.destination),
                ('homes', list(x.homes)),
                ('holiday_regions', list(x.holiday_regions)),
            )))
            for x in plans)),
    ))


def read_ground_truth(filename):
    try:
        with open(filename, 'rb') as f:
            return json.loads(utf_8_decode(f.read())[0])
    except (IOError, OSError) as e:
        raise MissingInputError(
            'Could not read ground truth {}: {}'.format(filename, e))


def _precision_recall(detected, truth):
    detected = set(detected)
    truth = set(truth)
    hits = len(detected & truth)

    return (
        hits / len(detected) if detected else None,
        hits / len(truth) if truth else None)


def score_recovery(
        truth, seed, taxonomy=None, short_movers=None, long_movers=None,
        eligible=None, long_term_table=None):
    """
    Compare pipeline outputs with the ground truth of a synthetic run.

    Mover recall is measured over the planted movers who are eligible
    (if "eligible" is given).  The effect estimate is the negated mean
    normalized paired difference of the long-term shift test, which
    grows with the planted adoption rate.
    """

    if seed != truth['seed']:
        raise TasteMobilityError(
            'Ground truth was generated with seed {} but the pipeline '
            'ran with seed {}.'.format(truth['seed'], seed))

    listeners = truth['listeners']
    report = OrderedDict()

    for movers in (short_movers, long_movers):
        if movers is None:
            continue
        unknown = [x.listener_id for x in movers
                   if x.listener_id not in listeners]
        if unknown:
            raise TasteMobilityError(
                'Listener identifiers do not match the ground truth, '
                'e.g. {}.'.format(unknown[0]))

    if taxonomy is not None:
        artists = [x for x in taxonomy.artist_to_genre.keys()
                   if x in truth['artist_genre']]
        report['genre_ami'] = adjusted_mutual_information(
            [truth['artist_genre'][x] for x in artists],
            [taxonomy.artist_to_genre[x] for x in artists])
        report['n_scored_artists'] = len(artists)

    for (name, movers, kind) in (
            ('short_term', short_movers, KIND_MOVER),
            ('long_term', long_movers, KIND_PAST_MOVER)):
        if movers is None:
            continue

        truth_ids = [
            x for (x, info) in listeners.items() if info['kind'] == kind
            and (eligible is None or x in eligible)]

        (precision, recall) = _precision_recall(
            [x.listener_id for x in movers], truth_ids)

        report['{}_precision'.format(name)] = precision
        report['{}_recall'.format(name)] = recall

        correct = [
            x for x in movers
            if listeners[x.listener_id]['kind'] == kind and
            listeners[x.listener_id]['origin'] == x.origin]
        report['{}_origin_accuracy'.format(name)] = \
            len(correct) / len(movers) if movers else None

    report['planted_adoption_rate'] = truth['adoption_rate']

    if long_term_table is not None and 'normalized' in long_term_table and \
            len(long_term_table):
        report['effect_estimate'] = \
            -float(long_term_table['normalized'].mean())

    return report
