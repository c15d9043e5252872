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
from datetime import datetime
import json
from pkgutil import get_data

from .error import ConfigError, MissingInputError
from .model import PERIOD_IDS

PeriodRange = namedtuple('PeriodRange', ('id', 'start', 'end'))

HolidayWindow = namedtuple('HolidayWindow', ('id', 'start', 'end'))

RunConfig = namedtuple(
    'RunConfig',
    ('seed', 'periods', 'sampled_days_per_period', 'session_gap_minutes',
     'include_self_transitions', 'n_genres', 'top_n_artists',
     'min_streams_per_profile', 'pairs_per_stratum_sample',
     'holiday_windows', 'min_holidays', 'match_favorite_genre',
     'taste_distance', 'unifrac_normalized', 'shift_reference',
     'reference_year', 'min_cell_streams', 'age_z_axis',
     'rarefaction_depths', 'rarefaction_repetitions',
     'rarefaction_listeners', 'sweep_k_values', 'region_genre_count'))

HOLIDAY_WINDOW_DAYS = 5

TASTE_DISTANCES = ('unifrac', 'jsd')

SHIFT_REFERENCES = ('region', 'stratum', 'peer')

AGE_Z_AXES = ('listener_age', 'release_year')

date_format = '%Y-%m-%d'


class _DefaultConfig(object):
    # Parsed contents of the packaged "default_config.json" file, read
    # the first time it is needed.
    _doc = None

    @classmethod
    def get_doc(cls):
        if cls._doc is None:
            cls._doc = json.loads(utf_8_decode(
                get_data('taste_mobility', 'data/default_config.json'))[0],
                object_pairs_hook=OrderedDict)

        return OrderedDict(cls._doc)


def default_config():
    return config_from_doc(_DefaultConfig.get_doc())


def load_config(filename=None, seed=None):
    """
    Get the run configuration.

    Values from the JSON file "filename", if given, override the
    packaged defaults, and "seed" (if not None) overrides both.
    Unknown keys are rejected.
    """

    doc = _DefaultConfig.get_doc()

    if filename is not None:
        try:
            with open(filename, 'rb') as f:
                user_json = f.read()
        except (IOError, OSError) as e:
            raise MissingInputError(
                'Could not read configuration file {}: {}'.format(
                    filename, e))

        try:
            user_doc = json.loads(utf_8_decode(user_json)[0])
        except ValueError as e:
            raise ConfigError(
                'Configuration file {} is not valid JSON: {}'.format(
                    filename, e))

        if not isinstance(user_doc, dict):
            raise ConfigError(
                'Configuration file {} must contain a JSON object.'.format(
                    filename))

        unknown = sorted(set(user_doc.keys()) - set(RunConfig._fields))
        if unknown:
            raise ConfigError(
                'Unknown configuration keys: {}.'.format(', '.join(unknown)))

        doc.update(user_doc)

    if seed is not None:
        doc['seed'] = seed

    return config_from_doc(doc)


def _parse_date(value, context):
    try:
        return datetime.strptime(value, date_format).date()
    except (TypeError, ValueError):
        raise ConfigError(
            'Date "{}" for {} is not in YYYY-MM-DD format.'.format(
                value, context))


def _parse_int(value, name):
    if isinstance(value, bool):
        raise ConfigError('Value for {} must be an integer.'.format(name))

    try:
        result = int(value)
    except (TypeError, ValueError):
        raise ConfigError('Value for {} must be an integer.'.format(name))

    if result != value and not isinstance(value, str):
        raise ConfigError('Value for {} must be an integer.'.format(name))

    return result


def config_from_doc(doc):
    missing = sorted(set(RunConfig._fields) - set(doc.keys()))
    if missing:
        raise ConfigError(
            'Configuration is missing keys: {}.'.format(', '.join(missing)))

    try:
        periods = tuple(
            PeriodRange(
                id=period_id,
                start=_parse_date(start, period_id),
                end=_parse_date(end, period_id))
            for (period_id, (start, end)) in sorted(doc['periods'].items()))

        holiday_windows = tuple(sorted((
            HolidayWindow(
                id=holiday_id,
                start=_parse_date(start, holiday_id),
                end=_parse_date(end, holiday_id))
            for (holiday_id, (start, end))
            in doc['holiday_windows'].items()),
            key=lambda x: (x.start, x.id)))

    except (AttributeError, TypeError, ValueError):
        raise ConfigError(
            'Periods and holiday windows must map identifiers '
            'to [start, end] date pairs.')

    integers = {
        name: _parse_int(doc[name], name) for name in (
            'seed', 'sampled_days_per_period', 'session_gap_minutes',
            'n_genres', 'top_n_artists', 'min_streams_per_profile',
            'pairs_per_stratum_sample', 'min_holidays', 'min_cell_streams',
            'rarefaction_repetitions', 'rarefaction_listeners',
            'region_genre_count')}

    reference_year = doc['reference_year']
    if reference_year is not None:
        reference_year = _parse_int(reference_year, 'reference_year')

    try:
        rarefaction_depths = tuple(
            _parse_int(x, 'rarefaction_depths')
            for x in doc['rarefaction_depths'])
        sweep_k_values = tuple(
            _parse_int(x, 'sweep_k_values') for x in doc['sweep_k_values'])
    except TypeError:
        raise ConfigError(
            'Rarefaction depths and sweep cluster counts must be lists.')

    return RunConfig(
        periods=periods,
        holiday_windows=holiday_windows,
        reference_year=reference_year,
        rarefaction_depths=rarefaction_depths,
        sweep_k_values=sweep_k_values,
        include_self_transitions=bool(doc['include_self_transitions']),
        match_favorite_genre=bool(doc['match_favorite_genre']),
        unifrac_normalized=bool(doc['unifrac_normalized']),
        taste_distance=doc['taste_distance'],
        shift_reference=doc['shift_reference'],
        age_z_axis=doc['age_z_axis'],
        **integers)


def config_to_doc(config):
    doc = OrderedDict()

    for name in RunConfig._fields:
        value = getattr(config, name)

        if name in ('periods', 'holiday_windows'):
            value = OrderedDict(
                (x.id, [x.start.strftime(date_format),
                        x.end.strftime(date_format)])
                for x in value)

        elif isinstance(value, tuple):
            value = list(value)

        doc[name] = value

    return doc


def validate_config(config):
    """
    Check a run configuration, returning a list of violation messages
    (empty if the configuration is valid).
    """

    violations = []

    if not (0 <= config.seed < 2 ** 64):
        violations.append('seed must be a 64-bit unsigned integer')

    for (name, label) in (
            ('n_genres', 'K'),
            ('top_n_artists', 'top_n_artists'),
            ('sampled_days_per_period', 'sampled_days_per_period'),
            ('session_gap_minutes', 'session_gap_minutes'),
            ('min_streams_per_profile', 'min_streams_per_profile'),
            ('pairs_per_stratum_sample', 'pairs_per_stratum_sample'),
            ('rarefaction_repetitions', 'rarefaction_repetitions'),
            ('rarefaction_listeners', 'rarefaction_listeners'),
            ('region_genre_count', 'region_genre_count')):
        if getattr(config, name) <= 0:
            violations.append('{} must be positive'.format(label))

    if config.n_genres > config.top_n_artists > 0:
        violations.append('K must not exceed top_n_artists')

    if config.min_cell_streams < 0:
        violations.append('min_cell_streams must not be negative')

    period_ids = tuple(x.id for x in config.periods)
    if period_ids != PERIOD_IDS:
        violations.append('periods must be exactly {}'.format(
            ', '.join(PERIOD_IDS)))

    for period in config.periods:
        n_days = (period.end - period.start).days + 1
        if n_days < 1:
            violations.append('period {} ends before it starts'.format(
                period.id))
        elif config.sampled_days_per_period > n_days:
            violations.append(
                'period {} has {} days, fewer than the {} to sample'.format(
                    period.id, n_days, config.sampled_days_per_period))

    for (earlier, later) in zip(config.periods, config.periods[1:]):
        if later.start <= earlier.end:
            violations.append('periods {} and {} overlap'.format(
                earlier.id, later.id))

    for window in config.holiday_windows:
        n_days = (window.end - window.start).days + 1
        if n_days != HOLIDAY_WINDOW_DAYS:
            violations.append(
                'holiday window {} spans {} days; expected {}'.format(
                    window.id, n_days, HOLIDAY_WINDOW_DAYS))

    for (earlier, later) in zip(
            config.holiday_windows, config.holiday_windows[1:]):
        if later.start <= earlier.end:
            violations.append('holiday windows {} and {} overlap'.format(
                earlier.id, later.id))

    if not (1 <= config.min_holidays <= max(1, len(config.holiday_windows))):
        violations.append(
            'min_holidays must be between 1 and the number of '
            'holiday windows')

    if config.taste_distance not in TASTE_DISTANCES:
        violations.append('taste_distance must be one of {}'.format(
            ', '.join(TASTE_DISTANCES)))

    if config.shift_reference not in SHIFT_REFERENCES:
        violations.append('shift_reference must be one of {}'.format(
            ', '.join(SHIFT_REFERENCES)))

    if config.age_z_axis not in AGE_Z_AXES:
        violations.append('age_z_axis must be one of {}'.format(
            ', '.join(AGE_Z_AXES)))

    if any(x <= 0 for x in config.rarefaction_depths):
        violations.append('rarefaction depths must be positive')

    if any(x < 2 for x in config.sweep_k_values):
        violations.append('sweep cluster counts must be at least 2')

    return violations
