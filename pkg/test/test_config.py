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

from taste_mobility.config import \
    HolidayWindow, config_from_doc, config_to_doc, default_config, \
    load_config, validate_config
from taste_mobility.error import ConfigError, MissingInputError


class ConfigTest(TestCase):
    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def _write(self, doc):
        filename = os.path.join(self.directory, 'config.json')
        with open(filename, 'w') as f:
            json.dump(doc, f)
        return filename

    def test_default(self):
        config = default_config()

        self.assertEqual(validate_config(config), [])
        self.assertEqual([x.id for x in config.periods], ['P1', 'P2', 'P3'])
        self.assertEqual(config.periods[0].start, date(2017, 3, 1))
        self.assertEqual(config.sampled_days_per_period, 9)
        self.assertEqual(config.session_gap_minutes, 30)
        self.assertEqual(config.n_genres, 200)
        self.assertEqual(config.min_streams_per_profile, 200)
        self.assertEqual(
            [x.id for x in config.holiday_windows],
            ['christmas-2016', 'thanksgiving-2017', 'christmas-2017'])

    def test_doc_round_trip(self):
        config = default_config()
        self.assertEqual(config_from_doc(config_to_doc(config)), config)

    def test_load(self):
        config = load_config(
            self._write({'n_genres': 20, 'top_n_artists': 100}), seed=7)

        self.assertEqual(config.n_genres, 20)
        self.assertEqual(config.top_n_artists, 100)
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.session_gap_minutes, 30)

        with self.assertRaisesRegex(ConfigError, 'Unknown configuration'):
            load_config(self._write({'n_genre': 20}))

        with self.assertRaises(ConfigError):
            load_config(self._write({'n_genres': 'many'}))

        with self.assertRaises(MissingInputError):
            load_config(os.path.join(self.directory, 'missing.json'))

    def test_violations(self):
        config = default_config()

        self.assertIn(
            'K must be positive',
            validate_config(config._replace(n_genres=0)))

        short_window = HolidayWindow(
            'christmas-2016', date(2016, 12, 23), date(2016, 12, 26))
        self.assertIn(
            'holiday window christmas-2016 spans 4 days; expected 5',
            validate_config(config._replace(
                holiday_windows=(
                    (short_window,) + config.holiday_windows[1:]))))

        self.assertIn(
            'seed must be a 64-bit unsigned integer',
            validate_config(config._replace(seed=-1)))

        self.assertIn(
            'taste_distance must be one of unifrac, jsd',
            validate_config(config._replace(taste_distance='cosine')))

        violations = validate_config(config._replace(
            sampled_days_per_period=1000))
        self.assertEqual(len(violations), 3)
