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
from collections import OrderedDict
from contextlib import contextmanager
import hashlib
import io
import json
import logging
import os
import time

from .error import MissingInputError, TasteMobilityError
from .model import dumps_document
from .version import version

logger = logging.getLogger(__name__)

# Tables are written with this float format so that output is
# reproducible byte for byte.
float_format = '%.12g'


def ensure_directory(path):
    if not os.path.exists(path):
        os.makedirs(path)
    return path


def write_document(filename, doc):
    ensure_directory(os.path.dirname(filename) or '.')

    with io.open(filename, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps_document(doc))


def read_document(filename, producer=None):
    """
    Read a JSON document written by an earlier command.

    "producer" names that command for the error message if the file is
    missing.
    """

    try:
        with open(filename, 'rb') as f:
            text = utf_8_decode(f.read())[0]
    except (IOError, OSError):
        if producer is None:
            raise MissingInputError(
                'Required input {} is missing.'.format(filename))
        raise MissingInputError(
            'Required input {} is missing: run the "{}" command '
            'first.'.format(filename, producer))

    try:
        return json.loads(text, object_pairs_hook=OrderedDict)
    except ValueError as e:
        raise TasteMobilityError(
            'Could not parse {}: {}'.format(filename, e))


def write_table(filename, table):
    """
    Write a pandas table as CSV.  Missing values become empty cells.
    """

    ensure_directory(os.path.dirname(filename) or '.')

    with io.open(filename, 'w', encoding='utf-8', newline='\n') as f:
        table.to_csv(f, index=False, float_format=float_format,
                     lineterminator='\n')


def file_digest(filename):
    digest = hashlib.sha256()

    with open(filename, 'rb') as f:
        for block in iter(lambda: f.read(1 << 20), b''):
            digest.update(block)

    return digest.hexdigest()


class RunManifest(object):
    """
    Record of one command run: its configuration, the digests of the
    files it read and wrote, and the time spent in each stage.
    """

    def __init__(self, command, config_doc, threads=1):
        self.command = command
        self.config_doc = config_doc
        self.threads = threads
        self.inputs = OrderedDict()
        self.outputs = OrderedDict()
        self.timings = OrderedDict()

    def record_input(self, filename):
        if not os.path.exists(filename):
            raise MissingInputError(
                'Required input {} is missing.'.format(filename))

        self.inputs[filename] = file_digest(filename)

    def record_output(self, filename):
        self.outputs[filename] = file_digest(filename)

    @contextmanager
    def stage(self, name):
        logger.info('Starting stage: %s', name)
        start = time.time()

        try:
            yield

        finally:
            elapsed = time.time() - start
            self.timings[name] = elapsed
            logger.debug('Stage %s took %.3f s', name, elapsed)

    def to_doc(self):
        return OrderedDict((
            ('command', self.command),
            ('version', version),
            ('threads', self.threads),
            ('config', self.config_doc),
            ('inputs', self.inputs),
            ('outputs', self.outputs),
            ('timings', self.timings),
        ))

    def write(self, filename):
        write_document(filename, self.to_doc())
