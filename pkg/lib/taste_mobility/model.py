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

from collections import namedtuple, OrderedDict
import hashlib
import json
import re

import numpy as np

from .error import TasteMobilityError

# Region value used when no single region has the strictly largest count.
AMBIGUOUS = 'ambiguous'

# Key of the profile summed over all sample periods.
AGGREGATE = 'aggregate'

UNKNOWN_GENRE = 'UNKNOWN'

GENDER_CODES = ('M', 'F', 'X')

PERIOD_IDS = ('P1', 'P2', 'P3')

region_code_pattern = re.compile(r'^[A-Z]{2}$')

ListenEvent = namedtuple(
    'ListenEvent',
    ('listener_id', 'timestamp', 'artist_id', 'release_year', 'region_code'))

ListenerMeta = namedtuple(
    'ListenerMeta',
    ('listener_id', 'gender_code', 'age_bucket'))

SamplePeriod = namedtuple(
    'SamplePeriod',
    ('id', 'start', 'end', 'sampled_days'))


def is_region_code(value):
    return value is not None and region_code_pattern.match(value) is not None


def is_known_region(value):
    """
    Determine whether a modal region value names a single region,
    rather than being absent or ambiguous.
    """

    return value is not None and value != AMBIGUOUS


def meta_is_complete(meta):
    return (
        meta is not None and
        meta.gender_code in GENDER_CODES and
        meta.age_bucket is not None and
        meta.age_bucket % 5 == 0)


class TasteProfile(object):
    """
    Stream counts per genre for one owner (a listener or a region)
    during one period.

    The counts array is copied and marked read-only.
    """

    __slots__ = ('owner_id', 'period', 'counts')

    def __init__(self, owner_id, period, counts):
        counts = np.array(counts, dtype=np.int64)

        if counts.ndim != 1:
            raise TasteMobilityError(
                'Profile counts for {} must be one-dimensional.'.format(
                    owner_id))

        if np.any(counts < 0):
            raise TasteMobilityError(
                'Profile counts for {} must not be negative.'.format(
                    owner_id))

        counts.flags.writeable = False

        self.owner_id = owner_id
        self.period = period
        self.counts = counts

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def n_genres(self):
        return len(self.counts)

    def normalized(self):
        """
        Get the profile as a probability vector.

        An empty profile cannot be normalized and raises an error.
        """

        total = self.total

        if total == 0:
            raise TasteMobilityError(
                'Profile for {} in {} contains no streams.'.format(
                    self.owner_id, self.period))

        return self.counts / total

    def __eq__(self, other):
        return (
            isinstance(other, TasteProfile) and
            self.owner_id == other.owner_id and
            self.period == other.period and
            np.array_equal(self.counts, other.counts))

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return 'TasteProfile({!r}, {!r}, total={})'.format(
            self.owner_id, self.period, self.total)


def sum_profiles(owner_id, period, profiles, n_genres):
    counts = np.zeros(n_genres, dtype=np.int64)

    for profile in profiles:
        counts += profile.counts

    return TasteProfile(owner_id, period, counts)


class GenreTree(object):
    """
    Rooted binary tree over genre indices.

    Nodes 0 .. K-1 are the leaves, node i carrying genre i.  Internal
    nodes follow, each listed after both of its children, so that the
    last node is the root.  Each node has a branch length (the length of
    the edge to its parent, zero for the root) and a height above the
    leaves.
    """

    def __init__(self, children, branch_lengths, heights):
        self.children = tuple(
            None if x is None else (int(x[0]), int(x[1])) for x in children)
        self.branch_lengths = np.array(branch_lengths, dtype=float)
        self.heights = np.array(heights, dtype=float)

        n_nodes = len(self.children)

        if n_nodes == 0:
            raise TasteMobilityError('A genre tree needs at least one node.')

        if not (len(self.branch_lengths) == len(self.heights) == n_nodes):
            raise TasteMobilityError(
                'Genre tree node arrays have inconsistent lengths.')

        n_leaves = sum(1 for x in self.children if x is None)

        if any(x is not None for x in self.children[:n_leaves]):
            raise TasteMobilityError(
                'Genre tree leaves must precede the internal nodes.')

        if n_nodes != 2 * n_leaves - 1:
            raise TasteMobilityError(
                'Genre tree with {} leaves has {} nodes, expected {}.'.format(
                    n_leaves, n_nodes, 2 * n_leaves - 1))

        if np.any(self.branch_lengths < 0):
            raise TasteMobilityError(
                'Genre tree branch lengths must not be negative.')

        self.n_leaves = n_leaves
        self.root = n_nodes - 1

        parent = np.full(n_nodes, -1, dtype=int)
        leaf_matrix = np.zeros((n_nodes, n_leaves), dtype=float)
        leaf_matrix[:n_leaves, :] = np.eye(n_leaves)

        for node in range(n_leaves, n_nodes):
            for child in self.children[node]:
                if not (0 <= child < node) or parent[child] != -1:
                    raise TasteMobilityError(
                        'Genre tree node {} has an invalid child {}.'.format(
                            node, child))

                parent[child] = node
                leaf_matrix[node] += leaf_matrix[child]

        if np.any(parent[:-1] < 0):
            raise TasteMobilityError('Genre tree is not connected.')

        self.parent = parent

        # Row e gives the leaves below node e.
        self.leaf_matrix = leaf_matrix

        # Distance from the root, filled top-down.
        depth = np.zeros(n_nodes, dtype=float)
        for node in range(n_nodes - 2, -1, -1):
            depth[node] = depth[parent[node]] + self.branch_lengths[node]

        self.leaf_depths = depth[:n_leaves]

    def is_ultrametric(self, tolerance=1e-9):
        return bool(np.ptp(self.leaf_depths) <= tolerance)

    def to_newick(self):
        """
        Write the tree in canonical Newick form, with leaves named by
        their genre index and branch lengths written to 12 significant
        figures.
        """

        return self._newick_node(self.root, root=True) + ';'

    def _newick_node(self, node, root=False):
        children = self.children[node]

        if children is None:
            text = '{}'.format(node)
        else:
            text = '({},{})'.format(
                self._newick_node(children[0]),
                self._newick_node(children[1]))

        if root:
            return text

        return '{}:{:.12g}'.format(text, self.branch_lengths[node])

    @classmethod
    def from_newick(cls, text):
        """
        Parse a tree written by `to_newick`.

        Internal nodes are numbered in post-order after the leaves.
        """

        parser = _NewickParser(text)
        return parser.parse()

    def __eq__(self, other):
        return (
            isinstance(other, GenreTree) and
            self.to_newick() == other.to_newick())

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return 'GenreTree({!r})'.format(self.to_newick())


class _NewickParser(object):
    token_pattern = re.compile(r'\s*([(),:;]|[^(),:;\s]+)')

    def __init__(self, text):
        self.tokens = self.token_pattern.findall(text)
        self.position = 0
        self.leaves = {}
        self.internal = []

    def parse(self):
        root = self._node()
        root_length = self._length()

        if self._next() != ';' or self.position != len(self.tokens):
            raise TasteMobilityError('Newick text does not end with ";".')

        n_leaves = len(self.leaves)
        if sorted(self.leaves.keys()) != list(range(n_leaves)):
            raise TasteMobilityError(
                'Newick leaves must be named 0 .. K-1 without repeats.')

        # Assign node numbers: leaves by name, internal nodes in post-order.
        numbers = {}
        for (name, leaf) in self.leaves.items():
            numbers[id(leaf)] = name
        for (i, node) in enumerate(self.internal):
            numbers[id(node)] = n_leaves + i

        n_nodes = n_leaves + len(self.internal)
        children = [None] * n_nodes
        branch_lengths = [0.0] * n_nodes
        heights = [0.0] * n_nodes

        for leaf in self.leaves.values():
            branch_lengths[numbers[id(leaf)]] = leaf['length']

        for node in self.internal:
            number = numbers[id(node)]
            (left, right) = node['children']
            children[number] = (numbers[id(left)], numbers[id(right)])
            branch_lengths[number] = node['length']
            heights[number] = heights[numbers[id(left)]] + left['length']

        branch_lengths[numbers[id(root)]] = 0.0 if root_length is None \
            else root_length

        return GenreTree(children, branch_lengths, heights)

    def _next(self):
        if self.position >= len(self.tokens):
            raise TasteMobilityError('Newick text ended unexpectedly.')

        token = self.tokens[self.position]
        self.position += 1
        return token

    def _peek(self):
        if self.position >= len(self.tokens):
            return None
        return self.tokens[self.position]

    def _length(self):
        if self._peek() != ':':
            return None

        self._next()
        token = self._next()
        try:
            return float(token)
        except ValueError:
            raise TasteMobilityError(
                'Newick branch length "{}" is not a number.'.format(token))

    def _node(self):
        token = self._next()

        if token == '(':
            left = self._node()
            left['length'] = self._length() or 0.0
            if self._next() != ',':
                raise TasteMobilityError(
                    'Newick internal nodes must have two children.')
            right = self._node()
            right['length'] = self._length() or 0.0
            if self._next() != ')':
                raise TasteMobilityError(
                    'Newick internal nodes must have two children.')

            node = {'children': (left, right), 'length': 0.0}
            self.internal.append(node)
            return node

        try:
            name = int(token)
        except ValueError:
            raise TasteMobilityError(
                'Newick leaf name "{}" is not a genre index.'.format(token))

        if name in self.leaves:
            raise TasteMobilityError(
                'Newick leaf {} appears more than once.'.format(name))

        leaf = {'children': None, 'length': 0.0}
        self.leaves[name] = leaf
        return leaf


class GenreTaxonomy(namedtuple(
        'GenreTaxonomy',
        ('artist_to_genre', 'genre_labels', 'genre_distance', 'tree'))):
    @property
    def n_genres(self):
        return len(self.genre_labels)


def substream(seed, *names):
    """
    Derive an independent random number generator for a named substream
    of the run seed.

    The same seed and names always give the same stream, regardless of
    which other substreams have been used or in which thread.
    """

    key = ':'.join(['{:d}'.format(int(seed))] + ['{}'.format(x) for x in names])
    digest = hashlib.sha256(key.encode('utf-8')).digest()

    return np.random.default_rng([
        int.from_bytes(digest[i:i + 8], 'little') for i in range(0, 32, 8)])


def dumps_document(doc):
    """
    Serialize a document as canonical JSON: keys sorted, one space
    indentation and a trailing newline.
    """

    return json.dumps(
        doc, sort_keys=True, indent=1, separators=(',', ': '),
        allow_nan=False) + '\n'


def profile_to_doc(profile):
    return OrderedDict((
        ('owner_id', profile.owner_id),
        ('period', profile.period),
        ('counts', [int(x) for x in profile.counts]),
    ))


def profile_from_doc(doc):
    return TasteProfile(doc['owner_id'], doc['period'], doc['counts'])


def taxonomy_to_doc(taxonomy):
    return OrderedDict((
        ('artist_to_genre', OrderedDict(
            (artist, int(genre))
            for (artist, genre) in sorted(taxonomy.artist_to_genre.items()))),
        ('genre_labels', list(taxonomy.genre_labels)),
        ('genre_distance', np.asarray(taxonomy.genre_distance).tolist()),
        ('tree', taxonomy.tree.to_newick()),
    ))


def taxonomy_from_doc(doc):
    try:
        taxonomy = GenreTaxonomy(
            artist_to_genre=OrderedDict(sorted(
                (artist, int(genre))
                for (artist, genre) in doc['artist_to_genre'].items())),
            genre_labels=tuple(doc['genre_labels']),
            genre_distance=np.array(doc['genre_distance'], dtype=float),
            tree=GenreTree.from_newick(doc['tree']))

    except KeyError as e:
        raise TasteMobilityError(
            'Taxonomy document is missing the {} entry.'.format(e))

    n_genres = taxonomy.n_genres

    if taxonomy.genre_distance.shape != (n_genres, n_genres):
        raise TasteMobilityError(
            'Taxonomy genre distance matrix does not match its {} '
            'labels.'.format(n_genres))

    if taxonomy.tree.n_leaves != n_genres:
        raise TasteMobilityError(
            'Taxonomy tree has {} leaves but there are {} genres.'.format(
                taxonomy.tree.n_leaves, n_genres))

    if any(not (0 <= x < n_genres)
           for x in taxonomy.artist_to_genre.values()):
        raise TasteMobilityError(
            'Taxonomy assigns an artist to an unknown genre.')

    return taxonomy
