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

from collections import Counter, namedtuple, OrderedDict
import io
import logging

import numpy as np
import pandas as pd
from scipy.cluster.hierarchy import cut_tree, linkage
from scipy.spatial.distance import squareform
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_mutual_info_score, completeness_score

from .error import MissingInputError, TasteMobilityError
from .ingest import profile_from_artist_counts
from .metrics import \
    co_consumption, correlation_distance, correlation_distance_matrix, \
    genre_distances, upgma
from .model import GenreTaxonomy, UNKNOWN_GENRE, substream

logger = logging.getLogger(__name__)

__all__ = [
    'TransitionMatrix', 'TaxonomyBuild', 'correlation_distance',
    'parse_tags', 'top_artists', 'build_transitions',
    'artist_distance_matrix', 'canonical_labels', 'cluster_agglomerative',
    'cluster_kmeans', 'adjusted_mutual_information', 'completeness',
    'sweep_cluster_counts', 'label_genres', 'build_taxonomy',
]

tag_columns = ('artist_id', 'tag')

CLUSTER_METHODS = ('agglomerative', 'kmeans')

TransitionMatrix = namedtuple(
    'TransitionMatrix',
    ('artists', 'counts', 'probabilities', 'zero_rows'))

TaxonomyBuild = namedtuple(
    'TaxonomyBuild',
    ('taxonomy', 'transitions', 'artist_distance', 'partition'))


def parse_tags(filename):
    """
    Read the most frequent user tag of each artist from a tab-separated
    file.
    """

    try:
        f = io.open(filename, 'r', encoding='utf-8')
    except (IOError, OSError) as e:
        raise MissingInputError(
            'Could not read artist tags {}: {}'.format(filename, e))

    tags = OrderedDict()

    with f:
        header = tuple(f.readline().rstrip('\r\n').split('\t'))
        if header != tag_columns:
            raise TasteMobilityError(
                'Artist tags {} do not start with the header line: '
                '{}'.format(filename, ' '.join(tag_columns)))

        for line in f:
            fields = line.rstrip('\r\n').split('\t')
            if len(fields) == 2 and fields[0] and fields[1]:
                tags[fields[0]] = fields[1]

    return tags


def top_artists(totals, n):
    """
    Select the n most-streamed artists, breaking ties by identifier.
    """

    if n > len(totals):
        raise TasteMobilityError(
            'Requested the top {} artists but only {} were streamed.'.format(
                n, len(totals)))

    ranked = sorted(totals.items(), key=lambda x: (-x[1], x[0]))

    return tuple(x[0] for x in ranked[:n])


def build_transitions(events, eligible, config, top_n=None):
    """
    Count artist successions among the top artists.

    A succession (i, j) is counted when an eligible listener streams
    artist j directly after artist i with no more than the session gap
    between the two streams.  Self-transitions are excluded unless the
    configuration includes them.  Rows of the probability matrix with
    no successions are left as zeros and flagged.
    """

    if top_n is None:
        top_n = config.top_n_artists

    events = [x for x in events if x.listener_id in eligible]
    artists = top_artists(Counter(x.artist_id for x in events), top_n)
    artist_index = {artist: i for (i, artist) in enumerate(artists)}
    listener_index = {}

    listeners = np.array([
        listener_index.setdefault(x.listener_id, len(listener_index))
        for x in events], dtype=np.int64)
    times = np.array([
        int(x.timestamp.timestamp()) for x in events], dtype=np.int64)
    artist_numbers = np.array([
        artist_index.get(x.artist_id, -1) for x in events], dtype=np.int64)

    # Sort by listener then time, keeping file order for equal times.
    order = np.lexsort((np.arange(len(events)), times, listeners))
    listeners = listeners[order]
    times = times[order]
    artist_numbers = artist_numbers[order]

    (previous, following) = (artist_numbers[:-1], artist_numbers[1:])

    counted = (
        (listeners[1:] == listeners[:-1]) &
        (times[1:] - times[:-1] <= 60 * config.session_gap_minutes) &
        (previous >= 0) & (following >= 0))

    if not config.include_self_transitions:
        counted &= previous != following

    n = len(artists)
    counts = np.bincount(
        previous[counted] * n + following[counted],
        minlength=n * n).reshape((n, n))

    row_totals = counts.sum(axis=1)
    zero_rows = row_totals == 0
    probabilities = counts / np.where(zero_rows, 1, row_totals)[:, np.newaxis]

    if zero_rows.any():
        logger.warning(
            '%i of %i artists have no counted successions',
            int(zero_rows.sum()), n)

    return TransitionMatrix(
        artists=artists, counts=counts, probabilities=probabilities,
        zero_rows=zero_rows)


def artist_distance_matrix(transitions):
    return correlation_distance_matrix(transitions.probabilities)


def canonical_labels(labels):
    """
    Renumber cluster labels in order of first appearance.
    """

    mapping = {}
    return np.array([
        mapping.setdefault(x, len(mapping)) for x in labels], dtype=np.int64)


def _check_cluster_count(k, n):
    if not (2 <= k <= n):
        raise TasteMobilityError(
            'Cluster count {} is outside the range 2 - {}.'.format(k, n))


def _average_linkage(distances):
    return linkage(
        squareform(np.asarray(distances, dtype=float), checks=False),
        method='average')


def _cut_linkage(link, k):
    return canonical_labels(cut_tree(link, n_clusters=k).ravel())


def cluster_agglomerative(distances, k):
    """
    Partition items into k clusters by average-linkage agglomeration
    of a distance matrix.
    """

    _check_cluster_count(k, len(distances))
    return _cut_linkage(_average_linkage(distances), k)


def cluster_kmeans(rows, k, seed):
    """
    Partition rows into k clusters with Lloyd's algorithm, starting from
    k-means++ centers drawn from a substream of the seed.
    """

    rows = np.asarray(rows, dtype=float)
    _check_cluster_count(k, len(rows))

    rng = substream(seed, 'kmeans', k)
    model = KMeans(
        n_clusters=k, init='k-means++', n_init=1, max_iter=300, tol=1e-6,
        algorithm='lloyd', random_state=int(rng.integers(2 ** 31 - 1)))

    return canonical_labels(model.fit_predict(rows))


def adjusted_mutual_information(labels_a, labels_b):
    """
    Compute the adjusted mutual information of two partitions, using
    the arithmetic mean of their entropies.

    Degenerate cases, where either partition has a single cluster or
    both consist only of singletons, give 0.
    """

    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)

    if len(labels_a) != len(labels_b):
        raise TasteMobilityError(
            'Partitions have different lengths {} and {}.'.format(
                len(labels_a), len(labels_b)))

    n_a = len(np.unique(labels_a))
    n_b = len(np.unique(labels_b))

    if n_a < 2 or n_b < 2 or n_a == n_b == len(labels_a):
        return 0.0

    return float(adjusted_mutual_info_score(
        labels_a, labels_b, average_method='arithmetic'))


def completeness(classes, clusters):
    """
    Measure whether each reference class stays within one cluster.

    This is 1 - H(clusters | classes) / H(clusters), the scikit-learn
    reading, under which a single giant cluster scores 1 and so does
    every class kept whole.  The formula 1 - H(classes | clusters) /
    H(classes) would score 1 for all-singleton clusters instead.
    Items whose class is None are ignored.  The measure is 1 when the
    clusters carry no entropy.
    """

    classes = np.asarray(classes, dtype=object)
    clusters = np.asarray(clusters)
    labeled = np.array([x is not None for x in classes], dtype=bool)

    if not labeled.any():
        return 1.0

    return float(completeness_score(
        classes[labeled].astype(str), clusters[labeled]))


def sweep_cluster_counts(
        distances, reference_labels, k_values, seed,
        methods=CLUSTER_METHODS):
    """
    Compare clusterings at several cluster counts with reference labels.

    Partitions are computed over all items and scored on the labeled
    items only.  Returns a table with columns k, method, ami and
    completeness.
    """

    reference_labels = np.asarray(reference_labels, dtype=object)
    labeled = np.array([x is not None for x in reference_labels], dtype=bool)

    if labeled.sum() < 2:
        raise TasteMobilityError(
            'At least 2 labeled artists are needed to score clusterings.')

    reference = reference_labels[labeled].astype(str)
    n = len(reference_labels)
    link = None
    rows = []

    for k in k_values:
        _check_cluster_count(k, n)

        for method in methods:
            if method == 'agglomerative':
                if link is None:
                    link = _average_linkage(distances)
                partition = _cut_linkage(link, k)

            elif method == 'kmeans':
                partition = cluster_kmeans(distances, k, seed)

            else:
                raise TasteMobilityError(
                    'Clustering method "{}" not recognized.'.format(method))

            rows.append((
                k, method,
                adjusted_mutual_information(reference, partition[labeled]),
                completeness(reference, partition[labeled])))

            logger.debug('Sweep k=%i %s: AMI %f', k, method, rows[-1][2])

    return pd.DataFrame(rows, columns=['k', 'method', 'ami', 'completeness'])


def label_genres(partition, artists, tags):
    """
    Name each cluster after the most common tag among its artists.

    Ties go to the alphabetically first tag, clusters without tagged
    artists are named "UNKNOWN", and repeated names are numbered
    ("rock", "rock 2").
    """

    n_clusters = int(np.max(partition)) + 1 if len(partition) else 0
    tag_counts = [Counter() for i in range(n_clusters)]

    for (cluster, artist) in zip(partition, artists):
        tag = tags.get(artist)
        if tag:
            tag_counts[cluster][tag] += 1

    labels = []
    seen = Counter()

    for counter in tag_counts:
        if counter:
            label = min(counter.items(), key=lambda x: (-x[1], x[0]))[0]
        else:
            label = UNKNOWN_GENRE

        seen[label] += 1
        if seen[label] > 1:
            label = '{} {}'.format(label, seen[label])

        labels.append(label)

    return tuple(labels)


def build_taxonomy(events, eligible, first_period, tags, config):
    """
    Derive the genre taxonomy.

    Artists are clustered by the correlation distance between their
    transition rows into K genres.  Genre distances come from the
    co-consumption of genres by eligible listeners in the first period
    ("first_period" maps listener identifiers to aggregates), and the
    genre tree is built from those distances.
    """

    transitions = build_transitions(events, eligible, config)
    n_artists = len(transitions.artists)

    if config.n_genres > n_artists:
        raise TasteMobilityError(
            'Cannot form {} genres from {} artists.'.format(
                config.n_genres, n_artists))

    artist_distance = artist_distance_matrix(transitions)
    partition = cluster_agglomerative(artist_distance, config.n_genres)
    artist_to_genre = OrderedDict(sorted(
        (artist, int(genre))
        for (artist, genre) in zip(transitions.artists, partition)))

    labels = label_genres(partition, transitions.artists, tags)

    profiles = [
        profile_from_artist_counts(
            listener_id, aggregate.period, aggregate.artist_counts,
            artist_to_genre, config.n_genres)
        for (listener_id, aggregate) in first_period.items()
        if listener_id in eligible]

    genre_distance = genre_distances(
        co_consumption(profiles, config.n_genres))

    tree = upgma(genre_distance)

    logger.info(
        'Derived %i genres from %i artists and %i listener profiles',
        config.n_genres, n_artists, len(profiles))

    return TaxonomyBuild(
        taxonomy=GenreTaxonomy(
            artist_to_genre=artist_to_genre, genre_labels=labels,
            genre_distance=genre_distance, tree=tree),
        transitions=transitions,
        artist_distance=artist_distance,
        partition=partition)
