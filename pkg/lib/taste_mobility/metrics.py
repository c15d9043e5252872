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

import logging

import numpy as np
import pandas as pd

from .error import DegenerateStatisticError, TasteMobilityError
from .model import GenreTree, TasteProfile, substream

logger = logging.getLogger(__name__)

# Tolerance on the sum of a probability vector.
DISTRIBUTION_TOLERANCE = 1e-9


class UndefinedCorrelationError(DegenerateStatisticError):
    pass


class InfiniteDivergenceError(TasteMobilityError):
    pass


def _distribution(value):
    """
    Get a probability vector from a `TasteProfile` or a sequence.
    """

    if isinstance(value, TasteProfile):
        return value.normalized()

    value = np.asarray(value, dtype=float)

    if value.ndim != 1:
        raise TasteMobilityError('A distribution must be one-dimensional.')

    if np.any(value < 0) or \
            abs(value.sum() - 1.0) > DISTRIBUTION_TOLERANCE:
        raise TasteMobilityError(
            'Values must be non-negative and sum to 1 (sum {}).'.format(
                value.sum()))

    return value


def correlation_distance(u, v):
    """
    Compute the correlation distance, one minus the Pearson correlation,
    between two vectors.

    The result lies in the range 0 - 2.  A constant vector has no
    defined correlation and raises `UndefinedCorrelationError`.
    """

    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)

    if u.ndim != 1 or u.shape != v.shape or len(u) < 2:
        raise TasteMobilityError(
            'Correlation distance requires two vectors of equal length '
            'of at least 2.')

    if np.ptp(u) == 0 or np.ptp(v) == 0:
        raise UndefinedCorrelationError(
            'Correlation is undefined for a constant vector.')

    u_centered = u - u.mean()
    v_centered = v - v.mean()

    correlation = np.dot(u_centered, v_centered) / (
        np.linalg.norm(u_centered) * np.linalg.norm(v_centered))

    return float(min(2.0, max(0.0, 1.0 - correlation)))


def correlation_distance_matrix(rows):
    """
    Compute the correlation distance between every pair of rows.

    Rows which are constant (including all-zero rows) are given a
    distance of 1.0 to every other row, and this is logged.  The result
    is symmetric with a zero diagonal.
    """

    rows = np.asarray(rows, dtype=float)

    if rows.ndim != 2:
        raise TasteMobilityError(
            'Correlation distances require a two-dimensional array.')

    n = rows.shape[0]

    if rows.shape[1] < 2:
        constant = np.ones(n, dtype=bool)
    else:
        constant = np.ptp(rows, axis=1) == 0

    centered = rows - rows.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    norms[constant] = 1.0
    unit = centered / norms[:, np.newaxis]
    unit[constant] = 0.0

    distances = 1.0 - np.dot(unit, unit.T)
    distances[constant, :] = 1.0
    distances[:, constant] = 1.0
    distances = 0.5 * (distances + distances.T)
    np.clip(distances, 0.0, 2.0, out=distances)
    np.fill_diagonal(distances, 0.0)

    n_constant = int(constant.sum())
    if n_constant and n > 1:
        logger.warning(
            '%i of %i rows are constant: assigned correlation distance 1.0',
            n_constant, n)

    return distances


def co_consumption(profiles, n_genres):
    """
    Count, for each pair of genres, the listeners who streamed both.

    The diagonal counts the listeners who streamed each genre.
    """

    profiles = list(profiles)

    if not profiles:
        return np.zeros((n_genres, n_genres), dtype=np.int64)

    presence = np.array(
        [x.counts > 0 for x in profiles], dtype=np.int64)

    if presence.shape[1] != n_genres:
        raise TasteMobilityError(
            'Profiles have {} genres, expected {}.'.format(
                presence.shape[1], n_genres))

    return np.dot(presence.T, presence)


def genre_distances(co_consumption_matrix):
    """
    Compute the correlation distance between the rows of a genre
    co-consumption matrix.
    """

    matrix = np.asarray(co_consumption_matrix, dtype=float)

    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise TasteMobilityError('Co-consumption matrix must be square.')

    if not np.array_equal(matrix, matrix.T):
        raise TasteMobilityError('Co-consumption matrix must be symmetric.')

    if matrix.shape[0] == 1:
        return np.zeros((1, 1))

    return correlation_distance_matrix(matrix)


def upgma(distances):
    """
    Build a genre tree by average-linkage agglomeration.

    At each step the closest pair of clusters is merged, ties going to
    the smallest pair of node indices.  The new node sits at half the
    merge distance, and its distance to each other cluster is the
    size-weighted mean of its children's distances.
    """

    work = np.array(distances, dtype=float)

    if work.ndim != 2 or work.shape[0] != work.shape[1] or \
            work.shape[0] == 0:
        raise TasteMobilityError(
            'Tree building requires a non-empty square distance matrix.')

    if not np.all(np.isfinite(work)) or np.any(work < 0):
        raise TasteMobilityError(
            'Distances must be finite and non-negative.')

    if not np.allclose(work, work.T, rtol=0.0, atol=1e-12):
        raise TasteMobilityError('Distance matrix must be symmetric.')

    n = work.shape[0]
    children = [None] * n
    heights = [0.0] * n
    sizes = [1] * n

    # Node identifiers of the active clusters, always in ascending order
    # so that the first minimum in row-major order is the smallest pair.
    active = list(range(n))
    np.fill_diagonal(work, np.inf)

    while len(active) > 1:
        m = len(active)
        (i, j) = divmod(int(np.argmin(work)), m)

        (a, b) = (active[i], active[j])
        node = len(children)
        children.append((a, b))
        heights.append(work[i, j] / 2.0)
        sizes.append(sizes[a] + sizes[b])

        merged = (sizes[a] * work[i] + sizes[b] * work[j]) / sizes[node]

        keep = [x for x in range(m) if x != i and x != j]
        grown = np.full((m - 1, m - 1), np.inf)
        grown[:-1, :-1] = work[np.ix_(keep, keep)]
        grown[-1, :-1] = merged[keep]
        grown[:-1, -1] = merged[keep]
        work = grown

        active = [active[x] for x in keep] + [node]

    branch_lengths = [0.0] * len(children)
    for (node, pair) in enumerate(children):
        if pair is None:
            continue
        for child in pair:
            branch_lengths[child] = max(0.0, heights[node] - heights[child])

    return GenreTree(children, branch_lengths, heights)


def rao_stirling(p, distances):
    """
    Compute the Rao-Stirling diversity: the expected distance between
    two genres drawn independently from a profile.
    """

    p = _distribution(p)
    distances = np.asarray(distances, dtype=float)

    if distances.shape != (len(p), len(p)):
        raise TasteMobilityError(
            'Distance matrix shape {} does not match {} genres.'.format(
                distances.shape, len(p)))

    return float(np.dot(p, np.dot(distances, p)))


def weighted_unifrac(p, q, tree, normalized=False):
    """
    Compute the weighted UniFrac distance between two profiles on a
    genre tree: the sum over edges of branch length times the
    difference in probability mass below the edge.

    If "normalized" is set, the result is divided by the mean
    root-to-leaf distance weighted by p + q.
    """

    p = _distribution(p)
    q = _distribution(q)

    if not (len(p) == len(q) == tree.n_leaves):
        raise TasteMobilityError(
            'Profiles with {} and {} genres do not match a tree '
            'with {} leaves.'.format(len(p), len(q), tree.n_leaves))

    mass = np.abs(np.dot(tree.leaf_matrix, p - q))
    value = float(np.dot(tree.branch_lengths, mass))

    if normalized:
        scale = float(np.dot(tree.leaf_depths, p + q))
        value = value / scale if scale > 0 else 0.0

    return value


def kl_divergence(a, b):
    """
    Compute the Kullback-Leibler divergence of b from a in bits.

    Raises `InfiniteDivergenceError` if a has mass where b has none.
    """

    a = _distribution(a)
    b = _distribution(b)

    if len(a) != len(b):
        raise TasteMobilityError(
            'Distributions have different lengths {} and {}.'.format(
                len(a), len(b)))

    support = a > 0

    if np.any(b[support] <= 0):
        raise InfiniteDivergenceError(
            'Divergence is infinite: the second distribution lacks '
            'support where the first has mass.')

    return max(0.0, float(np.sum(
        a[support] * np.log2(a[support] / b[support]))))


def jensen_shannon(a, b):
    """
    Compute the Jensen-Shannon divergence in bits, which is bounded
    by 0 and 1.
    """

    a = _distribution(a)
    b = _distribution(b)
    mixture = 0.5 * (a + b)

    return min(1.0, max(0.0, 0.5 * kl_divergence(a, mixture) +
                        0.5 * kl_divergence(b, mixture)))


def taste_distance(p, q, tree=None, method='unifrac', normalized=False):
    if method == 'unifrac':
        if tree is None:
            raise TasteMobilityError('UniFrac distance requires a tree.')
        return weighted_unifrac(p, q, tree, normalized=normalized)

    elif method == 'jsd':
        return jensen_shannon(p, q)

    raise TasteMobilityError(
        'Taste distance method "{}" not recognized.'.format(method))


def expand_counts(counts):
    """
    Convert genre counts to a sequence of genre indices.
    """

    if isinstance(counts, TasteProfile):
        counts = counts.counts

    counts = np.asarray(counts, dtype=np.int64)

    return np.repeat(np.arange(len(counts)), counts)


def rarefaction_curve(
        streams, depths, repetitions, seed, key='', distances=None):
    """
    Estimate diversity as a function of the number of streams.

    At each depth, "repetitions" subsamples are drawn without
    replacement from the sequence of genre indices "streams".  The
    number of distinct genres is measured, or the Rao-Stirling diversity
    if a genre distance matrix is given.  Each depth uses a separate
    substream of the seed, named by "key" and the depth.  Depths larger
    than the number of streams are skipped.

    Returns a table with columns depth, mean and std.
    """

    streams = np.asarray(streams, dtype=np.int64)
    n_streams = len(streams)

    if repetitions < 1:
        raise TasteMobilityError('Rarefaction needs at least 1 repetition.')

    if distances is not None:
        distances = np.asarray(distances, dtype=float)

    rows = []

    for depth in depths:
        if depth > n_streams:
            logger.warning(
                'Rarefaction depth %i exceeds %i streams for %s: skipped',
                depth, n_streams, key)
            continue

        rng = substream(seed, 'rarefaction', key, depth)
        values = []

        for repetition in range(repetitions):
            sample = rng.choice(streams, size=depth, replace=False)

            if distances is None:
                values.append(len(np.unique(sample)))
            else:
                counts = np.bincount(sample, minlength=len(distances))
                values.append(rao_stirling(counts / depth, distances))

        rows.append((depth, float(np.mean(values)), float(np.std(values))))

    return pd.DataFrame(rows, columns=['depth', 'mean', 'std'])
