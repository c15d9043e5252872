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

from collections import namedtuple
import logging

import numpy as np
from scipy.special import betainc, ndtr
from scipy.stats import rankdata

from .error import DegenerateStatisticError, TasteMobilityError

logger = logging.getLogger(__name__)

TestResult = namedtuple(
    'TestResult',
    ('test', 'statistic', 'p_value', 'n', 'n2', 'df', 'direction',
     'effect_size', 'notes'))

# The exact Mann-Whitney distribution is used when the product of the
# sample sizes is at most this.
EXACT_MAX_PRODUCT = 400

# Largest counting table (cells) an explicit exact request may build.
EXACT_MAX_CELLS = 50000000

MANN_WHITNEY_METHODS = ('auto', 'exact', 'asymptotic')


def result_to_doc(result):
    doc = result._asdict()
    for name in ('statistic', 'p_value', 'effect_size'):
        if doc[name] is not None:
            doc[name] = float(doc[name])
    return doc


def student_t_two_sided(t, df):
    """
    Two-sided p-value of Student's t distribution, via the regularized
    incomplete beta function.
    """

    return float(min(1.0, max(0.0, betainc(0.5 * df, 0.5, df / (df + t * t)))))


def _sign(value):
    return int(np.sign(value))


def paired_t_test(differences, test='paired t'):
    """
    Test whether the mean of paired differences is zero.

    Needs at least two differences which are not all equal.
    """

    differences = np.asarray(differences, dtype=float)
    n = len(differences)

    if n < 2:
        raise DegenerateStatisticError(
            'The {} test needs at least 2 values, got {}.'.format(test, n))

    mean = float(np.mean(differences))

    if np.ptp(differences) == 0:
        raise DegenerateStatisticError(
            'The {} test sample has zero variance.'.format(test))

    sd = float(np.std(differences, ddof=1))
    t = mean / (sd / np.sqrt(n))
    df = n - 1

    return TestResult(
        test=test, statistic=float(t), p_value=student_t_two_sided(t, df),
        n=n, n2=None, df=df, direction=_sign(mean), effect_size=mean,
        notes=None)


def one_sample_t_test(values, mu0=0.0):
    values = np.asarray(values, dtype=float)
    return paired_t_test(values - mu0, test='one-sample t')


def _exact_rank_sum_distribution(doubled_ranks, size):
    """
    Count the subsets of the given size with each possible sum of the
    (doubled, hence integer) ranks.
    """

    total = int(sum(doubled_ranks))
    counts = np.zeros((size + 1, total + 1))
    counts[0, 0] = 1.0

    for rank in doubled_ranks:
        rank = int(rank)
        counts[1:, rank:] += counts[:-1, :total + 1 - rank].copy()

    return counts[size]


def mann_whitney_u(x, y, method='auto'):
    """
    Two-sided Mann-Whitney U test of samples x and y.

    Ties receive mid-ranks.  The exact distribution of the rank sum is
    used when the product of the sample sizes is at most 400 ("auto"),
    otherwise the normal approximation with tie and continuity
    corrections.  The statistic is U for x.
    """

    if method not in MANN_WHITNEY_METHODS:
        raise TasteMobilityError(
            'Mann-Whitney method "{}" not recognized.'.format(method))

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n1 = len(x)
    n2 = len(y)

    if n1 == 0 or n2 == 0:
        raise TasteMobilityError(
            'The Mann-Whitney test needs two non-empty samples.')

    ranks = rankdata(np.concatenate((x, y)))
    u1 = float(np.sum(ranks[:n1]) - n1 * (n1 + 1) / 2.0)
    mean_u = n1 * n2 / 2.0

    if method == 'auto':
        method = ('exact' if n1 * n2 <= EXACT_MAX_PRODUCT
                  else 'asymptotic')

    if method == 'exact':
        # Work with the smaller sample's rank sum.
        (small, n_small) = ((ranks[:n1], n1) if n1 <= n2
                            else (ranks[n1:], n2))
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        cells = (n_small + 1) * (int(doubled.sum()) + 1)
        if cells > EXACT_MAX_CELLS:
            raise TasteMobilityError(
                'Exact Mann-Whitney distribution for samples of {} and {} '
                'would need {} cells; use the asymptotic method.'.format(
                    n1, n2, cells))
        observed = int(np.rint(2.0 * np.sum(small)))
        distribution = _exact_rank_sum_distribution(doubled, n_small)
        n_subsets = distribution.sum()
        lower = distribution[:observed + 1].sum() / n_subsets
        upper = distribution[observed:].sum() / n_subsets
        p_value = min(1.0, 2.0 * min(lower, upper))

    else:
        n = n1 + n2
        (values, tie_counts) = np.unique(ranks, return_counts=True)
        tie_term = np.sum(tie_counts ** 3 - tie_counts) / (n * (n - 1))
        variance = n1 * n2 / 12.0 * ((n + 1) - tie_term)

        if variance <= 0:
            p_value = 1.0
        else:
            z = max(0.0, abs(u1 - mean_u) - 0.5) / np.sqrt(variance)
            p_value = float(min(1.0, 2.0 * ndtr(-z)))

    return TestResult(
        test='Mann-Whitney U ({})'.format(method), statistic=u1,
        p_value=float(p_value), n=n1, n2=n2, df=None,
        direction=_sign(np.median(x) - np.median(y)),
        effect_size=u1 / (n1 * n2), notes=None)


def pearson(x, y):
    """
    Compute Pearson's correlation coefficient and its two-sided p-value.
    """

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)

    if n != len(y):
        raise TasteMobilityError(
            'Correlation requires samples of equal length.')

    if n < 3:
        raise DegenerateStatisticError(
            'Correlation needs at least 3 pairs, got {}.'.format(n))

    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateStatisticError(
            'Correlation is undefined for a constant sample.')

    x_centered = x - x.mean()
    y_centered = y - y.mean()
    rho = float(np.dot(x_centered, y_centered) / (
        np.linalg.norm(x_centered) * np.linalg.norm(y_centered)))
    rho = min(1.0, max(-1.0, rho))

    if abs(rho) == 1.0:
        return (rho, 0.0)

    df = n - 2
    t = rho * np.sqrt(df / (1.0 - rho * rho))

    return (rho, student_t_two_sided(t, df))


def zscores(values):
    """
    Standardize values using the sample standard deviation.

    A constant sample gives zeros, with a warning.
    """

    values = np.asarray(values, dtype=float)

    if len(values) < 2:
        raise TasteMobilityError(
            'Z-scores need at least 2 values, got {}.'.format(len(values)))

    if np.ptp(values) == 0:
        logger.warning('Z-scores of a constant sample set to zero')
        return np.zeros(len(values))

    return (values - values.mean()) / np.std(values, ddof=1)
