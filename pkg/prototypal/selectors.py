################################################################################
# Module: selectors.py
# Description: Greedy and heuristic prototype selection over the sparse
#              transport objective, an exhaustive oracle and the k-medoids
#              special case
# License: MIT, see full license in LICENSE.md
# Web: https://github.com/prototypal/prototypal
################################################################################

import itertools
import logging as lg
import time
from math import comb

import numpy as np

from prototypal import settings
from prototypal.core import empty_cache, extend_cache, incremental_gains, \
    prototypes_from_indices, _check_q
from prototypal.data import uniform_weights
from prototypal.utils import log, SelectionError

stop_rules = ('cardinality', 'epsilon', 'whichever_first')


class SelectionConfig(object):
    """Stopping parameters of :func:`spot_greedy`.

    Under 'cardinality' the selection grows to exactly k. Under 'epsilon' it
    stops at the first iteration whose objective increment falls below
    epsilon (or when every source point is selected); k then only bounds s.
    'whichever_first' applies both.
    """

    def __init__(self, k, s=1, epsilon=None, stop_rule='cardinality'):
        if stop_rule not in stop_rules:
            raise SelectionError('Unknown stop rule "{}"; expected one of '
                                 '{}'.format(stop_rule, ', '.join(stop_rules)))
        if int(k) != k or k < 1:
            raise SelectionError('k must be a positive integer, got '
                                 '{!r}'.format(k))
        if int(s) != s or s < 1:
            raise SelectionError('s must be a positive integer, got '
                                 '{!r}'.format(s))
        if s > k:
            raise SelectionError('s={} cannot exceed k={}'.format(s, k))
        if stop_rule != 'cardinality':
            if epsilon is None:
                raise SelectionError('Stop rule "{}" needs epsilon'.format(
                    stop_rule))
            if not epsilon >= 0:
                raise SelectionError('epsilon must be non-negative')
        self.k = int(k)
        self.s = int(s)
        self.epsilon = None if epsilon is None else float(epsilon)
        self.stop_rule = stop_rule

    def __repr__(self):
        return 'SelectionConfig(k={}, s={}, epsilon={!r}, stop_rule={!r})' \
            .format(self.k, self.s, self.epsilon, self.stop_rule)

    def validate(self, m):
        if self.k > m:
            raise SelectionError('k={} exceeds the {} source points'.format(
                self.k, m))
        return self


class SelectionTrace(object):
    """Per-iteration record of a greedy selection"""

    def __init__(self, per_iteration=None):
        self.per_iteration = list(per_iteration or [])

    def __len__(self):
        return len(self.per_iteration)

    @property
    def total(self):
        """Final objective (0 for an empty trace)"""
        if not self.per_iteration:
            return 0.0
        return self.per_iteration[-1]['objective']

    @property
    def objectives(self):
        return [it['objective'] for it in self.per_iteration]

    def append(self, added_indices, objective, gain):
        self.per_iteration.append({'iteration': len(self.per_iteration) + 1,
                                   'added_indices': [int(i) for i in
                                                     added_indices],
                                   'objective': float(objective),
                                   'gain': float(gain)})

    def to_list(self):
        return [dict(it) for it in self.per_iteration]

    @classmethod
    def from_list(cls, data):
        return cls([dict(it) for it in data])


def _top(scores, candidates, count):
    """`count` candidates by (score descending, index ascending)"""
    order = np.lexsort((candidates, -scores))
    return [int(candidates[i]) for i in order[:count]]


def spot_greedy(similarity, q, config):
    """Greedy incremental prototype selection.

    Every iteration computes the marginal gain of each unselected source point
    and adds the s largest (ties to the lowest index). The last iteration only
    adds k mod s points when s does not divide k. On return the plan and the
    weights are recovered over the selected set.

    Args:
        similarity (SimilarityMatrix): m x n similarities
        q (SimplexWeights): target weights
        config (SelectionConfig): k, s and stopping rule

    Returns:
        (PrototypeSet, SelectionTrace): the prototypes in selection order and
        the objective after every iteration
    """
    q = _check_q(similarity, q)
    config.validate(similarity.m)
    start_time = time.time()
    m = similarity.m
    by_cardinality = config.stop_rule in ('cardinality', 'whichever_first')
    by_epsilon = config.stop_rule in ('epsilon', 'whichever_first')
    limit = config.k if by_cardinality else m

    cache = empty_cache(similarity, q)
    trace = SelectionTrace()
    selected = np.zeros(m, dtype=bool)
    while len(cache) < limit:
        candidates = np.flatnonzero(~selected)
        gains = incremental_gains(cache, candidates)
        batch = _top(gains, candidates, min(config.s, limit - len(cache)))
        extended = extend_cache(cache, batch)
        increment = extended.objective - cache.objective
        if by_epsilon and (increment < config.epsilon or increment <= 0):
            log('Stopping: increment {:.3g} below epsilon {:.3g}'.format(
                increment, config.epsilon), lg.DEBUG)
            break
        cache = extended
        selected[batch] = True
        trace.append(batch, cache.objective, increment)
        log('spot_greedy iteration {}: added {}, objective {:.6g}'.format(
            len(trace), batch, cache.objective), lg.DEBUG)

    if not cache.current_set:
        raise SelectionError('No prototype improves the objective by '
                             'epsilon={}'.format(config.epsilon))
    prototypes = prototypes_from_indices(similarity, q, cache.current_set)
    log('Selected {} prototypes with spot_greedy in {:,.2f} seconds'.format(
        len(prototypes), time.time() - start_time))
    return prototypes, trace


def spot_simple(similarity, q, k):
    """Fast heuristic: top-k source points by unconstrained plan weight.

    Every target column sends its mass to its most similar source point over
    all m rows; the k rows receiving the most mass (ties to the lowest index)
    form P, and the plan is then recomputed over P.

    Args:
        similarity (SimilarityMatrix): m x n similarities
        q (SimplexWeights): target weights
        k (int): number of prototypes

    Returns:
        PrototypeSet: prototypes by decreasing unconstrained weight, with the
        objective restricted to P
    """
    q = _check_q(similarity, q)
    _check_k(k, similarity.m)
    winners = similarity.entries.argmax(axis=0)
    w = np.bincount(winners, weights=q.values, minlength=similarity.m)
    chosen = _top(w, np.arange(similarity.m), k)
    return prototypes_from_indices(similarity, q, chosen)


def brute_force_optimum(similarity, q, k, limit=None):
    """Exact maximizer of f over all subsets of size at most k.

    Ties go to the lexicographically smallest index tuple.

    Args:
        similarity (SimilarityMatrix): m x n similarities
        q (SimplexWeights): target weights
        k (int): cardinality bound
        limit (int, optional): largest number of subsets to enumerate.
            Defaults to settings.brute_force_limit.

    Returns:
        PrototypeSet: indices in increasing order
    """
    q = _check_q(similarity, q)
    m = similarity.m
    _check_k(k, m)
    if limit is None:
        limit = settings.brute_force_limit
    count = sum(comb(m, size) for size in range(1, k + 1))
    if count > limit:
        raise SelectionError('Enumerating {:,} subsets exceeds the limit of '
                             '{:,}'.format(count, limit))

    entries = similarity.entries
    best, best_value = None, -np.inf
    for size in range(1, k + 1):
        for subset in itertools.combinations(range(m), size):
            value = float(q.values @ entries[list(subset)].max(axis=0))
            if value > best_value or (value == best_value and subset < best):
                best, best_value = subset, value
    return prototypes_from_indices(similarity, q, best)


def k_medoids(dataset, similarity_self, k, s=1):
    """k-medoids as the sparse transport objective with source = target.

    Args:
        dataset (Dataset): the points being summarized
        similarity_self (SimilarityMatrix): n x n similarities of the dataset
            with itself
        k (int): number of medoids
        s (int): batch size of the greedy selection

    Returns:
        PrototypeSet: the medoids; objective is (1/n) sum_j max_{i in P} S_ij
    """
    if not similarity_self.is_square:
        raise SelectionError('k-medoids needs a square self-similarity, got '
                             'shape {}'.format(similarity_self.shape))
    if similarity_self.m != dataset.m:
        raise SelectionError('Similarity has {} rows but the dataset has {} '
                             'points'.format(similarity_self.m, dataset.m))
    q = uniform_weights(dataset.m)
    prototypes, _ = spot_greedy(similarity_self, q, SelectionConfig(k, s))
    return prototypes


def random_select(similarity, q, k, seed=None):
    """k distinct source points drawn uniformly at random (control baseline).

    Args:
        similarity (SimilarityMatrix): m x n similarities
        q (SimplexWeights): target weights
        k (int): number of prototypes
        seed (int or numpy.random.SeedSequence, optional): random seed

    Returns:
        PrototypeSet: with the sparse-support plan over the drawn points
    """
    q = _check_q(similarity, q)
    _check_k(k, similarity.m)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(similarity.m, size=k, replace=False)
    return prototypes_from_indices(similarity, q, chosen.tolist())


def _check_k(k, m):
    if int(k) != k or k < 1:
        raise SelectionError('k must be a positive integer, got {!r}'.format(k))
    if k > m:
        raise SelectionError('k={} exceeds the {} source points'.format(k, m))
