################################################################################
# Module: core.py
# Description: The sparse-support transport objective f(P), its incremental
#              column-maxima cache, and recovery of transport plans and
#              prototype weights
# License: MIT, see full license in LICENSE.md
# Web: https://github.com/prototypal/prototypal
################################################################################

import json
import math
import os

import numpy as np

from prototypal import settings
from prototypal.data import SimilarityMatrix, SimplexWeights, as_weights
from prototypal.utils import SelectionError, SimilarityError, SimplexError, \
    TransportError


def _check_q(similarity, q):
    q = as_weights(q)
    if len(q) != similarity.n:
        raise SimilarityError('q has length {} but the similarity matrix has '
                              '{} target columns'.format(len(q), similarity.n))
    return q


def _check_indices(indices, m, allow_empty=False):
    """Validates a list of distinct source indices in [0, m)"""
    indices = [int(i) for i in indices]
    if not indices and not allow_empty:
        raise SelectionError('The prototype set is empty')
    if len(set(indices)) != len(indices):
        raise SelectionError('Duplicate indices in {}'.format(indices))
    for i in indices:
        if not 0 <= i < m:
            raise SelectionError('Index {} out of range [0, {})'.format(i, m))
    return indices


class TransportPlan(object):
    """A k x n non-negative transport plan.

    Row r carries the mass sent from source point `row_index_map[r]`.
    `metadata` holds solver facts (objective, marginal_violation, solver, reg,
    converged, iterations).
    """

    def __init__(self, entries, row_index_map=None, **metadata):
        entries = np.array(entries, dtype=float)
        if entries.ndim != 2:
            raise TransportError('A transport plan must be a 2-D matrix')
        if not np.isfinite(entries).all() or (entries < 0).any():
            raise TransportError('A transport plan must be finite and '
                                 'non-negative')
        entries.setflags(write=False)
        self.entries = entries
        if row_index_map is None:
            row_index_map = range(entries.shape[0])
        self.row_index_map = tuple(int(i) for i in row_index_map)
        if len(self.row_index_map) != entries.shape[0]:
            raise TransportError('row_index_map has {} entries for {} '
                                 'rows'.format(len(self.row_index_map),
                                               entries.shape[0]))
        self.metadata = metadata

    def __repr__(self):
        return 'TransportPlan(shape={}, nnz={}, solver={!r})'.format(
            self.shape, self.nnz, self.metadata.get('solver'))

    @property
    def shape(self):
        return self.entries.shape

    @property
    def nnz(self):
        return int(np.count_nonzero(self.entries))

    @property
    def row_sums(self):
        return self.entries.sum(axis=1)

    @property
    def column_sums(self):
        return self.entries.sum(axis=0)

    def cost(self, matrix):
        """<matrix, plan>, e.g. the transport cost or the similarity score"""
        return float(np.sum(np.asarray(matrix) * self.entries))

    def to_dict(self):
        """Coordinate form: row, col and value arrays plus metadata"""
        rows, cols = np.nonzero(self.entries)
        return {'shape': list(self.shape),
                'row_index_map': list(self.row_index_map),
                'row': rows.tolist(),
                'col': cols.tolist(),
                'value': self.entries[rows, cols].tolist(),
                'metadata': {key: value for key, value in
                             self.metadata.items()}}

    @classmethod
    def from_dict(cls, data):
        entries = np.zeros(data['shape'])
        entries[data['row'], data['col']] = data['value']
        return cls(entries, data.get('row_index_map'),
                   **data.get('metadata', {}))


class PrototypeSet(object):
    """Selected source indices P with their weights w on the simplex.

    When a plan is attached, weights are its row sums (w = plan 1).
    """

    def __init__(self, indices, weights, plan=None, objective=None, m=None):
        """

        Args:
            indices (list of int): distinct source indices, in selection order
            weights (array-like or SimplexWeights): one weight per index
            plan (TransportPlan, optional): rows aligned with `indices`
            objective (float, optional): f(P)
            m (int, optional): number of source points, to range-check indices
        """
        self.indices = tuple(_check_indices(indices, m if m is not None
                                            else np.inf))
        self.weights = as_weights(weights)
        if len(self.weights) != len(self.indices):
            raise SelectionError('{} weights for {} prototypes'.format(
                len(self.weights), len(self.indices)))
        if plan is not None:
            if plan.row_index_map != self.indices:
                raise TransportError('Plan rows do not match the prototype '
                                     'indices')
            if np.abs(plan.row_sums - self.weights.values).max() > \
                    settings.simplex_tol:
                raise TransportError('Prototype weights are not the plan row '
                                     'sums')
        self.plan = plan
        self.objective = None if objective is None else float(objective)

    def __len__(self):
        return len(self.indices)

    def __repr__(self):
        return 'PrototypeSet(k={}, objective={!r})'.format(len(self),
                                                           self.objective)

    def to_dict(self, include_plan=True):
        data = {'indices': list(self.indices),
                'weights': self.weights.values.tolist(),
                'objective': self.objective}
        if include_plan and self.plan is not None:
            data['plan'] = self.plan.to_dict()
        return data

    @classmethod
    def from_dict(cls, data):
        plan = data.get('plan')
        if plan is not None:
            plan = TransportPlan.from_dict(plan)
        objective = data.get('objective', data.get('score'))
        return cls(data['indices'], data['weights'], plan=plan,
                   objective=objective)


def write_prototypes(prototypes, path, include_plan=True, **extra):
    """Writes a PrototypeSet (plus any `extra` keys) as JSON"""
    data = prototypes.to_dict(include_plan=include_plan)
    data.update(extra)
    folder = os.path.dirname(path)
    if folder and not os.path.isdir(folder):
        os.makedirs(folder)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2)


def read_prototypes(path):
    """Reads a PrototypeSet written by :func:`write_prototypes`. Extra keys
    (trace, metadata) are ignored."""
    with open(path, encoding='utf-8') as f:
        return PrototypeSet.from_dict(json.load(f))


class ScoreCache(object):
    """Running per-column maxima of S over the selected set P.

    column_max[j] is max over i in P of S[i, j] and column_argmax[j] the
    lowest source index attaining it. While P is empty they are 0, a lower
    bound of every similarity, and -1. The objective of the empty set is 0.
    """

    def __init__(self, similarity, q, column_max, column_argmax, current_set):
        self.similarity = similarity
        self.q = q
        self.column_max = column_max
        self.column_argmax = column_argmax
        self.current_set = tuple(current_set)
        if self.current_set:
            self.objective = float(q.values @ column_max)
        else:
            self.objective = 0.0

    def __len__(self):
        return len(self.current_set)

    def __repr__(self):
        return 'ScoreCache(|P|={}, objective={!r})'.format(len(self),
                                                           self.objective)


def empty_cache(similarity, q):
    """The cache of the empty prototype set, f(empty) = 0.

    Args:
        similarity (SimilarityMatrix): m x n similarities
        q (SimplexWeights): target weights, length n

    Returns:
        ScoreCache
    """
    q = _check_q(similarity, q)
    column_max = np.zeros(similarity.n)
    column_argmax = np.full(similarity.n, -1, dtype=int)
    return ScoreCache(similarity, q, column_max, column_argmax, ())


def objective_of(similarity, q, indices):
    """f(P) = sum_j q_j max_{i in P} S_ij.

    Args:
        similarity (SimilarityMatrix): m x n similarities
        q (SimplexWeights): target weights
        indices (iterable of int): the non-empty set P, in any order

    Returns:
        float: f(P)
    """
    q = _check_q(similarity, q)
    indices = _check_indices(indices, similarity.m)
    return float(q.values @ similarity.entries[sorted(indices)].max(axis=0))


def _row_gains(entries, q, column_max):
    return np.maximum(entries - column_max, 0.0) @ q


def incremental_gains(cache, candidates):
    """Marginal gains f(P + {i}) - f(P) of every candidate i.

    Args:
        cache (ScoreCache): the cache of P (left unmodified)
        candidates (iterable of int): indices outside P

    Returns:
        numpy.ndarray: gains aligned with `candidates`
    """
    similarity = cache.similarity
    candidates = _check_indices(candidates, similarity.m, allow_empty=True)
    overlap = set(candidates).intersection(cache.current_set)
    if overlap:
        raise SelectionError('Candidates {} are already selected'.format(
            sorted(overlap)))
    if not candidates:
        return np.zeros(0)
    if 2 * len(candidates) < similarity.m:
        rows = similarity.entries[candidates]
        return _row_gains(rows, cache.q.values, cache.column_max)
    gains = _row_gains(similarity.entries, cache.q.values, cache.column_max)
    return gains[candidates]


def extend_cache(cache, new_indices):
    """Adds `new_indices` to P in O(sn), s = len(new_indices).

    Uses max(kappa_P, kappa_S) column-wise; ties keep the lowest source index.

    Args:
        cache (ScoreCache): the cache of P (left unmodified)
        new_indices (iterable of int): indices outside P

    Returns:
        ScoreCache: the cache of P + new_indices
    """
    similarity = cache.similarity
    new_indices = _check_indices(new_indices, similarity.m, allow_empty=True)
    overlap = set(new_indices).intersection(cache.current_set)
    if overlap:
        raise SelectionError('Indices {} are already selected'.format(
            sorted(overlap)))
    if not new_indices:
        return cache

    batch = np.array(sorted(new_indices))
    rows = similarity.entries[batch]
    batch_max = rows.max(axis=0)
    batch_argmax = batch[rows.argmax(axis=0)]
    if cache.current_set:
        better = (batch_max > cache.column_max) | (
                (batch_max == cache.column_max) &
                (batch_argmax < cache.column_argmax))
        column_max = np.where(better, batch_max, cache.column_max)
        column_argmax = np.where(better, batch_argmax, cache.column_argmax)
    else:
        column_max = batch_max
        column_argmax = batch_argmax
    return ScoreCache(similarity, cache.q, column_max, column_argmax,
                      cache.current_set + tuple(new_indices))


def plan_for_set(similarity, q, indices):
    """The optimal sparse-support plan of P.

    Column j sends all of its mass q_j to the row of P with the largest
    similarity (ties go to the lowest source index).

    Args:
        similarity (SimilarityMatrix): m x n similarities
        q (SimplexWeights): target weights
        indices (iterable of int): the non-empty set P; rows of the plan follow
            this order

    Returns:
        TransportPlan: |P| x n, one non-zero per column
    """
    q = _check_q(similarity, q)
    indices = _check_indices(indices, similarity.m)
    ordered = sorted(indices)
    position = {index: row for row, index in enumerate(indices)}
    winners = np.array(ordered)[similarity.entries[ordered].argmax(axis=0)]
    rows = np.array([position[i] for i in winners], dtype=int)

    entries = np.zeros((len(indices), similarity.n))
    entries[rows, np.arange(similarity.n)] = q.values
    objective = float(q.values @ similarity.entries[winners,
                                                    np.arange(similarity.n)])
    return TransportPlan(entries, indices, objective=objective,
                         marginal_violation=0.0, solver='sparse_support')


def weights_from_plan(plan, q=None, tol=None):
    """Prototype weights w = plan 1.

    Args:
        plan (TransportPlan): the plan
        q (SimplexWeights, optional): the target weights the plan's columns
            must sum to
        tol (float): largest allowed column-sum deviation. Defaults to
            settings.simplex_tol.

    Returns:
        SimplexWeights: one weight per plan row
    """
    if tol is None:
        tol = settings.simplex_tol
    column_sums = plan.column_sums
    if q is not None:
        q = as_weights(q)
        if len(q) != len(column_sums) or \
                np.abs(column_sums - q.values).max() > tol:
            raise SimplexError('Plan column sums do not match q')
    elif abs(column_sums.sum() - 1) > tol:
        raise SimplexError('Plan column sums do not lie on the simplex')
    return SimplexWeights(plan.row_sums)


def prototypes_from_indices(similarity, q, indices):
    """PrototypeSet of P with its sparse-support plan, weights and f(P)"""
    plan = plan_for_set(similarity, q, indices)
    weights = weights_from_plan(plan, q)
    return PrototypeSet(plan.row_index_map, weights, plan=plan,
                        objective=plan.metadata['objective'], m=similarity.m)


def submodularity_ratio(similarity, q, base, added):
    """alpha_{L,S}: summed single-element gains over the joint gain.

    Args:
        similarity (SimilarityMatrix): m x n similarities
        q (SimplexWeights): target weights
        base (iterable of int): L, possibly empty
        added (iterable of int): S, non-empty and disjoint from L

    Returns:
        float: the ratio; 1.0 when adding S does not change f
    """
    cache = empty_cache(similarity, q)
    cache = extend_cache(cache, base)
    added = _check_indices(added, similarity.m)
    singles = incremental_gains(cache, added).sum()
    joint = extend_cache(cache, added).objective - cache.objective
    if joint <= 0:
        return 1.0
    return float(singles / joint)


def greedy_guarantee(alpha):
    """1 - exp(-1 / alpha), the worst-case ratio f(greedy) / f(optimum)"""
    if not alpha > 0:
        raise SelectionError('alpha must be positive')
    return 1.0 - math.exp(-1.0 / alpha)
