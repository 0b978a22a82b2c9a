################################################################################
# Module: mmd.py
# Description: Gaussian kernel mean embeddings and the MMD-based baseline
#              selectors (MMD-Critic, ProtoDash) with their optimal transport
#              composition
# License: MIT, see full license in LICENSE.md
# Web: https://github.com/prototypal/prototypal
################################################################################

import logging as lg
import time

import numpy as np
from sklearn.metrics.pairwise import rbf_kernel

from prototypal import settings
from prototypal.data import GroundCost, SimplexWeights
from prototypal.transport import OtProblem, solve_transport
from prototypal.utils import log, DataError, KernelError


class KernelMatrix(object):
    """Gram matrix K of the source points and the mean embedding mu of the
    target evaluated at every source point."""

    def __init__(self, gram, cross_mean, kernel_width):
        gram = np.array(gram, dtype=float)
        cross_mean = np.array(cross_mean, dtype=float).reshape(-1)
        if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
            raise KernelError('The Gram matrix must be square')
        if np.abs(gram - gram.T).max(initial=0.0) > 1e-9:
            raise KernelError('The Gram matrix is not symmetric')
        if len(cross_mean) != gram.shape[0]:
            raise KernelError('cross_mean has {} entries for {} source '
                              'points'.format(len(cross_mean), gram.shape[0]))
        gram.setflags(write=False)
        cross_mean.setflags(write=False)
        self.gram = gram
        self.cross_mean = cross_mean
        self.kernel_width = kernel_width

    def __repr__(self):
        return 'KernelMatrix(m={}, kernel_width={!r})'.format(self.m,
                                                              self.kernel_width)

    @property
    def m(self):
        return self.gram.shape[0]


class MmdSelection(object):
    """Indices chosen by an MMD selector with their (unnormalized) weights.

    `score` is l(w) of the final weights and `history` the value of l after
    every addition (after every refit for ProtoDash).
    """

    def __init__(self, indices, weights, score, history=None, method=None):
        self.indices = tuple(int(i) for i in indices)
        weights = np.array(weights, dtype=float).reshape(-1)
        if len(weights) != len(self.indices):
            raise KernelError('{} weights for {} indices'.format(
                len(weights), len(self.indices)))
        if (weights < 0).any():
            raise KernelError('MMD weights must be non-negative')
        self.weights = weights
        self.score = float(score)
        self.history = [float(h) for h in (history or [])]
        self.method = method

    def __len__(self):
        return len(self.indices)

    def __repr__(self):
        return 'MmdSelection(method={!r}, k={}, score={!r})'.format(
            self.method, len(self), self.score)

    @property
    def normalized_weights(self):
        """The weights rescaled onto the simplex"""
        total = self.weights.sum()
        if not total > 0:
            raise KernelError('Cannot normalize all-zero MMD weights')
        return SimplexWeights(self.weights / total)

    def to_dict(self):
        return {'indices': list(self.indices),
                'weights': self.weights.tolist(),
                'score': self.score,
                'history': list(self.history),
                'method': self.method}

    @classmethod
    def from_dict(cls, data):
        return cls(data['indices'], data['weights'], data['score'],
                   data.get('history'), data.get('method'))


def gaussian_kernel(source, target, sigma):
    """Gaussian kernel exp(-||x - y||^2 / (2 sigma^2)) over a source and a
    target dataset.

    Args:
        source (Dataset): the m source points
        target (Dataset): the n target points
        sigma (float): kernel width, positive

    Returns:
        KernelMatrix: source Gram matrix and target mean embedding
    """
    if not sigma > 0:
        raise KernelError('Kernel width must be positive, got {!r}'.format(
            sigma))
    if source.d != target.d:
        raise DataError('Dimension mismatch: source has d={}, target has '
                        'd={}'.format(source.d, target.d))
    gamma = 1.0 / (2.0 * sigma ** 2)
    gram = rbf_kernel(source.points, gamma=gamma)
    # exact symmetry, rbf_kernel's distances are not bitwise symmetric
    gram = (gram + gram.T) / 2.0
    np.fill_diagonal(gram, 1.0)
    cross_mean = rbf_kernel(source.points, target.points,
                            gamma=gamma).mean(axis=1)
    return KernelMatrix(gram, cross_mean, float(sigma))


def mmd_objective(kernel, w):
    """l(w) = mu'w - 1/2 w'Kw.

    Args:
        kernel (KernelMatrix): K and mu
        w (array-like): non-negative weights over the m source points

    Returns:
        float
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if len(w) != kernel.m:
        raise KernelError('w has length {} but the kernel has {} source '
                          'points'.format(len(w), kernel.m))
    if (w < 0).any():
        raise KernelError('MMD weights must be non-negative')
    return float(kernel.cross_mean @ w - 0.5 * w @ kernel.gram @ w)


def _support_objective(kernel, support, w):
    support = list(support)
    gram = kernel.gram[np.ix_(support, support)]
    return float(kernel.cross_mean[support] @ w - 0.5 * w @ gram @ w)


def _check_k(k, m):
    if int(k) != k or k < 0:
        raise KernelError('k must be a non-negative integer, got '
                          '{!r}'.format(k))
    if k > m:
        raise KernelError('k={} exceeds the {} source points'.format(k, m))
    return int(k)


def _first_max(scores, available):
    """Index of the largest score among `available` (lowest index on ties)"""
    masked = np.where(available, scores, -np.inf)
    return int(np.argmax(masked))


def mmd_critic_select(kernel, k):
    """Greedy MMD-Critic prototypes with equal weights.

    Step t adds the point i maximizing l at w = 1/t on P + {i}, re-normalizing
    every weight; ties go to the lowest index.

    Args:
        kernel (KernelMatrix): K and mu
        k (int): number of prototypes, 0 <= k <= m

    Returns:
        MmdSelection: weights all 1/k
    """
    k = _check_k(k, kernel.m)
    start_time = time.time()
    gram, mu = kernel.gram, kernel.cross_mean
    diagonal = np.diag(gram)
    available = np.ones(kernel.m, dtype=bool)
    selected = []
    history = []
    mu_sum = 0.0
    gram_sum = 0.0
    cross = np.zeros(kernel.m)
    for t in range(1, k + 1):
        scores = (mu_sum + mu) / t - \
            (gram_sum + 2.0 * cross + diagonal) / (2.0 * t ** 2)
        best = _first_max(scores, available)
        history.append(float(scores[best]))
        available[best] = False
        selected.append(best)
        mu_sum += mu[best]
        gram_sum += 2.0 * cross[best] + diagonal[best]
        cross += gram[:, best]
    log('Selected {} prototypes with mmd_critic in {:,.2f} seconds'.format(
        k, time.time() - start_time), lg.DEBUG)
    if not selected:
        return MmdSelection([], [], 0.0, history, method='mmd_critic')
    return MmdSelection(selected, np.full(k, 1.0 / k), history[-1], history,
                        method='mmd_critic')


def protodash_refit(kernel, support, w0=None, max_iters=None, tol=None):
    """Maximizes l(w) over w >= 0 supported on `support`.

    Projected gradient ascent with step 1/L, L the largest absolute row sum
    of K restricted to the support (an upper bound of its spectral radius),
    so l never decreases along the iterations.

    Args:
        kernel (KernelMatrix): K and mu
        support (list of int): the selected indices
        w0 (array-like, optional): starting weights on `support`. Defaults
            to zeros.
        max_iters (int): defaults to settings.protodash_max_iters
        tol (float): stop when the norm of the projected gradient falls below
            tol. Defaults to settings.protodash_tol.

    Returns:
        (numpy.ndarray, list): the weights and l(w) after every iteration
    """
    if max_iters is None:
        max_iters = settings.protodash_max_iters
    if tol is None:
        tol = settings.protodash_tol
    support = list(support)
    gram = kernel.gram[np.ix_(support, support)]
    mu = kernel.cross_mean[support]
    w = np.zeros(len(support)) if w0 is None else \
        np.maximum(np.array(w0, dtype=float), 0.0)
    lipschitz = np.abs(gram).sum(axis=1).max()
    if not lipschitz > 0:
        lipschitz = 1.0
    scores = []
    for _ in range(max_iters):
        gradient = mu - gram @ w
        stepped = np.maximum(w + gradient / lipschitz, 0.0)
        if np.linalg.norm(lipschitz * (stepped - w)) < tol:
            break
        w = stepped
        scores.append(float(mu @ w - 0.5 * w @ gram @ w))
    return w, scores


def protodash_select(kernel, k):
    """Greedy ProtoDash prototypes with learned non-negative weights.

    Every step adds the unselected point with the largest gradient
    mu - Kw of l at the current weights (ties to the lowest index), then
    refits the weights on the support with :func:`protodash_refit`, warm
    started from the previous weights.

    Args:
        kernel (KernelMatrix): K and mu
        k (int): number of prototypes, 0 <= k <= m

    Returns:
        MmdSelection: weights >= 0, not normalized
    """
    k = _check_k(k, kernel.m)
    start_time = time.time()
    gram, mu = kernel.gram, kernel.cross_mean
    available = np.ones(kernel.m, dtype=bool)
    selected = []
    w = np.zeros(0)
    history = []
    for _ in range(k):
        gradient = mu - gram[:, selected] @ w
        best = _first_max(gradient, available)
        available[best] = False
        selected.append(best)
        w, _ = protodash_refit(kernel, selected, np.append(w, 0.0))
        history.append(_support_objective(kernel, selected, w))
    log('Selected {} prototypes with protodash in {:,.2f} seconds'.format(
        k, time.time() - start_time), lg.DEBUG)
    score = history[-1] if history else 0.0
    return MmdSelection(selected, w, score, history, method='protodash')


def compose_with_ot(selection, cost_rows, q, config=None):
    """Transport plan from MMD prototypes to the target.

    The prototype distribution is the normalized selection weights. Small
    problems are solved exactly, larger ones with Sinkhorn.

    Args:
        selection (MmdSelection): the prototypes
        cost_rows (GroundCost): |P| x n costs, rows in selection order
        q (SimplexWeights): target weights
        config (SinkhornConfig, optional): used when Sinkhorn is needed

    Returns:
        TransportPlan: rows follow selection.indices
    """
    if not isinstance(cost_rows, GroundCost):
        cost_rows = GroundCost(cost_rows)
    if cost_rows.shape[0] != len(selection):
        raise KernelError('Cost has {} rows for {} prototypes'.format(
            cost_rows.shape[0], len(selection)))
    problem = OtProblem(cost_rows, selection.normalized_weights, q,
                        row_index_map=selection.indices)
    return solve_transport(problem, config)
