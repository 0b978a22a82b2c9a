################################################################################
# Module: transport.py
# Description: Classical optimal transport: an exact transportation simplex
#              for small problems, entropic Sinkhorn scaling, and the
#              barycentric mapping of transported points
# License: MIT, see full license in LICENSE.md
# Web: https://github.com/prototypal/prototypal
################################################################################

import logging as lg
import time
from collections import deque

import numpy as np
from scipy.special import logsumexp

from prototypal import settings
from prototypal.core import TransportPlan
from prototypal.data import GroundCost, as_weights
from prototypal.utils import log, TransportError

# marker of a prototype that receives no mass
UNMAPPED = None


class OtProblem(object):
    """min <C, gamma> over plans with row sums p and column sums q"""

    def __init__(self, cost, p, q, row_index_map=None):
        """

        Args:
            cost (GroundCost or array-like): k x n costs
            p (SimplexWeights): source weights, length k
            q (SimplexWeights): target weights, length n
            row_index_map (list of int, optional): source index of every row
        """
        if not isinstance(cost, GroundCost):
            cost = GroundCost(cost)
        self.cost = cost
        self.p = as_weights(p)
        self.q = as_weights(q)
        if cost.shape != (len(self.p), len(self.q)):
            raise TransportError('Cost of shape {} does not match marginals of '
                                 'lengths {} and {}'.format(cost.shape,
                                                            len(self.p),
                                                            len(self.q)))
        self.row_index_map = row_index_map

    @property
    def shape(self):
        return self.cost.shape


class SinkhornConfig(object):
    """Entropic regularization, iteration cap and L1 marginal tolerance"""

    def __init__(self, reg, max_iters=None, tol=None):
        if max_iters is None:
            max_iters = settings.sinkhorn_max_iters
        if tol is None:
            tol = settings.sinkhorn_tol
        if not reg > 0:
            raise TransportError('Sinkhorn reg must be positive, got '
                                 '{!r}'.format(reg))
        if not tol > 0:
            raise TransportError('Sinkhorn tol must be positive')
        if int(max_iters) != max_iters or max_iters < 1:
            raise TransportError('Sinkhorn max_iters must be a positive '
                                 'integer')
        self.reg = float(reg)
        self.max_iters = int(max_iters)
        self.tol = float(tol)

    def __repr__(self):
        return 'SinkhornConfig(reg={!r}, max_iters={}, tol={!r})'.format(
            self.reg, self.max_iters, self.tol)

    @classmethod
    def for_cost(cls, cost, **kwargs):
        """Default config: reg = settings.sinkhorn_reg_factor * max(C), or 1
        for an all-zero cost."""
        max_cost = cost.max if isinstance(cost, GroundCost) else \
            float(np.max(cost))
        reg = settings.sinkhorn_reg_factor * max_cost if max_cost > 0 else 1.0
        return cls(reg, **kwargs)


def _violations(entries, p, q):
    return (float(np.abs(entries.sum(axis=1) - p).sum()),
            float(np.abs(entries.sum(axis=0) - q).sum()))


def _northwest_corner(p, q):
    """Initial basic feasible solution with exactly k + n - 1 basic cells"""
    k, n = len(p), len(q)
    supply, demand = p.copy(), q.copy()
    x = np.zeros((k, n))
    basis = set()
    i = j = 0
    while True:
        amount = min(supply[i], demand[j])
        x[i, j] = amount
        basis.add((i, j))
        supply[i] -= amount
        demand[j] -= amount
        if i == k - 1 and j == n - 1:
            break
        if i == k - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif supply[i] <= demand[j]:
            i += 1
        else:
            j += 1
    return x, basis


def _potentials(cost, basis, k, n):
    """Duals u, v with u_i + v_j = C_ij on the basis tree"""
    row_cells = [[] for _ in range(k)]
    col_cells = [[] for _ in range(n)]
    for i, j in basis:
        row_cells[i].append(j)
        col_cells[j].append(i)
    u = np.full(k, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    queue = deque([('row', 0)])
    while queue:
        kind, index = queue.popleft()
        if kind == 'row':
            for j in row_cells[index]:
                if np.isnan(v[j]):
                    v[j] = cost[index, j] - u[index]
                    queue.append(('col', j))
        else:
            for i in col_cells[index]:
                if np.isnan(u[i]):
                    u[i] = cost[i, index] - v[index]
                    queue.append(('row', i))
    return u, v


def _tree_path(basis, k, n, start_col, end_row):
    """Basis cells on the tree path from column `start_col` to row
    `end_row`, in path order"""
    row_cells = [[] for _ in range(k)]
    col_cells = [[] for _ in range(n)]
    for i, j in basis:
        row_cells[i].append(j)
        col_cells[j].append(i)
    parent = {('col', start_col): None}
    queue = deque([('col', start_col)])
    while queue:
        node = queue.popleft()
        kind, index = node
        if node == ('row', end_row):
            break
        if kind == 'col':
            neighbours = [(('row', i), (i, index)) for i in col_cells[index]]
        else:
            neighbours = [(('col', j), (index, j)) for j in row_cells[index]]
        for neighbour, cell in neighbours:
            if neighbour not in parent:
                parent[neighbour] = (node, cell)
                queue.append(neighbour)
    path = []
    node = ('row', end_row)
    while parent[node] is not None:
        node, cell = parent[node]
        path.append(cell)
    return path[::-1]


def solve_exact(problem):
    """Exact optimal plan by the transportation simplex.

    North-west-corner start, then pivots with Bland's rule (first entering
    cell in row-major order, lowest leaving cell on ties), which keeps the
    method finite on degenerate problems and the output deterministic.

    Args:
        problem (OtProblem): at most settings.exact_ot_max_cells cells

    Returns:
        TransportPlan: a vertex-optimal plan (at most k + n - 1 non-zeros)
    """
    k, n = problem.shape
    if k * n > settings.exact_ot_max_cells:
        raise TransportError('Exact solver is limited to {} cells, got {}x{}; '
                             'use solve_sinkhorn'.format(
                                 settings.exact_ot_max_cells, k, n))
    start_time = time.time()
    cost = problem.cost.entries
    p, q = problem.p.values, problem.q.values
    tol = 1e-12 * max(1.0, float(np.abs(cost).max()))

    x, basis = _northwest_corner(p, q)
    max_pivots = 100 * k * n + 100
    iterations = 0
    while True:
        u, v = _potentials(cost, basis, k, n)
        reduced = cost - u[:, None] - v[None, :]
        for i, j in basis:
            reduced[i, j] = 0.0
        negative = np.flatnonzero(reduced.ravel() < -tol)
        if negative.size == 0:
            break
        if iterations >= max_pivots:
            raise TransportError('Transportation simplex did not terminate '
                                 'after {} pivots'.format(iterations))
        entering = divmod(int(negative[0]), n)

        path = _tree_path(basis, k, n, entering[1], entering[0])
        # signs alternate -, +, -, ... along the path; the entering cell is +
        minus = path[0::2]
        plus = path[1::2]
        theta = min(x[cell] for cell in minus)
        leaving = min(cell for cell in minus if x[cell] == theta)
        for cell in minus:
            x[cell] -= theta
        for cell in plus:
            x[cell] += theta
        x[entering] += theta
        x[leaving] = 0.0
        basis.remove(leaving)
        basis.add(entering)
        iterations += 1

    row_violation, col_violation = _violations(x, p, q)
    log('Exact transport on {}x{} solved in {} pivots, {:,.2f} seconds'.format(
        k, n, iterations, time.time() - start_time), lg.DEBUG)
    return TransportPlan(x, problem.row_index_map,
                         objective=float(np.sum(cost * x)),
                         marginal_violation=max(row_violation, col_violation),
                         row_violation=row_violation,
                         col_violation=col_violation,
                         solver='transportation_simplex', reg=None,
                         converged=True, iterations=iterations)


def _sinkhorn_scaling(cost, a, b, config):
    """Plain scaling, u = a / Kv, v = b / K'u"""
    with np.errstate(over='ignore', under='ignore'):
        K = np.exp(-cost / config.reg)
    if (K.sum(axis=1) == 0).any() or (K.sum(axis=0) == 0).any():
        raise TransportError('Sinkhorn kernel underflows with reg={:.3g}; use '
                             'a larger reg'.format(config.reg))
    u = np.ones(len(a))
    v = np.ones(len(b))
    plan = u[:, None] * K * v[None, :]
    for iteration in range(1, config.max_iters + 1):
        with np.errstate(over='ignore', divide='ignore', invalid='ignore'):
            v = b / (K.T @ u)
            u = a / (K @ v)
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise TransportError('Sinkhorn scaling overflowed with reg={:.3g}; '
                                 'use a larger reg'.format(config.reg))
        plan = u[:, None] * K * v[None, :]
        if max(_violations(plan, a, b)) < config.tol:
            return plan, iteration, True
    return plan, config.max_iters, False


def _sinkhorn_log(cost, a, b, config):
    """Log-domain iterations on the dual potentials f, g"""
    reg = config.reg
    log_a, log_b = np.log(a), np.log(b)
    f = np.zeros(len(a))
    g = np.zeros(len(b))
    plan = np.exp((f[:, None] + g[None, :] - cost) / reg)
    for iteration in range(1, config.max_iters + 1):
        g = reg * (log_b - logsumexp((f[:, None] - cost) / reg, axis=0))
        f = reg * (log_a - logsumexp((g[None, :] - cost) / reg, axis=1))
        plan = np.exp((f[:, None] + g[None, :] - cost) / reg)
        if not np.isfinite(plan).all():
            raise TransportError('Log-domain Sinkhorn diverged with '
                                 'reg={:.3g}; use a larger reg'.format(reg))
        if max(_violations(plan, a, b)) < config.tol:
            return plan, iteration, True
    return plan, config.max_iters, False


def solve_sinkhorn(problem, config=None):
    """Entropic optimal transport by Sinkhorn scaling.

    Rows and columns with zero mass are dropped before scaling and get zero
    rows/columns in the plan. When reg / max(C) is below
    settings.sinkhorn_log_threshold the iterations run in the log domain.
    Non-convergence is not an error: the plan comes back with
    metadata['converged'] = False and a warning is logged.

    Args:
        problem (OtProblem): the transport problem
        config (SinkhornConfig, optional): defaults to
            SinkhornConfig.for_cost(problem.cost)

    Returns:
        TransportPlan: diag(u) exp(-C / reg) diag(v) on the support of p, q
    """
    if config is None:
        config = SinkhornConfig.for_cost(problem.cost)
    start_time = time.time()
    cost = problem.cost.entries
    p, q = problem.p.values, problem.q.values
    rows, cols = np.flatnonzero(p > 0), np.flatnonzero(q > 0)
    reduced = cost[np.ix_(rows, cols)]

    max_cost = problem.cost.max
    log_domain = max_cost > 0 and \
        config.reg / max_cost < settings.sinkhorn_log_threshold
    if log_domain:
        plan, iterations, converged = _sinkhorn_log(reduced, p[rows], q[cols],
                                                    config)
    else:
        plan, iterations, converged = _sinkhorn_scaling(reduced, p[rows],
                                                        q[cols], config)

    entries = np.zeros(problem.shape)
    entries[np.ix_(rows, cols)] = plan
    row_violation, col_violation = _violations(entries, p, q)
    if not converged:
        log('Sinkhorn did not converge in {} iterations (marginal violation '
            '{:.3g}, reg={:.3g})'.format(iterations,
                                         max(row_violation, col_violation),
                                         config.reg), lg.WARNING)
    log('Sinkhorn on {}x{} ran {} iterations in {:,.2f} seconds'.format(
        problem.shape[0], problem.shape[1], iterations,
        time.time() - start_time), lg.DEBUG)
    return TransportPlan(entries, problem.row_index_map,
                         objective=float(np.sum(cost * entries)),
                         marginal_violation=max(row_violation, col_violation),
                         row_violation=row_violation,
                         col_violation=col_violation,
                         solver='sinkhorn_log' if log_domain else 'sinkhorn',
                         reg=config.reg, converged=converged,
                         iterations=iterations)


def solve_transport(problem, config=None):
    """solve_exact when the problem fits its size guard, else
    solve_sinkhorn"""
    k, n = problem.shape
    if k * n <= settings.exact_ot_max_cells:
        return solve_exact(problem)
    return solve_sinkhorn(problem, config)


def barycentric_map(plan, target):
    """Images of the plan rows in the target domain.

    Row i maps to sum_j gamma_ij y_j / sum_j gamma_ij, a point in the convex
    hull of the targets it sends mass to.

    Args:
        plan (TransportPlan): k x n plan
        target (Dataset): the n target points

    Returns:
        list: one d-vector (numpy.ndarray) per row, or UNMAPPED (None) for a
        row without mass
    """
    if plan.shape[1] != target.m:
        raise TransportError('Plan has {} columns but the target has {} '
                             'points'.format(plan.shape[1], target.m))
    mass = plan.row_sums
    images = []
    for i in range(plan.shape[0]):
        if mass[i] > 0:
            images.append(plan.entries[i] @ target.points / mass[i])
        else:
            images.append(UNMAPPED)
    return images
