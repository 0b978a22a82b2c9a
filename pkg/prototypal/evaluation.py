################################################################################
# Module: evaluation.py
# Description: Nearest-prototype classification, skewed targets, criticisms
#              and the randomized experiment runner producing accuracy and
#              objective curves
# License: MIT, see full license in LICENSE.md
# Web: https://github.com/prototypal/prototypal
################################################################################

import json
import logging as lg
import math
import os
import time

import numpy as np
import pandas as pd

from prototypal import settings
from prototypal.core import PrototypeSet, objective_of, _check_indices
from prototypal.data import Dataset, compute_ground_cost, to_similarity, \
    uniform_weights
from prototypal.mmd import MmdSelection, compose_with_ot, gaussian_kernel, \
    mmd_critic_select, protodash_select
from prototypal.selectors import SelectionConfig, random_select, spot_greedy, \
    spot_simple
from prototypal.transport import barycentric_map, UNMAPPED
from prototypal.utils import log, parallel_process, timer, DataError, \
    Error, ExperimentError, SelectionError

# slack of the floor() calls of the skew protocol
_skew_eps = 1e-9


class SkewSpec(object):
    """Class c forms z percent of the target, the other classes share the
    remaining 100 - z percent equally.

    skew_class may be None, in which case experiment runs draw it from the
    pool's classes.
    """

    def __init__(self, skew_class=None, z_percent=50.0, seed=None):
        if not 0 <= z_percent <= 100:
            raise DataError('z_percent must lie in [0, 100], got {!r}'.format(
                z_percent))
        self.skew_class = skew_class
        self.z_percent = float(z_percent)
        self.seed = seed

    def __repr__(self):
        return 'SkewSpec(skew_class={!r}, z_percent={!r}, seed={!r})'.format(
            self.skew_class, self.z_percent, self.seed)


class ExperimentResult(object):
    """Accuracy and objective curves of one method over randomized runs"""

    def __init__(self, method, runs, ks, acc_mean, acc_std, objective,
                 wall_time_s, run_wall_times=None):
        self.method = method
        self.runs = int(runs)
        self.ks = [int(k) for k in ks]
        self.acc_mean = [float(a) for a in acc_mean]
        self.acc_std = [float(a) for a in acc_std]
        self.objective = [float(o) for o in objective]
        self.wall_time_s = float(wall_time_s)
        self.run_wall_times = [float(t) for t in (run_wall_times or [])]

    def __repr__(self):
        return 'ExperimentResult(method={!r}, runs={}, ks={})'.format(
            self.method, self.runs, self.ks)

    @property
    def per_k_accuracy(self):
        return list(zip(self.ks, self.acc_mean, self.acc_std))

    @property
    def per_k_objective(self):
        return list(zip(self.ks, self.objective))

    def to_dict(self):
        return {'method': self.method,
                'runs': self.runs,
                'curve': [{'k': k, 'acc_mean': a, 'acc_std': s,
                           'objective': o} for k, a, s, o in
                          zip(self.ks, self.acc_mean, self.acc_std,
                              self.objective)],
                'wall_time_s': self.wall_time_s}

    @classmethod
    def from_dict(cls, data):
        curve = data['curve']
        return cls(data['method'], data['runs'], [c['k'] for c in curve],
                   [c['acc_mean'] for c in curve],
                   [c['acc_std'] for c in curve],
                   [c['objective'] for c in curve], data['wall_time_s'])


def nearest_prototype_classify(prototypes, source, test, metric_kind=None,
                               points=None):
    """1-NN classification of `test` with the prototypes as the reference set.

    Args:
        prototypes (PrototypeSet or list of int): source indices of the
            prototypes
        source (Dataset): labeled source dataset
        test (Dataset): points to classify; accuracy needs its labels
        metric_kind (str): distance used to find the nearest prototype.
            Defaults to settings.default_metric.
        points (list, optional): positions of the prototypes aligned with
            `prototypes` (e.g. barycentric images). UNMAPPED entries are left
            out of the reference set. Defaults to the source points.

    Returns:
        (numpy.ndarray, float): predicted labels and accuracy (None when the
        test set has no labels). Equidistant prototypes resolve to the lowest
        source index.
    """
    indices = list(getattr(prototypes, 'indices', prototypes))
    if not indices:
        raise SelectionError('Cannot classify with an empty prototype set')
    _check_indices(indices, source.m)
    if source.labels is None:
        raise DataError('Source dataset "{}" has no labels'.format(source.name))
    if points is None:
        points = [source.points[i] for i in indices]
    if len(points) != len(indices):
        raise DataError('{} prototype positions for {} prototypes'.format(
            len(points), len(indices)))
    if metric_kind is None or metric_kind == 'precomputed':
        metric_kind = settings.default_metric

    reference = sorted((i, p) for i, p in zip(indices, points)
                       if p is not UNMAPPED)
    if not reference:
        raise SelectionError('No prototype has a position to classify with')
    reference_points = Dataset(np.vstack([p for _, p in reference]))
    labels = source.labels[[i for i, _ in reference]]

    distances = compute_ground_cost(test, reference_points,
                                    metric_kind).entries
    predictions = labels[distances.argmin(axis=1)]
    accuracy = None
    if test.labels is not None:
        accuracy = float(np.mean(predictions == test.labels))
    return predictions, accuracy


def _skew_counts(available, skew_class, z):
    """Per-class counts of the largest feasible skewed target"""
    others = [c for c in available if c != skew_class]
    n_other = len(others)
    a_c = available[skew_class]
    min_other = min(available[c] for c in others)
    if z >= 100:
        return {skew_class: a_c, **{c: 0 for c in others}}
    if z <= 0:
        return {skew_class: 0, **{c: min_other for c in others}}

    size = min(math.floor(a_c * 100 / z + _skew_eps),
               math.floor(min_other * n_other * 100 / (100 - z) + _skew_eps))
    while size > 0:
        each = math.floor((100 - z) * size / (100 * n_other) + _skew_eps)
        skew_count = size - n_other * each
        # the remainder of the floors must not push c beyond one instance
        # of its share
        if skew_count <= a_c and each <= min_other and \
                abs(skew_count - z * size / 100) <= 1 + _skew_eps:
            return {skew_class: skew_count, **{c: each for c in others}}
        size -= 1
    return {c: 0 for c in available}


def build_skewed_target(pool, spec):
    """Samples a target in which `spec.skew_class` makes z percent.

    The size is the largest for which every class has enough points and the
    skew class lands within one instance of its share. The other classes get
    floor((100 - z) |Y| / (100 (C - 1))) points each and
    the skew class the exact remainder. Sampling is without replacement.

    Args:
        pool (Dataset): labeled points with at least two classes
        spec (SkewSpec): skew class, percentage and seed. A None skew class is
            drawn from the pool's classes with the seed.

    Returns:
        Dataset: the target, in pool order
    """
    if pool.labels is None:
        raise DataError('Skewed targets need a labeled pool')
    classes = pool.classes
    if len(classes) < 2:
        raise DataError('Skewed targets need at least two classes, "{}" has '
                        '{}'.format(pool.name, len(classes)))
    rng = np.random.default_rng(spec.seed)
    skew_class = spec.skew_class
    if skew_class is None:
        skew_class = classes[int(rng.integers(len(classes)))]
    members = {c: np.flatnonzero(pool.labels == c) for c in classes}
    if skew_class not in members:
        raise DataError('Unknown skew class {!r}; classes are {}'.format(
            skew_class, classes))

    counts = _skew_counts({c: len(members[c]) for c in classes}, skew_class,
                          spec.z_percent)
    total = sum(counts.values())
    if total == 0:
        raise DataError('No target satisfies z={}% for class {!r}'.format(
            spec.z_percent, skew_class))
    chosen = [rng.choice(members[c], size=counts[c], replace=False)
              for c in classes if counts[c] > 0]
    indices = np.sort(np.concatenate(chosen))
    log('Skewed target: class {!r} at {}%, {} points {}'.format(
        skew_class, spec.z_percent, total, counts), lg.DEBUG)
    return pool.subset(indices, name='{}_skew_{}_{:g}'.format(
        pool.name, skew_class, spec.z_percent))


def _normalized_weights(prototypes):
    if isinstance(prototypes, MmdSelection):
        return prototypes.normalized_weights.values
    return prototypes.weights.values


def witness_scores(prototypes, kernel):
    """MMD witness of every pool point.

    witness(x) = mean_j k(x, y_j) - sum_{i in P} w_i k(x, p_i), with the
    prototype weights normalized to sum 1.

    Args:
        prototypes (PrototypeSet or MmdSelection): prototypes indexing the pool
        kernel (KernelMatrix): kernel over the pool (the kernel source)

    Returns:
        numpy.ndarray: one score per pool point
    """
    indices = list(prototypes.indices)
    if not indices:
        return np.array(kernel.cross_mean, dtype=float)
    _check_indices(indices, kernel.m)
    w = _normalized_weights(prototypes)
    return kernel.cross_mean - kernel.gram[:, indices] @ w


def select_criticisms(prototypes, pool, kernel, count):
    """The `count` pool points with the largest |witness|, prototypes
    excluded, ties to the lowest index.

    Args:
        prototypes (PrototypeSet or MmdSelection): prototypes indexing the pool
        pool (Dataset): the candidate points
        kernel (KernelMatrix): kernel over the pool
        count (int): number of criticisms

    Returns:
        list of int: pool indices by decreasing |witness|
    """
    if kernel.m != pool.m:
        raise DataError('Kernel has {} points but the pool has {}'.format(
            kernel.m, pool.m))
    _check_indices(prototypes.indices, pool.m, allow_empty=True)
    candidates = np.setdiff1d(np.arange(pool.m), list(prototypes.indices))
    if int(count) != count or count < 0:
        raise SelectionError('count must be a non-negative integer')
    if count > len(candidates):
        raise SelectionError('Cannot select {} criticisms from {} '
                             'non-prototype points'.format(count,
                                                           len(candidates)))
    magnitude = np.abs(witness_scores(prototypes, kernel))[candidates]
    order = np.lexsort((candidates, -magnitude))
    return [int(candidates[i]) for i in order[:int(count)]]


def _select(method, k, similarity, q, kernel, seed):
    """Runs one selector; returns (indices, PrototypeSet or MmdSelection)"""
    if method == 'spot_greedy':
        selection, _ = spot_greedy(similarity, q, SelectionConfig(k))
    elif method == 'spot_simple':
        selection = spot_simple(similarity, q, k)
    elif method == 'random':
        selection = random_select(similarity, q, k, seed=seed)
    elif method.startswith('mmd_critic'):
        selection = mmd_critic_select(kernel, k)
    elif method.startswith('protodash'):
        selection = protodash_select(kernel, k)
    else:
        raise SelectionError('Unknown method "{}"; expected one of {}'.format(
            method, ', '.join(settings.selection_methods)))
    return selection


def _positions(method, selection, cost, q, target, domain_shift,
               sinkhorn_config):
    """Positions of the prototypes used by the classifier, or None for the
    source points"""
    if not domain_shift:
        return None
    if method.endswith('+ot'):
        plan = compose_with_ot(selection, cost.rows(selection.indices), q,
                               sinkhorn_config)
        return barycentric_map(plan, target)
    if isinstance(selection, PrototypeSet):
        return barycentric_map(selection.plan, target)
    return None


def select_kernel_width(source, target, k, method='mmd_critic', grid=None,
                        seed=None, metric_kind=None):
    """Gaussian width of the MMD selectors with the best held-out accuracy.

    Half of the labeled target (seeded split) is the target of the
    selector, the other half scores the 1-NN accuracy of its prototypes.

    Args:
        source (Dataset): labeled source
        target (Dataset): labeled target, at least two points
        k (int): number of prototypes
        method (str): 'mmd_critic' or 'protodash' (a '+ot' suffix is ignored)
        grid (iterable of float): candidate widths. Defaults to
            settings.kernel_width_grid.
        seed (int, optional): seed of the split
        metric_kind (str): distance of the 1-NN classifier

    Returns:
        float: the best width, the smallest one on ties
    """
    if grid is None:
        grid = settings.kernel_width_grid
    if target.labels is None or target.m < 2:
        raise DataError('Kernel width selection needs a labeled target with '
                        'at least two points')
    order = np.random.default_rng(seed).permutation(target.m)
    fit = target.subset(np.sort(order[:target.m // 2]))
    held_out = target.subset(np.sort(order[target.m // 2:]))
    select = protodash_select if method.startswith('protodash') else \
        mmd_critic_select

    best_sigma, best_accuracy = None, -np.inf
    for sigma in sorted(grid):
        selection = select(gaussian_kernel(source, fit, sigma), k)
        _, accuracy = nearest_prototype_classify(selection, source, held_out,
                                                 metric_kind)
        log('Kernel width {:g}: held-out accuracy {:.4f}'.format(
            sigma, accuracy), lg.DEBUG)
        if accuracy > best_accuracy:
            best_sigma, best_accuracy = float(sigma), accuracy
    return best_sigma


def single_run(run, source, target_spec, pool, methods, k_grid, seed_seq,
               metric_kind=None, sigma=None, domain_shift=False,
               sinkhorn_config=None):
    """One randomized run of :func:`run_experiment`.

    Returns:
        dict: {method: {'accuracy': [...], 'objective': [...],
        'wall_time': float}} plus 'target_size' and 'skew_class'
    """
    rng = np.random.default_rng(seed_seq)
    skew_seed, select_seed, width_seed = (int(s) for s in
                                          rng.integers(2 ** 63, size=3))
    if isinstance(target_spec, SkewSpec):
        skew_class = target_spec.skew_class
        if skew_class is None:
            classes = pool.classes
            skew_class = classes[int(rng.integers(len(classes)))]
        try:
            target = build_skewed_target(pool, SkewSpec(
                skew_class, target_spec.z_percent, skew_seed))
        except Error as e:
            raise ExperimentError(run, 'target', e) from e
    else:
        target, skew_class = target_spec, None

    try:
        cost = compute_ground_cost(source, target, metric_kind)
        similarity = to_similarity(cost)
        q = uniform_weights(target.m)
    except Error as e:
        raise ExperimentError(run, 'similarity', e) from e

    kernel = None
    if any(m.startswith(('mmd_critic', 'protodash')) for m in methods):
        try:
            width = sigma
            if width == 'auto':
                base = next(m for m in methods if
                            m.startswith(('mmd_critic', 'protodash')))
                width = select_kernel_width(source, target, max(k_grid), base,
                                            seed=width_seed,
                                            metric_kind=metric_kind)
            elif width is None:
                width = settings.default_kernel_width
            kernel = gaussian_kernel(source, target, width)
        except Error as e:
            raise ExperimentError(run, 'kernel', e) from e

    out = {'target_size': target.m, 'skew_class': skew_class}
    for method in methods:
        accuracy, objective, wall_time = [], [], 0.0
        try:
            for k in k_grid:
                with timer() as elapsed:
                    selection = _select(method, k, similarity, q, kernel,
                                        select_seed)
                wall_time += elapsed[0]
                points = _positions(method, selection, cost, q, target,
                                    domain_shift, sinkhorn_config)
                _, acc = nearest_prototype_classify(selection, source, target,
                                                    metric_kind, points)
                accuracy.append(acc)
                objective.append(objective_of(similarity, q,
                                              selection.indices))
        except Exception as e:
            raise ExperimentError(run, method, e) from e
        out[method] = {'accuracy': accuracy, 'objective': objective,
                       'wall_time': wall_time}
    log('Run {} done on a target of {} points'.format(run, target.m))
    return out


def run_experiment(source, target_spec, methods, k_grid, runs=10, seed=0,
                   pool=None, metric_kind=None, sigma=None,
                   domain_shift=False, sinkhorn_config=None,
                   processors=None):
    """Accuracy-vs-k and objective-vs-k curves averaged over randomized runs.

    Every run derives its own seed from SeedSequence(seed), rebuilds the
    target, runs every method over `k_grid` and scores the prototypes with
    1-NN classification of the target. Runs are independent and may run in
    parallel; aggregation follows the run index.

    Args:
        source (Dataset): labeled source
        target_spec (SkewSpec or Dataset): a skew drawn from `pool` every run,
            or a fixed labeled target
        methods (list of str): names from settings.selection_methods
        k_grid (iterable of int): numbers of prototypes
        runs (int): number of randomized runs
        seed (int): master seed
        pool (Dataset): labeled points skewed targets are drawn from
        metric_kind (str): ground metric. Defaults to settings.default_metric.
        sigma (float or 'auto'): Gaussian width of the MMD selectors. 'auto'
            picks it per run with :func:`select_kernel_width`. Defaults to
            settings.default_kernel_width.
        domain_shift (bool): if True, classify with barycentrically mapped
            prototypes (SPOT methods and the '+ot' variants)
        sinkhorn_config (SinkhornConfig, optional): for '+ot' compositions too
            large for the exact solver
        processors (int): worker processes. Defaults to settings.processors.

    Returns:
        list of ExperimentResult: one per method, in `methods` order
    """
    methods = list(methods)
    k_grid = sorted(int(k) for k in k_grid)
    unknown = [m for m in methods if m not in settings.selection_methods]
    if unknown or not methods:
        raise SelectionError('Unknown methods {}; expected some of {}'.format(
            unknown, ', '.join(settings.selection_methods)))
    if not k_grid or k_grid[0] < 1 or k_grid[-1] > source.m:
        raise SelectionError('k values must lie in [1, {}], got {}'.format(
            source.m, k_grid))
    if int(runs) != runs or runs < 1:
        raise SelectionError('runs must be a positive integer')
    if source.labels is None:
        raise DataError('The experiment needs a labeled source')
    if isinstance(target_spec, SkewSpec) and pool is None:
        raise DataError('A skewed target needs a pool to draw from')
    if processors is None:
        processors = settings.processors

    start_time = time.time()
    seeds = np.random.SeedSequence(seed).spawn(runs)
    jobs = {run: dict(run=run, source=source, target_spec=target_spec,
                      pool=pool, methods=methods, k_grid=k_grid,
                      seed_seq=seeds[run], metric_kind=metric_kind,
                      sigma=sigma, domain_shift=domain_shift,
                      sinkhorn_config=sinkhorn_config)
            for run in range(runs)}
    outputs = parallel_process(jobs, single_run, processors=processors,
                               desc='runs')

    results = []
    for method in methods:
        accuracy = np.array([outputs[r][method]['accuracy'] for r in
                             range(runs)])
        objective = np.array([outputs[r][method]['objective'] for r in
                              range(runs)])
        times = [outputs[r][method]['wall_time'] for r in range(runs)]
        results.append(ExperimentResult(method, runs, k_grid,
                                        accuracy.mean(axis=0),
                                        accuracy.std(axis=0),
                                        objective.mean(axis=0), sum(times),
                                        times))
    log('Experiment with {} runs of {} methods completed in {:,.2f} '
        'seconds'.format(runs, len(methods), time.time() - start_time))
    return results


def results_to_frame(results):
    """Flat table with one row per (method, k)"""
    rows = [{'method': r.method, 'k': k, 'acc_mean': a, 'acc_std': s,
             'objective': o}
            for r in results
            for k, a, s, o in zip(r.ks, r.acc_mean, r.acc_std, r.objective)]
    return pd.DataFrame(rows, columns=['method', 'k', 'acc_mean', 'acc_std',
                                       'objective'])


def write_results(results, path, format='json'):
    """Writes experiment results as a JSON list or as the flat CSV.

    Args:
        results (list of ExperimentResult): the curves
        path (str): destination file
        format (str): 'json' or 'csv'
    """
    folder = os.path.dirname(path)
    if folder and not os.path.isdir(folder):
        os.makedirs(folder)
    if format == 'csv':
        results_to_frame(results).to_csv(path, index=False,
                                         float_format='%.17g')
    elif format == 'json':
        with open(path, 'w', encoding='utf-8') as f:
            json.dump([r.to_dict() for r in results], f, indent=2)
    else:
        raise DataError('Unknown results format "{}"'.format(format))


def read_results(path):
    """Reads the JSON written by :func:`write_results`"""
    with open(path, encoding='utf-8') as f:
        return [ExperimentResult.from_dict(d) for d in json.load(f)]
