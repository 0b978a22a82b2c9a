################################################################################
# Module: data.py
# Description: Datasets, ground costs, similarity matrices and simplex weights
# License: MIT, see full license in LICENSE.md
# Web: https://github.com/prototypal/prototypal
################################################################################

import logging as lg
import math
import os
import time

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from sklearn.datasets import make_blobs

from prototypal import settings
from prototypal.utils import log, validate_metric, DataError, SimplexError, \
    SimilarityError

# scipy names of the supported metrics
_cdist_metrics = {'squared_euclidean': 'sqeuclidean',
                  'euclidean': 'euclidean',
                  'manhattan': 'cityblock',
                  'cosine_distance': 'cosine'}


def _frozen(values, dtype=float):
    """Returns a read-only copy of `values`"""
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


class Dataset(object):
    """A set of m feature vectors of dimension d, with optional labels"""

    def __init__(self, points, labels=None, name=''):
        """

        Args:
            points (array-like): m x d features. A 1-D array is read as m
                points of dimension 1.
            labels (array-like, optional): m class identifiers
            name (str): free-form tag
        """
        points = np.array(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[1] < 1:
            raise DataError('Dataset "{}" needs a 2-D array of points with at '
                            'least one feature'.format(name))
        if not np.isfinite(points).all():
            raise DataError('Dataset "{}" contains NaN or infinite '
                            'features'.format(name))
        self.points = _frozen(points)
        if labels is not None:
            labels = np.array(labels, dtype=object).reshape(-1)
            if len(labels) != len(points):
                raise DataError('Dataset "{}" has {} points but {} '
                                'labels'.format(name, len(points),
                                                len(labels)))
            labels.setflags(write=False)
        self.labels = labels
        self.name = name

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return 'Dataset(name={!r}, m={}, d={}, labels={})'.format(
            self.name, self.m, self.d, self.labels is not None)

    @property
    def m(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def classes(self):
        """Sorted distinct labels"""
        if self.labels is None:
            return []
        return sorted(set(self.labels), key=lambda c: (str(type(c)), c))

    def subset(self, indices, name=None):
        """Returns the Dataset restricted to `indices`, in that order"""
        indices = np.asarray(indices, dtype=int)
        labels = None if self.labels is None else self.labels[indices]
        return Dataset(self.points[indices], labels,
                       name=self.name if name is None else name)


class GroundCost(object):
    """An m x n matrix of non-negative transport costs"""

    def __init__(self, entries, metric_kind='precomputed'):
        """

        Args:
            entries (array-like): m x n non-negative finite costs
            metric_kind (str): one of settings.metric_kinds
        """
        entries = np.array(entries, dtype=float)
        if entries.ndim != 2 or 0 in entries.shape:
            raise DataError('A ground cost must be a non-empty 2-D matrix')
        if not np.isfinite(entries).all():
            raise DataError('Ground cost contains NaN or infinite entries')
        if (entries < 0).any():
            raise DataError('Ground cost contains negative entries')
        self.entries = _frozen(entries)
        self.metric_kind = validate_metric(metric_kind)

    @property
    def shape(self):
        return self.entries.shape

    @property
    def max(self):
        """The largest entry, ||C||_inf"""
        return float(self.entries.max())

    def rows(self, indices):
        """The cost restricted to the source rows `indices`, in that order"""
        return GroundCost(self.entries[np.asarray(indices, dtype=int)],
                          self.metric_kind)


class SimilarityMatrix(object):
    """An m x n matrix of non-negative similarities S = beta - C"""

    def __init__(self, entries, beta=None):
        """

        Args:
            entries (array-like): m x n non-negative finite similarities
            beta (float, optional): the offset used to build the matrix from a
                ground cost, if any
        """
        entries = np.array(entries, dtype=float)
        if entries.ndim != 2 or 0 in entries.shape:
            raise SimilarityError('A similarity matrix must be a non-empty '
                                  '2-D matrix')
        if not np.isfinite(entries).all():
            raise SimilarityError('Similarity matrix contains NaN or infinite '
                                  'entries')
        if (entries < 0).any():
            raise SimilarityError('Similarity matrix contains negative entries')
        self.entries = _frozen(entries)
        self.beta = None if beta is None else float(beta)

    @property
    def shape(self):
        return self.entries.shape

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    @property
    def is_square(self):
        return self.m == self.n


class SimplexWeights(object):
    """A point on the probability simplex"""

    def __init__(self, values):
        """

        Args:
            values (array-like): non-negative entries summing to one
        """
        values = np.array(values, dtype=float).reshape(-1)
        if values.size == 0:
            raise SimplexError('Simplex weights cannot be empty')
        if not np.isfinite(values).all() or (values < 0).any():
            raise SimplexError('Simplex weights must be finite and '
                               'non-negative')
        if abs(values.sum() - 1) > settings.simplex_tol:
            raise SimplexError('Simplex weights sum to {!r}, not 1'.format(
                float(values.sum())))
        self.values = _frozen(values)

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return 'SimplexWeights({})'.format(self.values.tolist())

    @classmethod
    def from_masses(cls, masses):
        """Normalizes a non-negative vector with a positive sum"""
        masses = np.array(masses, dtype=float).reshape(-1)
        if (masses < 0).any() or not masses.sum() > 0:
            raise SimplexError('Cannot normalize masses with a non-positive '
                               'sum or negative entries')
        return cls(masses / masses.sum())


def as_weights(q):
    """Returns `q` as SimplexWeights (array-likes are validated)"""
    if isinstance(q, SimplexWeights):
        return q
    return SimplexWeights(q)


def _to_reals(df):
    """Float64 values of a frame of text cells, NaN where a cell is not a
    number. Parses with float() so that 17-digit decimals round exactly."""
    stripped = df.apply(lambda col: col.str.strip())
    try:
        return stripped.astype(float).values
    except ValueError:
        return stripped.apply(
            lambda col: pd.to_numeric(col, errors='coerce')).values.astype(
            float)


def load_dataset(path, format='csv', label_column=None, name=None):
    """Reads a Dataset from a CSV file with a header row.

    Every column except `label_column` is parsed as a 64-bit real feature.
    Row order is preserved.

    Args:
        path (str): path of the CSV file (comma-delimited, UTF-8)
        format (str): only 'csv' is supported
        label_column (str, optional): name of the column holding the labels
        name (str, optional): tag of the Dataset. Defaults to the file name.

    Returns:
        Dataset: the parsed dataset

    Raises:
        DataError: missing file, empty file, ragged rows, non-numeric or
            non-finite feature cells, or absent label column
    """
    if format != 'csv':
        raise DataError('Unsupported dataset format "{}"'.format(format))
    if not os.path.isfile(path):
        raise DataError('File {} does not exist'.format(path))
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    start_time = time.time()

    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False,
                         na_filter=False, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise DataError('{}: no data rows'.format(path))
    except pd.errors.ParserError as e:
        raise DataError('{}: ragged rows ({})'.format(
            path, str(e).strip().splitlines()[-1]))
    if df.empty:
        raise DataError('{}: no data rows'.format(path))
    ragged = df.isna().any(axis=1)
    if ragged.any():
        raise DataError('{}: ragged row {}'.format(
            path, int(np.flatnonzero(ragged.values)[0]) + 1))

    labels = None
    if label_column is not None:
        if label_column not in df.columns:
            raise DataError('{}: label column "{}" not found'.format(
                path, label_column))
        labels = df.pop(label_column).values
    if df.shape[1] == 0:
        raise DataError('{}: no feature columns'.format(path))

    features = _to_reals(df)
    for col_index, column in enumerate(df.columns):
        bad = ~np.isfinite(features[:, col_index])
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataError('{}: non-numeric or non-finite value {!r} in row '
                            '{} column "{}"'.format(path, df[column].iloc[row],
                                                    row + 1, column))

    log('Loaded {} rows x {} features from {} in {:,.2f} seconds'.format(
        features.shape[0], features.shape[1], os.path.basename(path),
        time.time() - start_time), lg.DEBUG)
    return Dataset(features, labels, name=name)


def write_dataset(dataset, path, label_column='label'):
    """Writes `dataset` as a CSV readable by :func:`load_dataset`.

    Args:
        dataset (Dataset): the dataset to write
        path (str): destination file
        label_column (str): header of the label column, if labels are present
    """
    df = pd.DataFrame(dataset.points,
                      columns=['f{}'.format(i + 1) for i in range(dataset.d)])
    if dataset.labels is not None:
        df[label_column] = dataset.labels
    folder = os.path.dirname(path)
    if folder and not os.path.isdir(folder):
        os.makedirs(folder)
    df.to_csv(path, index=False, float_format='%.17g', encoding='utf-8')


def load_cost_matrix(path):
    """Reads a precomputed m x n cost matrix (CSV, no header).

    Args:
        path (str): path of the CSV file

    Returns:
        GroundCost: with metric_kind 'precomputed'
    """
    if not os.path.isfile(path):
        raise DataError('File {} does not exist'.format(path))
    try:
        df = pd.read_csv(path, header=None, dtype=str, keep_default_na=False,
                         na_filter=False)
    except pd.errors.EmptyDataError:
        raise DataError('{}: no data rows'.format(path))
    except pd.errors.ParserError as e:
        raise DataError('{}: ragged rows ({})'.format(
            path, str(e).strip().splitlines()[-1]))
    if df.isna().values.any():
        raise DataError('{}: ragged rows'.format(path))
    entries = _to_reals(df)
    if not np.isfinite(entries).all():
        row, col = np.argwhere(~np.isfinite(entries))[0]
        raise DataError('{}: non-numeric or non-finite value {!r} in row {} '
                        'column {}'.format(path, df.iat[row, col], row + 1,
                                           col + 1))
    return GroundCost(entries, 'precomputed')


def compute_ground_cost(source, target, metric_kind=None):
    """Pairwise costs between the points of two datasets.

    Args:
        source (Dataset): the m source points
        target (Dataset): the n target points
        metric_kind (str): 'squared_euclidean' (default), 'euclidean',
            'manhattan' or 'cosine_distance'

    Returns:
        GroundCost: entries[i, j] = metric(x_i, y_j)
    """
    if metric_kind is None:
        metric_kind = settings.default_metric
    validate_metric(metric_kind)
    if metric_kind == 'precomputed':
        raise DataError('A precomputed cost is loaded with load_cost_matrix, '
                        'not computed')
    if source.d != target.d:
        raise DataError('Dimension mismatch: source has d={}, target has '
                        'd={}'.format(source.d, target.d))
    if metric_kind == 'cosine_distance':
        for dataset in (source, target):
            if (np.linalg.norm(dataset.points, axis=1) == 0).any():
                raise DataError('Cosine distance is undefined for the zero '
                                'vectors of "{}"'.format(dataset.name))

    entries = cdist(source.points, target.points,
                    metric=_cdist_metrics[metric_kind])
    if metric_kind == 'cosine_distance':
        # round-off around identical directions
        entries[np.abs(entries) < 1e-12] = 0.0
    return GroundCost(np.maximum(entries, 0.0), metric_kind)


def to_similarity(cost, beta=None):
    """Turns a ground cost into a similarity, S = beta - C.

    Args:
        cost (GroundCost): the ground cost
        beta (float, optional): must exceed max(C). Defaults to
            max(C) + settings.beta_margin.

    Returns:
        SimilarityMatrix: strictly positive similarities
    """
    if beta is None:
        beta = cost.max + settings.beta_margin
    elif not beta > cost.max:
        raise SimilarityError('beta={!r} must exceed the largest cost '
                              '{!r}'.format(beta, cost.max))
    entries = beta - cost.entries
    if cost.entries.size and not entries.min() > 0:
        # max(C) + margin rounds back to max(C) for very large costs
        raise SimilarityError('beta={!r} does not keep every similarity '
                              'positive for the largest cost {!r}; pass an '
                              'explicit beta'.format(beta, cost.max))
    return SimilarityMatrix(entries, beta=beta)


def uniform_weights(n):
    """The uniform point of the n-simplex, every entry 1/n"""
    if int(n) != n or n < 1:
        raise SimplexError('Uniform weights need n >= 1, got {!r}'.format(n))
    return SimplexWeights(np.full(int(n), 1.0 / n))


def normalize_features(dataset):
    """Scales every feature vector to unit L2 norm.

    Args:
        dataset (Dataset): the dataset to normalize

    Returns:
        Dataset: same labels and name, unit-norm points
    """
    norms = np.linalg.norm(dataset.points, axis=1)
    if (norms == 0).any():
        raise DataError('Cannot normalize the zero vectors of "{}"'.format(
            dataset.name))
    return Dataset(dataset.points / norms[:, None], dataset.labels,
                   name=dataset.name)


def make_blobs_dataset(n_classes=5, n_per_class=100, n_features=10,
                       separation=6.0, seed=None, name='blobs'):
    """Isotropic Gaussian blobs with unit standard deviation.

    Class means are pairwise `separation` apart: mean_c = separation / sqrt(2)
    times the c-th basis vector.

    Args:
        n_classes (int): number of classes, at most n_features
        n_per_class (int): points drawn per class
        n_features (int): dimension d
        separation (float): distance between any two class means, in units of
            the blob standard deviation
        seed (int, optional): random seed
        name (str): tag of the Dataset

    Returns:
        Dataset: labels are the integers 0..n_classes-1
    """
    if n_classes > n_features:
        raise DataError('{} classes cannot have pairwise equidistant means in '
                        '{} dimensions'.format(n_classes, n_features))
    centers = np.zeros((n_classes, n_features))
    centers[np.arange(n_classes), np.arange(n_classes)] = \
        separation / math.sqrt(2)
    points, labels = make_blobs(n_samples=[n_per_class] * n_classes,
                                n_features=n_features, centers=centers,
                                cluster_std=1.0, random_state=seed)
    return Dataset(points, labels, name=name)
