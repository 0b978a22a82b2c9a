import os

import numpy as np
import pytest

import prototypal as pt


def test_load_dataset(config, toy_pair):
    source, target = toy_pair
    assert source.m == 10 and source.d == 2
    assert source.classes == ['a', 'b']
    np.testing.assert_array_equal(source.points[1], [0.5, 0.1])
    assert source.name == 'toy_source'


def test_load_dataset_without_label_column_reads_every_column():
    dataset = pt.load_dataset('tests/input_data/outlier.csv')
    assert dataset.labels is None
    assert dataset.points.shape == (5, 1)


@pytest.mark.parametrize('path', ['tests/input_data/ragged.csv',
                                  'tests/input_data/non_numeric.csv',
                                  'tests/input_data/does_not_exist.csv'])
def test_load_dataset_errors(path):
    with pytest.raises(pt.DataError):
        pt.load_dataset(path)


def test_non_numeric_error_names_row_and_column():
    with pytest.raises(pt.DataError, match='row 2 column "f2"'):
        pt.load_dataset('tests/input_data/non_numeric.csv')


def test_missing_label_column():
    with pytest.raises(pt.DataError, match='label column'):
        pt.load_dataset('tests/input_data/outlier.csv', label_column='label')


def test_write_dataset_reloads(config, toy_pair):
    source, _ = toy_pair
    path = os.path.join(pt.settings.data_folder, 'toy_copy.csv')
    pt.write_dataset(source, path)
    again = pt.load_dataset(path, label_column='label')
    np.testing.assert_array_equal(again.points, source.points)
    assert list(again.labels) == list(source.labels)


def test_seventeen_digit_decimals_round_exactly(config):
    folder = pt.settings.data_folder
    if not os.path.isdir(folder):
        os.makedirs(folder)
    path = os.path.join(folder, 'decimals.csv')
    with open(path, 'w') as f:
        f.write('f1,f2\n0.59999999999999998, 0.1\n2.5,1e-3\n')
    dataset = pt.load_dataset(path)
    assert dataset.points[0, 0] == 0.6
    assert dataset.points[1, 1] == 0.001

    path = os.path.join(folder, 'decimals_cost.csv')
    with open(path, 'w') as f:
        f.write('0.59999999999999998,1\n2,0.30000000000000004\n')
    cost = pt.load_cost_matrix(path)
    assert cost.entries[0, 0] == 0.6
    assert cost.entries[1, 1] == 0.1 + 0.2


def test_dataset_rejects_non_finite():
    with pytest.raises(pt.DataError):
        pt.Dataset([[0.0, np.nan]])
    with pytest.raises(pt.DataError):
        pt.Dataset([[0.0], [1.0]], labels=['a'])


def test_load_cost_matrix():
    cost = pt.load_cost_matrix('tests/input_data/cost_2x2.csv')
    np.testing.assert_array_equal(cost.entries, [[2, 4], [3, 1]])
    assert cost.metric_kind == 'precomputed'
    similarity = pt.to_similarity(cost, beta=5)
    np.testing.assert_array_equal(similarity.entries, [[3, 1], [2, 4]])


@pytest.mark.parametrize('metric_kind, expected', [
    ('squared_euclidean', 25.0),
    ('euclidean', 5.0),
    ('manhattan', 7.0),
])
def test_compute_ground_cost(metric_kind, expected):
    source = pt.Dataset([[0.0, 0.0]])
    target = pt.Dataset([[3.0, 4.0]])
    cost = pt.compute_ground_cost(source, target, metric_kind)
    assert cost.entries[0, 0] == pytest.approx(expected)


@pytest.mark.parametrize('metric_kind', ['squared_euclidean', 'euclidean',
                                         'manhattan', 'cosine_distance'])
def test_ground_cost_of_a_dataset_with_itself(rng, metric_kind):
    dataset = pt.Dataset(rng.random((12, 3)) + 0.1)
    cost = pt.compute_ground_cost(dataset, dataset, metric_kind)
    np.testing.assert_allclose(np.diag(cost.entries), 0.0, atol=1e-12)
    np.testing.assert_allclose(cost.entries, cost.entries.T, atol=1e-12)

    similarity = pt.to_similarity(cost)
    assert similarity.entries.min() > 0
    np.testing.assert_array_equal(similarity.entries.argmin(axis=0),
                                  cost.entries.argmax(axis=0))
    np.testing.assert_array_equal(similarity.entries.argmax(axis=0),
                                  cost.entries.argmin(axis=0))


def test_cosine_distance():
    source = pt.Dataset([[1.0, 0.0], [2.0, 0.0]])
    target = pt.Dataset([[3.0, 0.0], [0.0, 1.0]])
    cost = pt.compute_ground_cost(source, target, 'cosine_distance')
    np.testing.assert_allclose(cost.entries, [[0, 1], [0, 1]], atol=1e-12)
    with pytest.raises(pt.DataError):
        pt.compute_ground_cost(pt.Dataset([[0.0, 0.0]]), target,
                               'cosine_distance')


def test_ground_cost_errors():
    with pytest.raises(pt.DataError, match='Dimension mismatch'):
        pt.compute_ground_cost(pt.Dataset([[0.0, 0.0]]), pt.Dataset([[0.0]]))
    with pytest.raises(pt.DataError):
        pt.compute_ground_cost(pt.Dataset([[0.0]]), pt.Dataset([[0.0]]),
                               'hamming')
    with pytest.raises(pt.DataError):
        pt.GroundCost([[-1.0]])


def test_default_beta_gives_positive_similarity():
    cost = pt.GroundCost([[0.0, 2.0], [1.0, 0.5]])
    similarity = pt.to_similarity(cost)
    assert similarity.beta == 3.0
    assert similarity.entries.min() == 1.0


def test_default_beta_rejects_costs_beyond_float_resolution():
    cost = pt.GroundCost([[0.0, 1e17], [1e17, 0.0]])
    with pytest.raises(pt.SimilarityError, match='explicit beta'):
        pt.to_similarity(cost)
    similarity = pt.to_similarity(cost, beta=2e17)
    assert similarity.entries.min() > 0


def test_beta_must_exceed_max_cost():
    cost = pt.GroundCost([[0.0, 2.0]])
    with pytest.raises(pt.SimilarityError):
        pt.to_similarity(cost, beta=2.0)


def test_similarity_errors():
    with pytest.raises(pt.SimilarityError):
        pt.SimilarityMatrix([[1.0, -0.5]])
    with pytest.raises(pt.SimilarityError):
        pt.SimilarityMatrix([[np.inf]])


def test_simplex_weights():
    w = pt.SimplexWeights([0.25, 0.75])
    assert len(w) == 2
    with pytest.raises(pt.SimplexError):
        pt.SimplexWeights([0.5, 0.6])
    with pytest.raises(pt.SimplexError):
        pt.SimplexWeights([1.5, -0.5])
    np.testing.assert_allclose(pt.SimplexWeights.from_masses([1, 3]).values,
                               [0.25, 0.75])
    np.testing.assert_allclose(pt.uniform_weights(4).values, 0.25)


def test_normalize_features():
    dataset = pt.normalize_features(pt.Dataset([[3.0, 4.0], [0.0, 2.0]]))
    np.testing.assert_allclose(np.linalg.norm(dataset.points, axis=1), 1.0)
    with pytest.raises(pt.DataError):
        pt.normalize_features(pt.Dataset([[0.0, 0.0]]))


def test_make_blobs_dataset():
    dataset = pt.make_blobs_dataset(n_classes=3, n_per_class=20,
                                    n_features=4, seed=0)
    assert dataset.m == 60 and dataset.d == 4
    assert dataset.classes == [0, 1, 2]
    again = pt.make_blobs_dataset(n_classes=3, n_per_class=20, n_features=4,
                                  seed=0)
    np.testing.assert_array_equal(dataset.points, again.points)
