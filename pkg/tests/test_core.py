import itertools
import math
import os

import numpy as np
import pytest
from scipy.optimize import linprog

import prototypal as pt
from tests.conftest import random_similarity, random_weights


def test_objective_of_worked_instance(worked_similarity):
    similarity, q = worked_similarity
    assert pt.objective_of(similarity, q, [0]) == 2.0
    assert pt.objective_of(similarity, q, [1]) == 3.0
    assert pt.objective_of(similarity, q, [1, 0]) == 3.5


def test_objective_of_errors(worked_similarity):
    similarity, q = worked_similarity
    with pytest.raises(pt.SelectionError):
        pt.objective_of(similarity, q, [])
    with pytest.raises(pt.SelectionError):
        pt.objective_of(similarity, q, [2])
    with pytest.raises(pt.SimilarityError):
        pt.objective_of(similarity, [1.0], [0])


def test_objective_is_the_restricted_transport_optimum(rng):
    """f(P) is the optimum of the transport problem with free source
    marginals supported on P, checked per column and with an LP solver"""
    for _ in range(100):
        m, n = rng.integers(1, 9, size=2)
        similarity = random_similarity(rng, m, n)
        q = random_weights(rng, n)
        size = rng.integers(1, m + 1)
        indices = sorted(rng.choice(m, size=size, replace=False).tolist())
        value = pt.objective_of(similarity, q, indices)

        # every plan is a choice of split per column; a vertex sends each
        # column to a single row of P
        per_column = sum(q.values[j] * max(similarity.entries[i, j]
                                           for i in indices)
                         for j in range(n))
        assert value == pytest.approx(per_column, abs=1e-12)

        rows = similarity.entries[indices]
        a_eq = np.zeros((n, size * n))
        for j in range(n):
            a_eq[j, j::n] = 1.0
        lp = linprog(-rows.ravel(), A_eq=a_eq, b_eq=q.values,
                     bounds=(0, None), method='highs')
        assert value == pytest.approx(-lp.fun, abs=1e-8)


def test_empty_cache_and_first_gains(worked_similarity):
    similarity, q = worked_similarity
    cache = pt.empty_cache(similarity, q)
    assert cache.objective == 0.0
    assert len(cache) == 0
    assert np.all(np.isfinite(cache.column_max))
    np.testing.assert_array_equal(cache.column_max, [0.0, 0.0])
    np.testing.assert_array_equal(cache.column_argmax, [-1, -1])
    np.testing.assert_allclose(pt.incremental_gains(cache, [0, 1]), [2, 3])


def test_incremental_gains_after_selection(worked_similarity):
    similarity, q = worked_similarity
    cache = pt.extend_cache(pt.empty_cache(similarity, q), [1])
    assert cache.objective == 3.0
    np.testing.assert_allclose(pt.incremental_gains(cache, [0]), [0.5])
    with pytest.raises(pt.SelectionError):
        pt.incremental_gains(cache, [1])


def test_extend_cache_matches_recomputation(rng):
    for _ in range(100):
        m, n = rng.integers(2, 30), rng.integers(1, 30)
        similarity = random_similarity(rng, m, n)
        q = random_weights(rng, n)
        order = rng.permutation(m)
        cut = rng.integers(0, m)
        stop = rng.integers(cut + 1, m + 1)
        base, added = order[:cut].tolist(), order[cut:stop].tolist()

        cache = pt.extend_cache(pt.empty_cache(similarity, q), base)
        extended = pt.extend_cache(cache, added)
        indices = base + added
        rows = similarity.entries[indices]
        np.testing.assert_allclose(extended.column_max, rows.max(axis=0),
                                   rtol=0, atol=1e-12)
        assert extended.objective == pytest.approx(
            pt.objective_of(similarity, q, indices), abs=1e-12)
        assert extended.current_set == tuple(indices)
        # column argmax is the lowest source index attaining the maximum
        for j in range(n):
            best = min(i for i in indices if
                       similarity.entries[i, j] == rows[:, j].max())
            assert extended.column_argmax[j] == best


def test_extend_cache_leaves_the_input_untouched(worked_similarity):
    similarity, q = worked_similarity
    cache = pt.empty_cache(similarity, q)
    pt.extend_cache(cache, [0])
    assert cache.objective == 0.0 and cache.current_set == ()


def test_plan_for_set_worked_instance(worked_similarity):
    similarity, q = worked_similarity
    plan = pt.plan_for_set(similarity, q, [1, 0])
    np.testing.assert_array_equal(plan.entries, [[0, 0.5], [0.5, 0]])
    assert plan.row_index_map == (1, 0)
    assert plan.metadata['objective'] == 3.5
    weights = pt.weights_from_plan(plan, q)
    np.testing.assert_array_equal(weights.values, [0.5, 0.5])


def test_plan_for_set_ties_go_to_lowest_index():
    similarity = pt.SimilarityMatrix([[1.0, 2.0], [1.0, 2.0]])
    plan = pt.plan_for_set(similarity, [0.5, 0.5], [1, 0])
    # rows follow the given order, the mass goes to source 0 (row 1)
    np.testing.assert_array_equal(plan.entries, [[0, 0], [0.5, 0.5]])


def test_prototypes_keep_zero_weight_members():
    similarity = pt.SimilarityMatrix([[5.0, 5.0], [1.0, 1.0]])
    prototypes = pt.prototypes_from_indices(similarity, [0.5, 0.5], [0, 1])
    np.testing.assert_array_equal(prototypes.weights.values, [1.0, 0.0])
    assert prototypes.indices == (0, 1)


def test_plan_columns_sum_to_q(rng):
    for _ in range(20):
        similarity = random_similarity(rng, 6, 7)
        q = random_weights(rng, 7)
        plan = pt.plan_for_set(similarity, q, [4, 2, 5])
        np.testing.assert_allclose(plan.column_sums, q.values, atol=1e-12)
        assert plan.nnz <= 7


def test_weights_from_plan_checks_q():
    plan = pt.TransportPlan([[0.5, 0.0], [0.0, 0.5]])
    with pytest.raises(pt.SimplexError):
        pt.weights_from_plan(plan, [0.25, 0.75])


def test_prototype_set_validation(worked_similarity):
    similarity, q = worked_similarity
    with pytest.raises(pt.SelectionError):
        pt.PrototypeSet([0, 0], [0.5, 0.5])
    plan = pt.plan_for_set(similarity, q, [0, 1])
    with pytest.raises(pt.TransportError):
        pt.PrototypeSet([1, 0], [0.5, 0.5], plan=plan)
    with pytest.raises(pt.SelectionError):
        pt.PrototypeSet([0], [0.5, 0.5])


def test_prototypes_json(config, worked_similarity):
    similarity, q = worked_similarity
    prototypes = pt.prototypes_from_indices(similarity, q, [1, 0])
    path = os.path.join(pt.settings.data_folder, 'prototypes.json')
    pt.write_prototypes(prototypes, path, method='spot_greedy')
    again = pt.read_prototypes(path)
    assert again.indices == (1, 0)
    assert again.objective == 3.5
    np.testing.assert_array_equal(again.plan.entries, prototypes.plan.entries)
    assert again.plan.metadata['solver'] == 'sparse_support'


def _f(similarity, q, indices):
    if not indices:
        return 0.0
    return pt.objective_of(similarity, q, indices)


def test_monotone_and_submodular(rng):
    for _ in range(1000):
        m, n = rng.integers(2, 10), rng.integers(1, 8)
        similarity = random_similarity(rng, m, n)
        q = random_weights(rng, n)
        order = rng.permutation(m)
        b_size = rng.integers(0, m)
        a_size = rng.integers(0, b_size + 1)
        a, b = order[:a_size].tolist(), order[:b_size].tolist()
        i = int(order[b_size])
        gain_a = _f(similarity, q, a + [i]) - _f(similarity, q, a)
        gain_b = _f(similarity, q, b + [i]) - _f(similarity, q, b)
        assert gain_b >= -1e-12
        assert gain_a - gain_b >= -1e-12


@pytest.mark.parametrize('s', [1, 2, 3, 5])
def test_submodularity_ratio_bounds(rng, s):
    for _ in range(50):
        m, n = rng.integers(s + 1, 12), rng.integers(1, 10)
        similarity = random_similarity(rng, m, n)
        q = random_weights(rng, n)
        order = rng.permutation(m).tolist()
        base_size = rng.integers(0, m - s + 1)
        base, added = order[:base_size], order[base_size:base_size + s]
        alpha = pt.submodularity_ratio(similarity, q, base, added)
        assert 1.0 - 1e-9 <= alpha <= s + 1e-9


def test_submodularity_ratio_without_gain():
    similarity = pt.SimilarityMatrix([[2.0, 2.0], [1.0, 1.0], [1.0, 1.0]])
    assert pt.submodularity_ratio(similarity, [0.5, 0.5], [0], [1, 2]) == 1.0


def test_greedy_guarantee():
    assert pt.greedy_guarantee(1) == pytest.approx(1 - math.exp(-1))
    assert pt.greedy_guarantee(2) == pytest.approx(1 - math.exp(-0.5))
    with pytest.raises(pt.SelectionError):
        pt.greedy_guarantee(0)


def test_transport_plan_validation():
    with pytest.raises(pt.TransportError):
        pt.TransportPlan([[-0.1, 1.1]])
    with pytest.raises(pt.TransportError):
        pt.TransportPlan([[1.0]], row_index_map=[0, 1])


def test_exhaustive_small_instance_agrees_with_objective(worked_similarity):
    similarity, q = worked_similarity
    values = {subset: pt.objective_of(similarity, q, subset)
              for size in (1, 2)
              for subset in itertools.combinations(range(2), size)}
    assert values == {(0,): 2.0, (1,): 3.0, (0, 1): 3.5}
