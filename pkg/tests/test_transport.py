import numpy as np
import pytest
from scipy.optimize import linprog

import prototypal as pt
from tests.conftest import random_weights


def _problem(cost, p, q):
    return pt.OtProblem(pt.GroundCost(cost), pt.SimplexWeights(p),
                        pt.SimplexWeights(q))


def _lp_optimum(cost, p, q):
    k, n = cost.shape
    a_eq = np.zeros((k + n, k * n))
    for i in range(k):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        a_eq[k + j, j::n] = 1.0
    lp = linprog(cost.ravel(), A_eq=a_eq, b_eq=np.concatenate([p, q]),
                 bounds=(0, None), method='highs')
    return lp.fun


def _two_by_two_vertices(p, q):
    """The 2 x 2 transport polytope is a segment parametrized by gamma_00"""
    low = max(0.0, p[0] - q[1])
    high = min(p[0], q[0])
    return [np.array([[t, p[0] - t], [q[0] - t, q[1] - p[0] + t]])
            for t in (low, high)]


def test_single_row_plan():
    cost = np.array([[1.0, 3.0, 2.0]])
    q = [0.2, 0.3, 0.5]
    plan = pt.solve_exact(_problem(cost, [1.0], q))
    np.testing.assert_allclose(plan.entries, [q])
    assert plan.metadata['objective'] == pytest.approx(0.2 + 0.9 + 1.0)


def test_canonical_two_by_two():
    plan = pt.solve_exact(_problem([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5],
                                   [0.5, 0.5]))
    np.testing.assert_allclose(plan.entries, [[0.5, 0], [0, 0.5]])
    assert plan.metadata['objective'] == 0.0


def test_constant_cost():
    p, q = [0.3, 0.7], [0.1, 0.6, 0.3]
    plan = pt.solve_exact(_problem(np.full((2, 3), 2.0), p, q))
    np.testing.assert_allclose(plan.row_sums, p, atol=1e-12)
    np.testing.assert_allclose(plan.column_sums, q, atol=1e-12)
    assert plan.metadata['objective'] == pytest.approx(2.0)


def test_exact_matches_vertex_enumeration_on_two_by_two(rng):
    for _ in range(200):
        cost = rng.random((2, 2))
        p, q = random_weights(rng, 2).values, random_weights(rng, 2).values
        best = min(np.sum(cost * v) for v in _two_by_two_vertices(p, q))
        plan = pt.solve_exact(_problem(cost, p, q))
        assert plan.metadata['objective'] == pytest.approx(best, abs=1e-12)


def test_exact_matches_linear_programming(rng):
    for _ in range(50):
        k, n = rng.integers(1, 6, size=2)
        cost = rng.random((k, n)) * 10
        p, q = random_weights(rng, k).values, random_weights(rng, n).values
        plan = pt.solve_exact(_problem(cost, p, q))
        assert plan.metadata['objective'] == pytest.approx(
            _lp_optimum(cost, p, q), abs=1e-9)
        assert plan.metadata['marginal_violation'] < 1e-9
        assert plan.nnz <= k + n - 1


def test_exact_degenerate_marginals():
    # equal partial sums make the north-west corner degenerate
    cost = np.array([[4.0, 1.0, 3.0], [2.0, 5.0, 1.0], [1.0, 2.0, 6.0]])
    p = q = [1 / 3, 1 / 3, 1 / 3]
    plan = pt.solve_exact(_problem(cost, p, q))
    assert plan.metadata['objective'] == pytest.approx(
        _lp_optimum(cost, np.array(p), np.array(q)), abs=1e-12)


def test_exact_is_deterministic(rng):
    cost = rng.random((4, 5))
    p, q = random_weights(rng, 4), random_weights(rng, 5)
    first = pt.solve_exact(pt.OtProblem(cost, p, q))
    second = pt.solve_exact(pt.OtProblem(cost, p, q))
    np.testing.assert_array_equal(first.entries, second.entries)


def test_exact_size_guard():
    problem = _problem(np.ones((21, 20)), np.full(21, 1 / 21),
                       np.full(20, 1 / 20))
    with pytest.raises(pt.TransportError):
        pt.solve_exact(problem)


def test_problem_shape_mismatch():
    with pytest.raises(pt.TransportError):
        _problem(np.ones((2, 2)), [1.0], [0.5, 0.5])


def test_sinkhorn_constant_cost():
    p, q = [0.3, 0.7], [0.1, 0.6, 0.3]
    plan = pt.solve_sinkhorn(_problem(np.full((2, 3), 2.0), p, q),
                             pt.SinkhornConfig(1.0))
    np.testing.assert_allclose(plan.entries, np.outer(p, q), atol=1e-15)
    assert plan.metadata['converged']


def test_sinkhorn_singleton_source():
    q = [0.2, 0.3, 0.5]
    plan = pt.solve_sinkhorn(_problem([[1.0, 7.0, 2.0]], [1.0], q),
                             pt.SinkhornConfig(0.5))
    np.testing.assert_allclose(plan.entries, [q], atol=1e-12)


def test_sinkhorn_small_reg_approaches_exact():
    cost = [[0.0, 1.0], [1.0, 0.0]]
    problem = _problem(cost, [0.5, 0.5], [0.5, 0.5])
    plan = pt.solve_sinkhorn(problem, pt.SinkhornConfig(0.01))
    assert plan.metadata['solver'] == 'sinkhorn_log'
    assert plan.metadata['row_violation'] < 1e-6
    assert plan.metadata['col_violation'] < 1e-6
    assert plan.cost(cost) == pytest.approx(0.0, abs=1e-3)


def test_sinkhorn_is_not_below_exact(rng):
    for _ in range(20):
        cost = rng.random((4, 6))
        p, q = random_weights(rng, 4), random_weights(rng, 6)
        problem = pt.OtProblem(cost, p, q)
        exact = pt.solve_exact(problem)
        for reg in (0.1, 0.5, 5.0):
            plan = pt.solve_sinkhorn(problem, pt.SinkhornConfig(reg,
                                                                tol=1e-11))
            assert np.all(plan.entries > 0)
            assert exact.metadata['objective'] <= \
                plan.metadata['objective'] + 1e-9


def test_sinkhorn_default_config():
    config = pt.SinkhornConfig.for_cost(pt.GroundCost([[0.0, 4.0]]))
    assert config.reg == pytest.approx(0.4)
    assert config.max_iters == pt.settings.sinkhorn_max_iters
    assert pt.SinkhornConfig.for_cost(pt.GroundCost([[0.0]])).reg == 1.0


def test_sinkhorn_zero_mass_rows():
    cost = [[1.0, 2.0], [0.5, 0.1], [3.0, 1.0]]
    plan = pt.solve_sinkhorn(_problem(cost, [0.5, 0.0, 0.5], [0.5, 0.5]))
    np.testing.assert_array_equal(plan.entries[1], [0.0, 0.0])
    np.testing.assert_allclose(plan.row_sums, [0.5, 0.0, 0.5], atol=1e-6)


def test_sinkhorn_non_convergence_is_flagged(rng):
    cost = rng.random((5, 5))
    problem = pt.OtProblem(cost, random_weights(rng, 5),
                           random_weights(rng, 5))
    log_console = pt.settings.log_console
    pt.settings.log_console = True
    try:
        with pytest.warns(UserWarning, match='did not converge'):
            plan = pt.solve_sinkhorn(problem, pt.SinkhornConfig(
                0.01, max_iters=1, tol=1e-15))
    finally:
        pt.settings.log_console = log_console
    assert not plan.metadata['converged']
    assert plan.metadata['iterations'] == 1


def test_sinkhorn_underflow_advises_larger_reg():
    problem = _problem([[1e6, 2e6], [2e6, 1e6]], [0.5, 0.5], [0.5, 0.5])
    # plain scaling, every kernel entry underflows
    threshold = pt.settings.sinkhorn_log_threshold
    pt.settings.sinkhorn_log_threshold = 0.0
    try:
        with pytest.raises(pt.TransportError, match='larger reg'):
            pt.solve_sinkhorn(problem, pt.SinkhornConfig(1.0))
    finally:
        pt.settings.sinkhorn_log_threshold = threshold


@pytest.mark.parametrize('kwargs', [{'reg': 0.0}, {'reg': 1.0, 'tol': 0.0},
                                    {'reg': 1.0, 'max_iters': 0}])
def test_sinkhorn_config_errors(kwargs):
    with pytest.raises(pt.TransportError):
        pt.SinkhornConfig(**kwargs)


def test_barycentric_map():
    target = pt.Dataset([[0.0, 0.0], [2.0, 0.0]])
    plan = pt.TransportPlan([[0.25, 0.25], [0.0, 0.3], [0.0, 0.0]])
    images = pt.barycentric_map(plan, target)
    np.testing.assert_allclose(images[0], [1.0, 0.0])
    np.testing.assert_allclose(images[1], [2.0, 0.0])
    assert images[2] is pt.UNMAPPED


def test_barycentric_images_in_convex_hull(rng):
    target = pt.Dataset(rng.random((6, 2)))
    plan = pt.solve_sinkhorn(pt.OtProblem(rng.random((3, 6)),
                                          random_weights(rng, 3),
                                          pt.uniform_weights(6)))
    for image in pt.barycentric_map(plan, target):
        assert np.all(image >= target.points.min(axis=0) - 1e-12)
        assert np.all(image <= target.points.max(axis=0) + 1e-12)


def test_barycentric_map_shape_mismatch():
    with pytest.raises(pt.TransportError):
        pt.barycentric_map(pt.TransportPlan([[1.0]]),
                           pt.Dataset([[0.0], [1.0]]))


def test_plan_json_shape():
    plan = pt.solve_exact(_problem([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.5],
                                   [0.5, 0.5]))
    data = plan.to_dict()
    assert data['row'] == [0, 1] and data['col'] == [0, 1]
    assert data['value'] == [0.5, 0.5]
    assert data['metadata']['solver'] == 'transportation_simplex'
    assert set(data['metadata']) >= {'objective', 'marginal_violation',
                                     'solver', 'reg'}
