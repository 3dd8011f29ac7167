import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hingegap import objective as O
from hingegap.dataio import SparseDataset
from hingegap.objective import DualPoint, PrimalModel
from hingegap.projection import SeparableQpProblem, solve_separable_qp

import oracles

ONE = SparseDataset.from_arrays(np.array([[1.0]]), np.array([1.0]))


def test_empirical_risk_examples(rng):
    ds = oracles.dense_dataset(rng, 6, 3)
    assert O.empirical_risk(PrimalModel(np.zeros(3), 1.0), ds) == 1.0
    pair = SparseDataset.from_arrays(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([1.0, -1.0]))
    assert O.empirical_risk(PrimalModel(np.array([1.0, 0.0]), 1.0), pair) == 0.0


def test_empirical_risk_matches_loop(rng):
    ds = oracles.dense_dataset(rng, 15, 4, density=0.7)
    X = ds.X.toarray()
    for _ in range(20):
        w, b = rng.normal(size=4), rng.normal()
        loop = np.mean([max(0.0, 1 - ds.y[i] * (X[i] @ w + b)) for i in range(ds.n)])
        assert O.empirical_risk(PrimalModel(w, 0.7, bias=b), ds) == pytest.approx(loop, abs=1e-14)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        O.empirical_risk(PrimalModel(np.zeros(2), 1.0), ONE)
    with pytest.raises(ValueError):
        O.adjoint_objective(np.zeros(2), ONE, 1.0)
    with pytest.raises(ValueError):
        PrimalModel(np.zeros(1), 0.0)


def test_optimal_bias_symmetric_pair():
    pair = SparseDataset.from_arrays(np.array([[2.0], [-2.0]]), np.array([1.0, -1.0]))
    assert O.optimal_bias(np.array([0.3]), pair) == 0.0


def test_optimal_bias_all_positive():
    ds = SparseDataset.from_arrays(np.eye(3), np.ones(3))
    w = np.zeros(3)
    b = O.optimal_bias(w, ds)
    # every b >= 1 minimizes with value 0; the finite endpoint of that ray is returned
    assert b == 1.0
    assert O.hinge_risk_from_scores(ds.X @ w, ds.y, b) == 0.0
    grid = oracles.bias_grid(ds.X @ w, ds.y)
    assert grid == 0.0


def test_optimal_bias_all_negative():
    ds = SparseDataset.from_arrays(np.array([[0.0], [1.0]]), -np.ones(2))
    w = np.array([1.0])
    b = O.optimal_bias(w, ds)
    # risk is mean([1 + s_i + b]_+), zero for b <= -2
    assert b == -2.0
    assert O.hinge_risk_from_scores(ds.X @ w, ds.y, b) == 0.0


def test_optimal_bias_flat_segment_midpoint():
    # one positive at margin point 1 - s = 0.5, one negative at -1 - s = 1.5:
    # the risk is flat (slope zero) between the two breakpoints
    ds = SparseDataset.from_arrays(np.array([[0.5], [-2.5]]), np.array([1.0, -1.0]))
    b = O.optimal_bias(np.array([1.0]), ds)
    assert b == pytest.approx(1.0)


def test_optimal_bias_grid_oracle(rng):
    for _ in range(30):
        ds = oracles.dense_dataset(rng, 7, 3)
        w = rng.normal(size=3)
        scores = ds.X @ w
        b = O.optimal_bias(w, ds)
        assert O.hinge_risk_from_scores(scores, ds.y, b) == pytest.approx(oracles.bias_grid(scores, ds.y),
                                                                         abs=1e-9)


def test_primal_objective_examples(rng):
    ds = oracles.dense_dataset(rng, 5, 2)
    assert O.primal_objective(PrimalModel(np.zeros(2), 1.0), ds) == 1.0
    assert O.primal_objective(PrimalModel(np.array([1.0]), 1.0), ONE) == 0.5
    X = ds.X.toarray()
    for lam in (0.1, 1.0, 3.0):
        w = rng.normal(size=2)
        assert O.primal_objective(PrimalModel(w, lam), ds) == pytest.approx(
            oracles.dense_primal(w, X, ds.y, lam), abs=1e-13)


def test_adjoint_examples(rng):
    assert O.adjoint_objective(np.zeros(1), ONE, 1.0) == 0.0
    assert O.adjoint_objective(np.ones(1), ONE, 1.0) == 0.5
    ds = oracles.dense_dataset(rng, 5, 3)
    a = rng.uniform(0, 1 / 5, 5)
    assert O.adjoint_objective(a, ds, 0.3) == pytest.approx(oracles.dense_adjoint(a, ds.X.toarray(), ds.y, 0.3),
                                                            rel=1e-13)


def test_adjoint_gradient_examples():
    np.testing.assert_array_equal(O.adjoint_gradient(np.zeros(1), ONE, 1.0), [1.0])
    np.testing.assert_allclose(O.adjoint_gradient(np.array([0.5]), ONE, 1.0), [0.5])


def test_adjoint_gradient_finite_differences(rng):
    for _ in range(20):
        n, d = int(rng.integers(2, 12)), int(rng.integers(1, 6))
        ds = oracles.dense_dataset(rng, n, d)
        lam = float(10 ** rng.uniform(-1, 1))
        a = rng.uniform(0, 1 / n, n)
        g = O.adjoint_gradient(a, ds, lam)
        h = 1e-5
        fd = np.array([(O.adjoint_objective(a + h * e, ds, lam) - O.adjoint_objective(a - h * e, ds, lam)) / (2 * h)
                       for e in np.eye(n)])
        assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_gradient_lipschitz_bound(rng):
    for _ in range(30):
        n, d = int(rng.integers(2, 15)), int(rng.integers(1, 6))
        ds = oracles.dense_dataset(rng, n, d)
        lam = 0.5
        a, b = rng.uniform(0, 1 / n, n), rng.uniform(0, 1 / n, n)
        lhs = np.linalg.norm(O.adjoint_gradient(a, ds, lam) - O.adjoint_gradient(b, ds, lam))
        assert lhs <= (n * ds.r_max**2 / lam) * np.linalg.norm(a - b) * (1 + 1e-12)


def test_w_from_alpha(rng):
    np.testing.assert_array_equal(O.w_from_alpha(np.zeros(1), ONE, 1.0), [0.0])
    np.testing.assert_allclose(O.w_from_alpha(np.ones(1), ONE, 2.0), [0.5])
    ds = oracles.dense_dataset(rng, 6, 3)
    a = rng.uniform(0, 1 / 6, 6)
    np.testing.assert_allclose(O.w_from_alpha(a, ds, 0.4), ds.X.toarray().T @ (ds.y * a) / 0.4, rtol=1e-14)


def test_hinge_cut_examples():
    c = O.hinge_cut(PrimalModel(np.array([5.0]), 1.0), ONE)
    assert c.a.tolist() == [0.0] and c.b == 0.0
    c = O.hinge_cut(PrimalModel(np.array([0.0]), 1.0), ONE)
    assert c.a.tolist() == [-1.0] and c.b == 1.0
    # margin exactly 1 is excluded
    c = O.hinge_cut(PrimalModel(np.array([1.0]), 1.0), ONE)
    assert c.a.tolist() == [0.0] and c.b == 0.0


def test_hinge_cut_lower_bounds_risk(rng):
    ds = oracles.dense_dataset(rng, 20, 4)
    for _ in range(10):
        w = rng.normal(size=4)
        cut = O.hinge_cut(PrimalModel(w, 1.0), ds)
        assert cut(w) == pytest.approx(O.empirical_risk(PrimalModel(w, 1.0), ds), abs=1e-14)
        for _ in range(100):
            v = rng.normal(scale=3.0, size=4)
            assert cut(v) <= O.empirical_risk(PrimalModel(v, 1.0), ds) + 1e-12


def test_duality_gap_examples(rng):
    assert O.duality_gap(PrimalModel(np.array([1.0]), 1.0), DualPoint(np.ones(1)), ONE) == pytest.approx(0.0)
    ds = oracles.dense_dataset(rng, 4, 2)
    assert O.duality_gap(PrimalModel(np.zeros(2), 1.0), DualPoint(np.zeros(4)), ds) == 1.0
    with pytest.raises(ValueError):
        O.duality_gap(PrimalModel(np.zeros(2), 1.0, bias=0.0), DualPoint(np.zeros(4)), ds)


def random_q2(rng, ds, bias):
    a = rng.uniform(0, 1 / ds.n, ds.n)
    if bias:
        p = SeparableQpProblem.build(1.0, a, 0.0, 1 / ds.n, ds.y, 0.0)
        a = solve_separable_qp(p).alpha
    return DualPoint(a, bias)


@pytest.mark.parametrize("bias", [False, True])
def test_weak_duality(rng, bias):
    for _ in range(100):
        n, d = int(rng.integers(2, 20)), int(rng.integers(1, 6))
        labels = rng.choice([-1.0, 1.0], n)
        labels[:2] = [1.0, -1.0]
        ds = oracles.dense_dataset(rng, n, d, labels=labels)
        lam = float(10 ** rng.uniform(-2, 1))
        alpha = random_q2(rng, ds, bias)
        alpha.check(ds)
        model = PrimalModel(rng.normal(size=d), lam, bias=0.0 if bias else None)
        assert O.duality_gap(model, alpha, ds) >= -1e-10


def test_dual_point_check():
    ds = SparseDataset.from_arrays(np.eye(2), np.array([1.0, -1.0]))
    DualPoint(np.array([0.2, 0.2]), True).check(ds)
    with pytest.raises(ValueError):
        DualPoint(np.array([0.2, 0.1]), True).check(ds)
    with pytest.raises(ValueError):
        DualPoint(np.array([0.6, 0.1]), False).check(ds)


def test_bias_identity(rng):
    for _ in range(200):
        n = int(rng.integers(2, 21))
        y = rng.choice([-1.0, 1.0], n)
        y[:2] = [1.0, -1.0]
        a = rng.normal(size=n)
        lhs = oracles.lp_over_q2(a + 1.0, y)
        scores = -y * a
        b = O._bias_from_scores(scores, y)
        rhs = O.hinge_risk_from_scores(scores, y, b)
        assert lhs == pytest.approx(rhs, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=12),
       st.lists(st.sampled_from([-1.0, 1.0]), min_size=2, max_size=12))
def test_bias_is_minimizer(scores, labels):
    k = min(len(scores), len(labels))
    s, y = np.array(scores[:k]), np.array(labels[:k])
    b = O._bias_from_scores(s, y)
    v = O.hinge_risk_from_scores(s, y, b)
    for db in (-1e-3, 1e-3, -0.5, 0.5):
        assert v <= O.hinge_risk_from_scores(s, y, b + db) + 1e-14
