import math

import numpy as np
import pytest

from hingegap import bundle as B
from hingegap import objective as O
from hingegap import pragam as PG
from hingegap.dataio import SparseDataset
from hingegap.errors import NoConvergence
from hingegap.objective import CuttingPlane

import oracles

ONE = SparseDataset.from_arrays(np.array([[1.0]]), np.array([1.0]))


def model_from(A, b, lam):
    m = B.CuttingPlaneModel.empty(A.shape[1], lam)
    for a, off in zip(A, b):
        m = B.add_cut(m, CuttingPlane(a=a, b=off))
    return m


def random_model(rng, t, d=None, lam=None, rank=None):
    d = d or int(rng.integers(1, 8))
    A = rng.normal(size=(t, d))
    if rank is not None and rank < min(t, d):
        A = rng.normal(size=(t, rank)) @ rng.normal(size=(rank, d))
    b = rng.normal(size=t)
    lam = lam or float(10 ** rng.uniform(-2, 1))
    return model_from(A, b, lam)


def test_first_cut_closed_form():
    m = B.add_cut(B.CuttingPlaneModel.empty(3, 2.0), CuttingPlane(a=np.array([1.0, 2.0, 2.0]), b=0.5))
    assert m.t == 1
    np.testing.assert_array_equal(m.alpha, [1.0])
    np.testing.assert_allclose(m.w, [-0.5, -1.0, -1.0])
    assert m.Jt_value == pytest.approx(-9 / 4 + 0.5)
    assert m.model_value(m.w) == pytest.approx(m.Jt_value)


def test_add_cut_pads_and_checks_dimension(rng):
    m = random_model(rng, 3, d=4)
    m = B.resolve(m)
    grown = B.add_cut(m, CuttingPlane(a=np.ones(4), b=0.0))
    np.testing.assert_array_equal(grown.alpha, np.append(m.alpha, 0.0))
    with pytest.raises(ValueError):
        B.add_cut(m, CuttingPlane(a=np.ones(3), b=0.0))


def test_orthonormal_pair():
    m = B.resolve(model_from(np.eye(2), np.zeros(2), 1.0))
    np.testing.assert_allclose(m.alpha, [0.5, 0.5], atol=1e-12)
    assert m.Jt_value == pytest.approx(-0.25, abs=1e-12)


def test_duplicate_cut_keeps_value(rng):
    m = B.resolve(random_model(rng, 4, d=3))
    dup = B.resolve(B.add_cut(m, m.planes[2]))
    assert dup.Jt_value == pytest.approx(m.Jt_value, abs=1e-10)


def test_active_cut_raises_value(rng):
    for _ in range(20):
        m = B.resolve(random_model(rng, 3, d=4))
        a = rng.normal(size=4)
        off = m.model_value(m.w) - float(a @ m.w) + 0.1  # plane lies above the model at w_t
        new = B.resolve(B.add_cut(m, CuttingPlane(a=a, b=off)))
        assert new.Jt_value > m.Jt_value


@pytest.mark.parametrize("t", [1, 2, 3, 4, 5, 6])
def test_matches_support_enumeration(rng, t):
    for k in range(60):
        m = random_model(rng, t, rank=1 if k % 5 == 0 else None)
        w, alpha, val = B.solve_model_qp(m)
        best, _ = oracles.support_enumeration(m.A, m.b, m.lam)
        assert val == pytest.approx(best, abs=1e-8)
        assert np.all(alpha >= 0) and abs(alpha.sum() - 1) <= 1e-12
        np.testing.assert_allclose(w, -m.A.T @ alpha / m.lam, atol=1e-12)
        assert abs(m.model_value(w) - val) <= 1e-8


def test_lower_bound_property(rng):
    ds = oracles.dense_dataset(rng, 30, 4)
    lam = 0.1
    _, model, _ = B.bmrm_loop(lambda v: (O.hinge_risk_from_scores(ds.X @ v, ds.y),
                                         O._cut_from_scores(v, ds.X @ v, ds)), ds.d, lam, eps=1e-3)
    for _ in range(100):
        v = rng.normal(size=4) * 3
        assert model.model_value(v) <= O.primal_objective(O.PrimalModel(w=v, lam=lam), ds) + 1e-12


def test_cut_planes_are_lower_bounds(rng):
    ds = oracles.dense_dataset(rng, 25, 3)
    for _ in range(20):
        w0 = rng.normal(size=3)
        cut = O.hinge_cut(O.PrimalModel(w=w0, lam=1.0), ds)
        for _ in range(20):
            v = rng.normal(size=3) * 2
            assert float(cut.a @ v) + cut.b <= O.empirical_risk(O.PrimalModel(w=v, lam=1.0), ds) + 1e-12


def test_lsbmrm_examples():
    m = B.add_cut(B.CuttingPlaneModel.empty(2, 1.0), CuttingPlane(a=np.array([1.0, 0.0]), b=0.0))
    s = B.lsbmrm_step(m, CuttingPlane(a=np.array([0.0, 1.0]), b=0.0))
    np.testing.assert_allclose(s.alpha, [0.5, 0.5])
    assert s.Jt_value == pytest.approx(-0.25)
    np.testing.assert_allclose(s.w, [-0.5, -0.5])
    # the aggregated plane gives no gain
    agg = CuttingPlane(a=s.A.T @ s.alpha, b=float(s.alpha @ s.b))
    s2 = B.lsbmrm_step(s, agg)
    assert s2.Jt_value == pytest.approx(s.Jt_value, abs=1e-15)


def test_lsbmrm_segment_optimal(rng):
    for _ in range(200):
        m = B.resolve(random_model(rng, int(rng.integers(1, 5)), d=3))
        plane = CuttingPlane(a=rng.normal(size=3), b=float(rng.normal()))
        s = B.lsbmrm_step(m, plane)
        assert s.Jt_value >= m.Jt_value
        assert s.Jt_value == pytest.approx(s.dual_value(), abs=1e-12)
        grid = np.linspace(0, 1, 401)
        vals = [B.add_cut(m, plane).dual_value(np.append((1 - e) * m.alpha, e)) for e in grid]
        assert s.Jt_value >= max(vals) - 1e-12


def test_epsilon_gap():
    m = B.add_cut(B.CuttingPlaneModel.empty(2, 1.0), CuttingPlane(a=np.array([1.0, 0.0]), b=0.0))
    m = B.resolve(B.add_cut(m, CuttingPlane(a=np.array([0.0, 1.0]), b=0.0)))
    assert B.epsilon_gap([1.0], m) == pytest.approx(1.25)
    with pytest.raises(ValueError):
        B.epsilon_gap([], m)


def test_qp_error_on_tiny_cap(rng):
    m = random_model(rng, 6, d=6, lam=0.01)
    with pytest.raises(NoConvergence):
        B.solve_model_qp(m, tol=1e-300, max_iter=1)


@pytest.mark.parametrize("variant", ["qp", "ls"])
def test_toy_converges(variant):
    model, trace = B.bmrm_train(ONE, 1.0, variant=variant, eps=1e-6)
    assert trace.converged
    assert O.primal_objective(model, ONE) == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("variant", ["qp", "ls"])
def test_trace_properties(rng, variant):
    ds = oracles.dense_dataset(rng, 60, 5, density=0.7)
    lam = 0.05
    _, trace = B.bmrm_train(ds, lam, variant=variant, eps=1e-4, max_iter=3000)
    assert trace.converged
    eps = np.array(trace.column("eps_t"))
    assert np.all(np.diff(eps) <= 1e-12)
    assert np.all(eps >= -1e-10)
    # with the best value taken over the same iterates (w_0 included), the
    # primal gap against a tight pragam optimum stays below eps_t
    _, _, ref = PG.pragam_run(ds, lam, eps=1e-9, max_iter=200_000)
    Jstar = min(ref.column("J"))
    best = np.minimum.accumulate([trace.info["J0"]] + trace.column("J"))[1:] - Jstar
    assert np.all(eps >= best - 1e-8)


def test_qp_iterations_within_budget():
    ds = oracles.margin_dataset()
    for lam in (1.0, 0.1, 0.01):
        _, trace = B.bmrm_train(ds, lam, eps=1e-3)
        budget = B.iteration_budget(lam, 1e-3, trace.info["J0"], G=1.0)
        assert trace.converged and len(trace) <= max(budget, 1)


def test_callback_gets_incumbent(rng):
    ds = oracles.dense_dataset(rng, 20, 3)
    seen = []
    B.bmrm_train(ds, 0.3, eps=1e-4, callback=lambda r, m: seen.append((r.J, O.primal_objective(m, ds))))
    best = math.inf
    for J, Jinc in seen:
        best = min(best, J)
        assert Jinc == pytest.approx(min(best, 1.0), abs=1e-12)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        B.bmrm_train(ONE, 1.0, variant="cg")
    with pytest.raises(ValueError):
        B.bmrm_train(ONE, 0.0)
