import numpy as np
import pytest

from hingegap import bundle as B
from hingegap import lowerbound as LB
from hingegap.objective import CuttingPlane


def test_hadamard_small():
    np.testing.assert_array_equal(LB.hadamard(1), [[1]])
    np.testing.assert_array_equal(LB.hadamard(2), [[1, 1], [1, -1]])
    H4 = LB.hadamard(4)
    np.testing.assert_array_equal(H4.T @ H4, 4 * np.eye(4, dtype=np.int64))


@pytest.mark.parametrize("d", [1, 2, 8, 64, 512])
def test_hadamard_orthogonal(d):
    H = LB.hadamard(d)
    assert set(np.unique(H)) <= {-1, 1}
    np.testing.assert_array_equal(H.T @ H, d * np.eye(d, dtype=np.int64))


@pytest.mark.parametrize("d", [0, 3, 6, 12, 2.0])
def test_hadamard_rejects(d):
    with pytest.raises(ValueError):
        LB.hadamard(d)


def test_instance_d4_columns():
    A = LB.build_instance(4, 1.0).A
    a1 = np.array([1, 1, -1, -1]) / 2
    a2 = np.array([1, -1, -1, 1]) / 2
    np.testing.assert_allclose(A.T, [a1, a2, -a1, -a2], atol=1e-15)


@pytest.mark.parametrize("d", [4, 16, 128])
def test_instance_invariants(rng, d):
    inst = LB.build_instance(d, 0.3)
    G = inst.A.T @ inst.A
    h = d // 2
    np.testing.assert_allclose(np.diag(G), 1.0, atol=1e-12)
    np.testing.assert_allclose(G[:h, :h], np.eye(h), atol=1e-12)
    np.testing.assert_allclose(np.diag(G[:h, h:]), -1.0, atol=1e-12)
    assert inst(np.zeros(d)) == 0.0
    for _ in range(1000):
        assert inst(rng.normal(size=d) * rng.exponential()) >= 0.0


@pytest.mark.parametrize("d", [2, 6, 4.0])
def test_build_rejects(d):
    with pytest.raises(ValueError):
        LB.build_instance(d, 1.0)
    with pytest.raises(ValueError):
        LB.build_instance(8, 0.0)


def test_subgradient_lowest_index():
    inst = LB.build_instance(8, 1.0)
    i, a, v = inst.subgradient(np.zeros(8))
    assert i == 0 and v == 0.0
    np.testing.assert_array_equal(a, inst.A[:, 0])


@pytest.mark.parametrize("lam", [1.0, 0.25])
def test_subset_minimum(lam):
    d = 16
    inst = LB.build_instance(d, lam)
    rng = np.random.default_rng(1)
    for k in range(1, d // 2):
        S = rng.choice(d // 2, k, replace=False)
        m = B.CuttingPlaneModel.empty(d, lam)
        for i in S:
            m = B.add_cut(m, CuttingPlane(a=inst.A[:, i], b=0.0))
        _, alpha, val = B.solve_model_qp(m)
        assert val == pytest.approx(-1.0 / (2 * lam * k), rel=1e-12)
        np.testing.assert_allclose(alpha, 1.0 / k, atol=1e-12)


def test_prescribed_examples():
    recs = LB.run_adversary(LB.build_instance(8, 1.0), 3)
    assert recs[2].Jt == pytest.approx(-1 / 6, rel=1e-12)
    assert recs[2].delta_t >= 1 / 6
    inst = LB.build_instance(16, 1.0)
    r1 = LB.run_adversary(inst, 1)[0]
    np.testing.assert_allclose(r1.w, -inst.A[:, 0], atol=1e-15)
    assert r1.eps_t == pytest.approx(0.5)
    # w_1 = -a_1 lines up with the antipodal column, so J(w_1) = 1 + 1/2
    assert r1.J == pytest.approx(1.5)


@pytest.mark.parametrize("d,lam", [(8, 1.0), (16, 0.1), (64, 1.0)])
def test_prescribed_identities(d, lam):
    inst = LB.build_instance(d, lam)
    recs = LB.run_adversary(inst, d // 2 - 1)
    assert LB.check_identities(inst, recs) == []
    assert [r.column for r in recs] == list(range(d // 2 - 1))
    for r in recs:
        assert r.J == pytest.approx(3 / (2 * lam * r.t), rel=1e-12)


def test_check_identities_detects_errors():
    inst = LB.build_instance(8, 1.0)
    recs = LB.run_adversary(inst, 3)
    bad = [LB.AdversaryRecord(t=r.t, Jt=r.Jt * 1.01, J=r.J, eps_t=r.eps_t, delta_t=r.delta_t,
                              column=r.column, w=r.w) for r in recs]
    assert len(LB.check_identities(inst, bad)) == 3


@pytest.mark.parametrize("mode", LB.MODES)
def test_gap_exceeds_primal_gap_over_same_iterates(mode):
    # min over w_0..w_t of J minus J_t(w_t) dominates the same minimum minus J(w*) = 0
    inst = LB.build_instance(32, 0.5)
    recs = LB.run_adversary(inst, 15, mode)
    best = 0.0  # J(w_0)
    for r in recs:
        best = min(best, r.J)
        assert r.eps_t >= best - 1e-12
        assert np.diff([r.eps_t for r in recs]).max(initial=0) <= 1e-12


def test_faithful_closes_gap():
    inst = LB.build_instance(16, 1.0)
    recs = LB.run_adversary(inst, 7, "faithful")
    assert len(recs) == 2 and recs[-1].eps_t <= 1e-12
    assert recs[0].column == 0 and recs[1].column == 8


def test_adversary_rejects():
    inst = LB.build_instance(8, 1.0)
    for t in (0, 4, 5):
        with pytest.raises(ValueError):
            LB.run_adversary(inst, t)
    with pytest.raises(ValueError):
        LB.run_adversary(inst, 2, "random")
