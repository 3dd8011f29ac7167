"""Weighted projection onto the local marginal polytope of a clique graph.

Primal:

    min  1/2 sum_c d_c^2 ||alpha_c - m_c||^2
    s.t. sum alpha_c = 1,  alpha_c >= 0,  alpha_c and alpha_c' agree on c & c'.

With multipliers ``theta = (lambda_c, mu)`` for the equalities and
``xi >= 0`` for the sign constraints, the stationarity condition gives
``alpha = m + d^{-2} s`` where ``s = S theta + xi`` and ``S`` is the adjoint of
the equality-constraint map ``C``. The dual to minimize is

    D = 1/2 sum_c d_c^{-2} ||s_c||^2 + <m, s> - sum_c lambda_c,   xi >= 0,

solved by alternating an exact solve in ``theta`` (a singular but consistent
PSD system) with the closed-form ``xi = [-d^2 m - S theta]_+``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .errors import NoConvergence

DENSE_LIMIT = 200
CG_TOL = 1e-10


@dataclass(frozen=True)
class Intersection:
    """Shared variables between cliques ``a`` and ``b``.

    ``map_a[y]`` is the shared-configuration index of configuration ``y`` of
    clique ``a`` (likewise ``map_b``); ``k`` shared configurations.
    """

    a: int
    b: int
    map_a: np.ndarray
    map_b: np.ndarray
    k: int


@dataclass(frozen=True)
class CliqueProjectionProblem:
    sizes: tuple          # |V_c| per clique
    targets: tuple        # m_c arrays
    weights: np.ndarray   # d_c > 0
    intersections: tuple = ()

    @classmethod
    def build(cls, targets, weights, intersections=()):
        targets = tuple(np.asarray(t, dtype=np.float64).ravel().copy() for t in targets)
        weights = np.broadcast_to(np.asarray(weights, dtype=np.float64), (len(targets),)).copy()
        inters = []
        for it in intersections:
            if not isinstance(it, Intersection):
                a, b, ma, mb = it
                ma, mb = np.asarray(ma, dtype=np.int64), np.asarray(mb, dtype=np.int64)
                it = Intersection(a, b, ma, mb, int(max(ma.max(), mb.max())) + 1)
            inters.append(it)
        p = cls(sizes=tuple(t.size for t in targets), targets=targets, weights=weights,
                intersections=tuple(inters))
        p.validate()
        return p

    @property
    def n_cliques(self) -> int:
        return len(self.sizes)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.sizes))).astype(np.int64)

    def validate(self):
        if self.n_cliques == 0:
            raise ValueError("no cliques")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValueError("clique weights must be positive")
        for t in self.targets:
            if not np.all(np.isfinite(t)):
                raise ValueError("targets must be finite")
        for it in self.intersections:
            for c, mp in ((it.a, it.map_a), (it.b, it.map_b)):
                if not 0 <= c < self.n_cliques:
                    raise ValueError(f"intersection refers to unknown clique {c}")
                if mp.shape != (self.sizes[c],):
                    raise ValueError("intersection map must cover every configuration of its clique")
                if mp.min() < 0 or mp.max() >= it.k:
                    raise ValueError("intersection map out of range")
            if it.a == it.b:
                raise ValueError("intersection of a clique with itself")

    def flat_targets(self) -> np.ndarray:
        return np.concatenate(self.targets)

    def entry_weights(self) -> np.ndarray:
        """``d_c^{-2}`` repeated over each clique's entries."""
        return np.repeat(self.weights**-2.0, self.sizes)

    def split(self, flat):
        off = self.offsets
        return [flat[off[c]:off[c + 1]].copy() for c in range(self.n_cliques)]

    def n_mu(self) -> int:
        return sum(it.k for it in self.intersections)

    def constraint_matrix(self) -> sp.csr_matrix:
        """``C``: rows are normalizations, then one row per shared configuration."""
        off = self.offsets
        rows, cols, vals = [], [], []
        for c in range(self.n_cliques):
            idx = np.arange(off[c], off[c + 1])
            rows.append(np.full(idx.size, c))
            cols.append(idx)
            vals.append(np.ones(idx.size))
        r0 = self.n_cliques
        for it in self.intersections:
            rows += [r0 + it.map_a, r0 + it.map_b]
            cols += [off[it.a] + np.arange(it.map_a.size), off[it.b] + np.arange(it.map_b.size)]
            vals += [np.ones(it.map_a.size), -np.ones(it.map_b.size)]
            r0 += it.k
        C = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(r0, int(off[-1])))
        return C.tocsr()

    def objective(self, alpha_flat) -> float:
        diff = np.asarray(alpha_flat) - self.flat_targets()
        return 0.5 * float(np.sum(diff**2 / self.entry_weights()))


@dataclass
class StructDualState:
    lam: np.ndarray       # one per clique (or edge)
    xi: np.ndarray        # flat, >= 0
    mu: np.ndarray        # flat consistency multipliers

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate((self.lam, self.mu))


@dataclass
class StructProjectionResult:
    alpha: list
    state: StructDualState
    sweeps: int
    residual: float
    dual_trace: list = field(default_factory=list)


class _Ops:
    """``S`` (theta -> s), ``C = S^T`` and the entry weights of a problem."""

    def __init__(self, S, C, winv, m, n_lam):
        self.S, self.C, self.winv, self.m, self.n_lam = S, C, winv, m, n_lam

    def e_lam(self, n_theta):
        e = np.zeros(n_theta)
        e[: self.n_lam] = 1.0
        return e

    def dual(self, theta, xi) -> float:
        s = self.S(theta) + xi
        return 0.5 * float(np.sum(self.winv * s * s)) + float(np.dot(self.m, s)) - float(theta[: self.n_lam].sum())

    def alpha(self, theta, xi):
        return self.m + self.winv * (self.S(theta) + xi)

    def residual(self, alpha, n_theta) -> float:
        return float(np.max(np.abs(self.C(alpha) - self.e_lam(n_theta))))


def _theta_step(ops, theta, xi, n_theta, dense):
    rhs = ops.e_lam(n_theta) - ops.C(ops.m + ops.winv * xi)

    def hv(v):
        return ops.C(ops.winv * ops.S(v))

    if dense is not None:
        return np.linalg.lstsq(dense, rhs, rcond=None)[0]
    op = LinearOperator((n_theta, n_theta), matvec=hv, dtype=np.float64)
    # gradient norm target is absolute; express it against ||rhs - H theta0||
    r0 = np.linalg.norm(rhs - hv(theta))
    if r0 <= CG_TOL:
        return theta
    sol, info = cg(op, rhs, x0=theta, rtol=0.0, atol=CG_TOL, maxiter=10 * n_theta + 100)
    return sol


def _bcd(ops, n_theta, n_entries, tol, max_sweeps):
    dense = None
    if n_theta <= DENSE_LIMIT:
        dense = np.column_stack([ops.C(ops.winv * ops.S(e)) for e in np.eye(n_theta)])
    theta = np.zeros(n_theta)
    xi = np.zeros(n_entries)
    trace = [ops.dual(theta, xi)]
    res = np.inf
    for sweep in range(1, max_sweeps + 1):
        theta = _theta_step(ops, theta, xi, n_theta, dense)
        xi = np.maximum(-ops.m / ops.winv - ops.S(theta), 0.0)
        trace.append(ops.dual(theta, xi))
        alpha = ops.alpha(theta, xi)
        res = ops.residual(alpha, n_theta)
        if res <= tol and trace[-2] - trace[-1] < tol:
            return theta, xi, alpha, sweep, res, trace
    raise NoConvergence(f"marginal projection not converged in {max_sweeps} sweeps", res)


def _finish(alpha_list, clamp):
    if not clamp:
        return alpha_list
    out = []
    for a in alpha_list:
        a = np.maximum(a, 0.0)
        out.append(a / a.sum())
    return out


def project_marginals(p: CliqueProjectionProblem, tol: float = 1e-8, max_sweeps: int = 10_000,
                      clamp: bool = False) -> StructProjectionResult:
    """Dual block coordinate descent; ``clamp`` renormalizes the output per clique."""
    p.validate()
    C = p.constraint_matrix()
    CT = C.T.tocsr()
    ops = _Ops(S=lambda th: CT @ th, C=lambda a: C @ a, winv=p.entry_weights(),
               m=p.flat_targets(), n_lam=p.n_cliques)
    theta, xi, alpha, sweeps, res, trace = _bcd(ops, C.shape[0], C.shape[1], tol, max_sweeps)
    state = StructDualState(lam=theta[: p.n_cliques].copy(), xi=xi, mu=theta[p.n_cliques:].copy())
    return StructProjectionResult(alpha=_finish(p.split(alpha), clamp), state=state, sweeps=sweeps,
                                  residual=res, dual_trace=trace)


def struct_dual_objective(state: StructDualState, p) -> float:
    """Dual value of ``state`` for a clique or sequence problem."""
    if isinstance(p, SequenceProjectionProblem):
        ops, n_theta, n_entries = _seq_ops(p)
    else:
        C = p.constraint_matrix()
        CT = C.T.tocsr()
        ops = _Ops(S=lambda th: CT @ th, C=lambda a: C @ a, winv=p.entry_weights(),
                   m=p.flat_targets(), n_lam=p.n_cliques)
        n_theta, n_entries = C.shape
    theta = state.theta
    if theta.shape != (n_theta,) or state.xi.shape != (n_entries,):
        raise ValueError("state dimensions do not match the problem")
    return ops.dual(theta, state.xi)


@dataclass(frozen=True)
class SequenceProjectionProblem:
    """Chain ``x_1 - ... - x_L`` over alphabet ``[m]``; one clique per edge."""

    L: int
    m: int
    targets: np.ndarray   # (L-1, m, m)
    weights: np.ndarray   # (L-1,)

    @classmethod
    def build(cls, L, m, targets, weights=1.0):
        targets = np.asarray(targets, dtype=np.float64).reshape(L - 1, m, m).copy()
        weights = np.broadcast_to(np.asarray(weights, dtype=np.float64), (L - 1,)).copy()
        p = cls(L=int(L), m=int(m), targets=targets, weights=weights)
        p.validate()
        return p

    def validate(self):
        if self.L < 2 or self.m < 1:
            raise ValueError("need L >= 2 and m >= 1")
        if self.targets.shape != (self.L - 1, self.m, self.m):
            raise ValueError("targets must have shape (L-1, m, m)")
        if self.weights.shape != (self.L - 1,) or np.any(self.weights <= 0):
            raise ValueError("edge weights must be positive, one per edge")
        if not np.all(np.isfinite(self.targets)):
            raise ValueError("targets must be finite")

    def to_clique_problem(self) -> CliqueProjectionProblem:
        m = self.m
        i_idx, j_idx = np.divmod(np.arange(m * m), m)  # entry (i, j) -> i*m + j
        inters = [Intersection(t, t + 1, j_idx, i_idx, m) for t in range(self.L - 2)]
        return CliqueProjectionProblem.build(list(self.targets.reshape(self.L - 1, -1)), self.weights,
                                             inters)

    def objective(self, alpha) -> float:
        diff = np.asarray(alpha) - self.targets
        return 0.5 * float(np.sum(self.weights[:, None, None] ** 2 * diff**2))


def _seq_ops(p: SequenceProjectionProblem):
    E, m = p.L - 1, p.m
    n_lam, n_mu = E, (p.L - 2) * m

    def S(theta):
        lam = theta[:n_lam]
        mu = np.zeros((p.L, m))  # rows 0 and L-1 stay zero
        mu[1:p.L - 1] = theta[n_lam:].reshape(p.L - 2, m)
        # s_t(i, j) = lam_t + mu_t(j) - mu_{t-1}(i), edges t = 1..L-1
        s = lam[:, None, None] + mu[1:p.L, None, :] - mu[0:p.L - 1, :, None]
        return s.ravel()

    def C(alpha):
        a = alpha.reshape(E, m, m)
        norm = a.sum(axis=(1, 2))
        cons = a[:-1].sum(axis=1) - a[1:].sum(axis=2)  # colsum_t(j) - rowsum_{t+1}(j)
        return np.concatenate((norm, cons.ravel()))

    winv = np.repeat(p.weights**-2.0, m * m)
    return _Ops(S=S, C=C, winv=winv, m=p.targets.ravel(), n_lam=n_lam), n_lam + n_mu, E * m * m


def project_sequence(p: SequenceProjectionProblem, tol: float = 1e-8, max_sweeps: int = 10_000,
                     clamp: bool = False) -> StructProjectionResult:
    """Chain specialization: gradients and products cost O(L m^2)."""
    p.validate()
    ops, n_theta, n_entries = _seq_ops(p)
    theta, xi, alpha, sweeps, res, trace = _bcd(ops, n_theta, n_entries, tol, max_sweeps)
    E = p.L - 1
    state = StructDualState(lam=theta[:E].copy(), xi=xi, mu=theta[E:].copy())
    a = alpha.reshape(E, p.m, p.m)
    out = _finish([a[t] for t in range(E)], clamp)
    return StructProjectionResult(alpha=np.array(out), state=state, sweeps=sweeps, residual=res,
                                  dual_trace=trace)


def consistency_residual(alpha) -> float:
    """Largest violation of normalization and chain consistency, for (L-1, m, m) marginals."""
    a = np.asarray(alpha)
    r = np.abs(a.sum(axis=(1, 2)) - 1.0).max()
    if a.shape[0] > 1:
        r = max(r, np.abs(a[:-1].sum(axis=1) - a[1:].sum(axis=2)).max())
    return float(r)
