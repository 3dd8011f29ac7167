"""Primal-adjoint gap minimization for the linear SVM.

Maximizes the smooth adjoint ``D`` with an accelerated scheme that keeps a
primal sequence ``w_k`` alongside the dual ``alpha_k``; the duality gap
``J(w_k) - D(alpha_k)`` is bounded by ``4 L D2 / ((k+1)(k+2))`` when ``L``
is at least the Lipschitz constant of ``grad D``. Every projection onto the
dual feasible set goes through :mod:`hingegap.projection`.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from . import objective as obj
from .dataio import SparseDataset
from .errors import DivergenceError
from .projection import SeparableQpProblem, solve_separable_qp
from .trace import ConvergenceRecord, Trace

log = logging.getLogger(__name__)

SIGMA2 = 1.0
# relative slack on the curvature test so exact constants are not doubled by rounding
_CURVATURE_SLACK = 1e-9


@dataclass
class PragamState:
    k: int
    alpha: np.ndarray
    w: np.ndarray
    mu: float
    L: float
    tau: float
    beta: np.ndarray | None = None
    D2: float = 0.0
    sigma2: float = SIGMA2


def prox_diameter(n: int) -> float:
    """``max 1/2 ||alpha||^2`` over ``[0, 1/n]^n``."""
    return 1.0 / (2.0 * n)


def estimate_lipschitz(ds: SparseDataset, lam: float, method: str = "power",
                       tol: float = 1e-6, max_iter: int = 10_000) -> float:
    """Lipschitz constant of ``grad D``.

    ``bound`` returns ``n R^2 / lam``; ``power`` returns the top eigenvalue of
    ``Y X X^T Y`` over ``lam`` by power iteration (never above ``bound``).
    """
    if method == "bound":
        return ds.n * ds.r_max**2 / lam
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    X = ds.X
    # Y^2 = I, so the spectrum equals that of X X^T; iterate in the smaller space
    if ds.d <= ds.n:
        apply = lambda v: X.T @ (X @ v)  # noqa: E731
        dim = ds.d
    else:
        apply = lambda v: X @ (X.T @ v)  # noqa: E731
        dim = ds.n
    rng = np.random.default_rng(0)
    v = 1.0 + 0.1 * rng.random(dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        u = apply(v)
        new = float(np.dot(v, u))
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = u / nu
        if abs(new - est) <= tol * abs(new):
            est = new
            break
        est = new
    return max(est, 0.0) / lam


def _project_q2(target, ds, bias, weight=1.0, median="quickselect"):
    n = ds.n
    if not bias:
        return np.clip(target, 0.0, 1.0 / n)
    p = SeparableQpProblem(d=np.full(n, weight), m=np.asarray(target, dtype=np.float64),
                           l=np.zeros(n), u=np.full(n, 1.0 / n), sigma=ds.y, z=0.0)
    return solve_separable_qp(p, median=median).alpha


def _alpha_mu_from_scores(scores, mu, ds, bias, median="quickselect"):
    target = (1.0 - ds.y * scores) / mu
    return _project_q2(target, ds, bias, weight=math.sqrt(mu), median=median)


def map_alpha_mu(w, mu: float, ds: SparseDataset, bias: bool = False,
                 median: str = "quickselect") -> obj.DualPoint:
    """Smoothed dual response ``argmin_{Q2} mu/2 ||a||^2 + w^T X Y a - sum(a)``."""
    if not mu > 0:
        raise ValueError(f"smoothing parameter must be positive, got {mu}")
    a = _alpha_mu_from_scores(ds.X @ np.asarray(w, dtype=np.float64), mu, ds, bias, median)
    return obj.DualPoint(a, bias_mode=bias)


def map_v(alpha, L: float, ds: SparseDataset, lam: float, bias: bool = False,
          median: str = "quickselect") -> obj.DualPoint:
    """Projected gradient-ascent step ``P_Q2(alpha + grad D(alpha) / L)``."""
    if not L > 0:
        raise ValueError(f"Lipschitz estimate must be positive, got {L}")
    a = np.asarray(getattr(alpha, "alpha", alpha), dtype=np.float64)
    g = obj.adjoint_gradient(a, ds, lam)
    return obj.DualPoint(_project_q2(a + g / L, ds, bias, median=median), bias_mode=bias)


def initial_alpha(ds: SparseDataset, bias: bool, init: str = "center", seed=None):
    n = ds.n
    if init == "center":
        a = np.full(n, 0.5 / n)
    elif init == "random":
        a = np.random.default_rng(seed).uniform(0.0, 1.0 / n, n)
    else:
        raise ValueError(f"unknown init {init!r}")
    if bias and abs(float(np.dot(ds.y, a))) > obj.BIAS_TOL:
        a = _project_q2(a, ds, True)
    return a


def _step_v(beta, w_beta, L, ds, lam, bias, adaptive, median):
    """``v(beta)`` and the (possibly doubled) L that passes the curvature test."""
    grad = 1.0 - ds.y * (ds.X @ w_beta)
    while True:
        v = _project_q2(beta + grad / L, ds, bias, median=median)
        w_v = obj.zt(v, ds) / lam
        if not adaptive:
            return v, w_v, L
        dv = v - beta
        lhs = lam * float(np.dot(w_v - w_beta, w_v - w_beta))
        if lhs <= L * float(np.dot(dv, dv)) * (1.0 + _CURVATURE_SLACK):
            return v, w_v, L
        L *= 2.0
        log.debug("curvature test failed; doubling L to %g", L)


def pragam_iterates(ds: SparseDataset, lam: float, bias: bool = False, lipschitz=None,
                    adaptive: bool = True, init: str = "center", seed=None,
                    median: str = "quickselect"):
    """Yield the solver state for k = 0, 1, 2, ... (infinite generator)."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    L = float(lipschitz) if lipschitz is not None else estimate_lipschitz(ds, lam, "power")
    if not L > 0:
        L = 1.0 / lam  # all-zero data: any positive L is valid
    D2 = prox_diameter(ds.n)

    a_init = initial_alpha(ds, bias, init, seed)
    w_init = obj.zt(a_init, ds) / lam
    alpha, w_alpha, L = _step_v(a_init, w_init, L, ds, lam, bias, adaptive, median)
    w = w_init
    mu = 2.0 * L
    k = 0
    yield PragamState(k=0, alpha=alpha, w=w, mu=mu, L=L, tau=2.0 / 3.0, D2=D2)
    while True:
        tau = 2.0 / (k + 3)
        scores = ds.X @ w
        while True:
            a_mu = _alpha_mu_from_scores(scores, mu, ds, bias, median)
            beta = (1.0 - tau) * alpha + tau * a_mu
            w_beta = obj.zt(beta, ds) / lam
            v, w_alpha, L_new = _step_v(beta, w_beta, L, ds, lam, bias, adaptive, median)
            if L_new == L:
                break
            # keep mu_k = 4 L / ((k+1)(k+2)) consistent with the enlarged L and redo the step
            mu *= L_new / L
            L = L_new
        w = (1.0 - tau) * w + tau * w_beta
        alpha = v
        mu = (1.0 - tau) * mu
        k += 1
        yield PragamState(k=k, alpha=alpha, w=w, mu=mu, L=L, tau=2.0 / (k + 3), beta=beta, D2=D2)


def rate_bound(L: float, n: int, k: int) -> float:
    """Gap envelope ``4 L D2 / ((k+1)(k+2) sigma2)``."""
    return 4.0 * L * prox_diameter(n) / ((k + 1) * (k + 2) * SIGMA2)


def pragam_run(ds: SparseDataset, lam: float, bias: bool = False, eps: float = 1e-4,
               max_iter: int = 10_000, lipschitz=None, adaptive: bool = True,
               init: str = "center", seed=None, median: str = "quickselect", callback=None):
    """Run until ``J(w_k) - D(alpha_k) <= eps`` or ``max_iter`` iterations.

    Returns ``(PrimalModel, DualPoint, Trace)``; the trace has one record per
    iteration starting at k = 0. ``callback(record, model)`` is invoked after
    each record is formed.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    t0 = time.perf_counter()
    if bias and np.all(ds.y == ds.y[0]):
        log.warning("all labels equal: the bias-constrained dual set is {0}; returning the trivial model")
        w = np.zeros(ds.d)
        model = obj.PrimalModel(w=w, lam=lam, bias=obj.optimal_bias(w, ds))
        J = obj.primal_objective(model, ds)
        rec = ConvergenceRecord(iter=0, wall_seconds=time.perf_counter() - t0, J=J, D=0.0, gap=J)
        if callback:
            callback(rec, model)
        return model, obj.DualPoint(np.zeros(ds.n), True), Trace([rec], converged=True,
                                                                 info={"degenerate": True})

    trace = Trace()
    state = None
    for state in pragam_iterates(ds, lam, bias, lipschitz, adaptive, init, seed, median):
        scores = ds.X @ state.w
        J = obj.primal_from_scores(state.w, scores, ds.y, lam, bias)
        u = obj.zt(state.alpha, ds)
        D = float(state.alpha.sum()) - float(np.dot(u, u)) / (2.0 * lam)
        if not (math.isfinite(J) and math.isfinite(D)):
            raise DivergenceError(f"non-finite objective at k={state.k} (J={J}, D={D}, L={state.L})")
        rec = ConvergenceRecord(iter=state.k, wall_seconds=time.perf_counter() - t0, J=J, D=D, gap=J - D)
        trace.append(rec)
        if callback:
            b = obj._bias_from_scores(scores, ds.y) if bias else None
            callback(rec, obj.PrimalModel(w=state.w, lam=lam, bias=b))
        if rec.gap <= eps:
            trace.converged = True
            break
        if state.k >= max_iter:
            break
    trace.info.update(L=state.L, iterations=state.k)
    b = obj.optimal_bias(state.w, ds) if bias else None
    return (obj.PrimalModel(w=state.w.copy(), lam=lam, bias=b),
            obj.DualPoint(state.alpha.copy(), bias_mode=bias), trace)
