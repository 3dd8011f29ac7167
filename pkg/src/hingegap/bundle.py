"""Cutting-plane (BMRM) baselines.

The model ``J_t(w) = lam/2 ||w||^2 + max_i <a_i, w> + b_i`` is minimized
through its simplex dual

    max_{alpha in simplex}  -||A^T alpha||^2 / (2 lam) + <alpha, b>,
    w = -A^T alpha / lam

(rows of ``A`` are the plane slopes). ``qp`` solves this dual fully each
iteration; ``ls`` only searches the segment between the incumbent dual and
the newest plane.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import objective as obj
from .dataio import SparseDataset
from .errors import NoConvergence
from .objective import CuttingPlane
from .projection import SeparableQpProblem, solve_separable_qp
from .trace import ConvergenceRecord, Trace

QP_TOL = 1e-10
QP_MAX_ITER = 50_000
_POLISH_EVERY = 25


@dataclass(frozen=True)
class CuttingPlaneModel:
    A: np.ndarray  # (t, d) plane slopes
    b: np.ndarray  # (t,) offsets
    lam: float
    alpha: np.ndarray
    w: np.ndarray
    Jt_value: float

    @classmethod
    def empty(cls, d: int, lam: float) -> "CuttingPlaneModel":
        return cls(A=np.zeros((0, d)), b=np.zeros(0), lam=lam, alpha=np.zeros(0),
                   w=np.zeros(d), Jt_value=-math.inf)

    @property
    def t(self) -> int:
        return self.b.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def planes(self):
        return [CuttingPlane(a=self.A[i], b=float(self.b[i])) for i in range(self.t)]

    def model_value(self, w) -> float:
        """``J_t(w)``."""
        w = np.asarray(w, dtype=np.float64)
        return 0.5 * self.lam * float(np.dot(w, w)) + float(np.max(self.A @ w + self.b))

    def dual_value(self, alpha=None) -> float:
        a = self.alpha if alpha is None else alpha
        u = self.A.T @ a
        return -float(np.dot(u, u)) / (2.0 * self.lam) + float(np.dot(a, self.b))


def add_cut(model: CuttingPlaneModel, plane: CuttingPlane) -> CuttingPlaneModel:
    """Append a plane; the dual is padded with a zero (re-solve separately).

    The first plane is solved in closed form: ``alpha = (1)``, ``w = -a / lam``.
    """
    a = np.asarray(plane.a, dtype=np.float64)
    if a.shape != (model.d,):
        raise ValueError(f"plane has dimension {a.shape}, model has d={model.d}")
    A = np.vstack((model.A, a[None, :]))
    b = np.append(model.b, float(plane.b))
    if model.t == 0:
        alpha = np.ones(1)
        w = -a / model.lam
        new = replace(model, A=A, b=b, alpha=alpha, w=w)
        return replace(new, Jt_value=new.dual_value())
    return replace(model, A=A, b=b, alpha=np.append(model.alpha, 0.0))


def _simplex_projection(v):
    t = v.shape[0]
    p = SeparableQpProblem(d=np.ones(t), m=v, l=np.zeros(t), u=np.ones(t), sigma=np.ones(t), z=1.0)
    return solve_separable_qp(p, check=False).alpha


def _top_eigenvalue(G, iters=200, tol=1e-12):
    v = np.ones(G.shape[0]) / math.sqrt(G.shape[0])
    est = 0.0
    for _ in range(iters):
        u = G @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        new = float(np.dot(v, u))
        v = u / nu
        if abs(new - est) <= tol * abs(new):
            return new
        est = new
    # the Rayleigh quotient approaches from below; the row-sum bound caps it from above
    return min(float(np.abs(G).sum(axis=1).max()), est * 1.01)


def dual_residuals(G, b, lam, alpha):
    """``(kkt, gap)`` of a simplex-dual point.

    ``kkt`` is ``||alpha - P(alpha + grad)||_inf``; ``gap`` is the
    primal-minus-dual value ``max_i g_i - <alpha, g>`` with ``g`` the gradient.
    """
    g = b - (G @ alpha) / lam
    kkt = float(np.max(np.abs(alpha - _simplex_projection(alpha + g))))
    gap = float(np.max(g) - np.dot(alpha, g))
    return kkt, gap


def _active_set(G, b, lam, alpha, tol=QP_TOL, max_iter=None):
    """Primal active-set refinement from a feasible ``alpha``.

    Each step solves the equality-constrained problem on the current face;
    a negative face solution triggers a ratio-test step that drops the
    blocking coordinate, otherwise the most violating absent coordinate
    enters. A tiny ridge keeps rank-deficient faces solvable (their solve
    overshoots to the boundary, which is the intended behaviour). Returns
    None if the iteration cap is hit.
    """
    t = alpha.shape[0]
    H = G / lam
    ridge = 1e-13 * max(1.0, float(np.max(np.diag(H))))
    x = alpha.copy()
    S = np.flatnonzero(x > 0)
    if S.size == 0:
        return None
    for _ in range(max_iter or 10 * t + 10):
        k = S.size
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = H[np.ix_(S, S)] + ridge * np.eye(k)
        K[:k, k] = 1.0
        K[k, :k] = 1.0
        p = np.linalg.solve(K, np.append(b[S], 1.0))[:k]
        if np.any(p < 0):
            step_dir = p - x[S]
            neg = step_dir < 0
            ratios = x[S][neg] / -step_dir[neg]
            step = min(1.0, float(ratios.min()))
            xs = x[S] + step * step_dir
            drop = np.zeros(k, dtype=bool)
            drop[np.flatnonzero(neg)[int(np.argmin(ratios))]] = True
            drop |= xs <= 0
            xs[drop] = 0.0
            if np.all(drop):
                return None
            x[S] = xs
            S = S[~drop]
            x /= x.sum()
            continue
        x = np.zeros(t)
        x[S] = p / p.sum()
        g = b - H @ x
        level = float(np.dot(x, g))
        rest = np.setdiff1d(np.arange(t), S)
        if rest.size == 0:
            return x
        j = rest[int(np.argmax(g[rest]))]
        if g[j] <= level + tol:
            return x
        S = np.sort(np.append(S, j))
    return None


def solve_model_qp(model: CuttingPlaneModel, tol: float = QP_TOL, max_iter: int = QP_MAX_ITER):
    """Maximize the simplex dual; returns ``(w_t, alpha_t, Jt_value)``.

    An active-set pass from the warm start ``model.alpha`` usually finishes
    the job; otherwise accelerated projected gradient with adaptive restart
    runs, interleaved with short active-set refinements of its iterate.
    ``Jt_value`` is the dual value, which never falls below the warm start's.
    Raises ``NoConvergence`` if ``max_iter`` passes do not reach ``tol`` on
    both the projected-gradient residual and the primal-dual gap; ``tol`` is
    relative to ``max(1, max |A A^T| / lam)``.
    """
    t, lam = model.t, model.lam
    if t == 0:
        raise ValueError("model has no planes")
    A, b = model.A, model.b
    G = A @ A.T
    start = model.alpha if model.alpha.shape == (t,) and model.alpha.sum() > 0 else np.full(t, 1.0 / t)
    start = _simplex_projection(start)

    def value(a):
        return -float(a @ G @ a) / (2.0 * lam) + float(a @ b)

    def finish(a):
        if value(a) < value(start):
            a = start
        w = -(A.T @ a) / lam
        return w, a, value(a)

    # rounding in the gradient grows with the curvature scale, so is the target
    scale = max(1.0, float(np.max(np.abs(G))) / lam)
    tol_eff = tol * scale

    def done(a):
        kkt, gap = dual_residuals(G, b, lam, a)
        return kkt <= tol_eff and gap <= tol_eff, max(kkt, gap)

    if t == 1:
        return finish(np.ones(1))
    ok, res = done(start)
    if ok:
        return finish(start)
    pol = _active_set(G, b, lam, start, tol_eff)
    if pol is not None and done(pol)[0]:
        return finish(pol)

    Lq = _top_eigenvalue(G) / lam
    if Lq <= 0:
        return finish(start)
    step = 1.0 / Lq
    x = start.copy()
    y = x.copy()
    theta = 1.0
    fx = value(x)
    for it in range(1, max_iter + 1):
        g = b - (G @ y) / lam
        x_new = _simplex_projection(y + step * g)
        f_new = value(x_new)
        if f_new < fx - 1e-15 * abs(fx):  # restart momentum on non-ascent
            theta = 1.0
            y = x.copy()
        else:
            theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
            y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
            x, fx, theta = x_new, max(f_new, fx), theta_new
        if it % _POLISH_EVERY == 0:
            ok, res = done(x)
            if ok:
                return finish(x)
            pol = _active_set(G, b, lam, x, tol_eff, max_iter=2 * t)
            if pol is not None and value(pol) >= fx - tol_eff and done(pol)[0]:
                return finish(pol)
    ok, res = done(x)
    if ok:
        return finish(x)
    raise NoConvergence(f"cutting-plane dual not solved to {tol} in {max_iter} iterations", res)


def resolve(model: CuttingPlaneModel, tol: float = QP_TOL) -> CuttingPlaneModel:
    w, alpha, val = solve_model_qp(model, tol)
    return replace(model, w=w, alpha=alpha, Jt_value=val)


def lsbmrm_step(model: CuttingPlaneModel, new_plane: CuttingPlane) -> CuttingPlaneModel:
    """Exact line search on the dual segment ``((1-eta) alpha, eta)``."""
    if model.t == 0:
        return add_cut(model, new_plane)
    lam = model.lam
    a = np.asarray(new_plane.a, dtype=np.float64)
    u = model.A.T @ model.alpha  # aggregated slope
    beta = float(np.dot(model.alpha, model.b))
    diff = a - u
    dd = float(np.dot(diff, diff))
    num = lam * (float(new_plane.b) - beta) - float(np.dot(u, diff))
    if dd > 0:
        eta = min(max(num / dd, 0.0), 1.0)
    else:
        eta = 1.0 if num > 0 else 0.0
    grown = add_cut(model, new_plane)
    alpha = np.append((1.0 - eta) * model.alpha, eta)
    agg = (1.0 - eta) * u + eta * a
    val = -float(np.dot(agg, agg)) / (2.0 * lam) + (1.0 - eta) * beta + eta * float(new_plane.b)
    if val < model.Jt_value:  # eta = 0 keeps the previous value; guard against rounding
        alpha = np.append(model.alpha, 0.0)
        agg, val = u, model.Jt_value
    return replace(grown, alpha=alpha, w=-agg / lam, Jt_value=val)


def epsilon_gap(history, model: CuttingPlaneModel) -> float:
    """Best primal value seen minus the model minimum."""
    if len(history) == 0:
        raise ValueError("empty history")
    return float(min(history)) - model.Jt_value


def bmrm_loop(oracle, d: int, lam: float, variant: str = "qp", eps: float = 1e-4,
              max_iter: int = 1000, qp_tol: float = QP_TOL, callback=None):
    """Generic BMRM from ``w_0 = 0`` on ``lam/2 ||w||^2 + R(w)``.

    ``oracle(w)`` returns ``(R(w), CuttingPlane)``. Returns
    ``(incumbent w, final model, Trace)``; record ``t`` holds ``J(w_t)`` and
    ``eps_t = min_{t' <= t} J(w_t') - J_t(w_t)`` (the minimum includes ``w_0``).
    """
    if variant not in ("qp", "ls"):
        raise ValueError(f"unknown variant {variant!r}")
    if not (lam > 0 and eps > 0):
        raise ValueError("lam and eps must be positive")
    t0 = time.perf_counter()
    w = np.zeros(d)
    model = CuttingPlaneModel.empty(d, lam)
    risk, plane = oracle(w)
    J = 0.5 * lam * float(np.dot(w, w)) + risk
    history = [J]
    best_w, best_J = w, J
    trace = Trace(info={"variant": variant, "J0": J})
    for t in range(1, max_iter + 1):
        if variant == "qp":
            model = resolve(add_cut(model, plane), qp_tol)
        else:
            model = lsbmrm_step(model, plane)
        w = model.w
        risk, plane = oracle(w)
        J = 0.5 * lam * float(np.dot(w, w)) + risk
        history.append(J)
        if J < best_J:
            best_w, best_J = w, J
        rec = ConvergenceRecord(iter=t, wall_seconds=time.perf_counter() - t0, J=J,
                                eps_t=epsilon_gap(history, model))
        trace.append(rec)
        if callback:
            callback(rec, best_w)
        if rec.eps_t <= eps:
            trace.converged = True
            break
    trace.info.update(planes=model.t, Jt=model.Jt_value)
    return best_w.copy(), model, trace


def bmrm_train(ds: SparseDataset, lam: float, variant: str = "qp", eps: float = 1e-4,
               max_iter: int = 1000, qp_tol: float = QP_TOL, callback=None):
    """Hinge-loss BMRM; returns ``(incumbent PrimalModel, Trace)``.

    ``callback(record, incumbent_model)`` runs after each record.
    """
    def oracle(w):
        scores = ds.X @ w
        return obj.hinge_risk_from_scores(scores, ds.y), obj._cut_from_scores(w, scores, ds)

    def cb(rec, w):
        callback(rec, obj.PrimalModel(w=w, lam=lam))

    w, _, trace = bmrm_loop(oracle, ds.d, lam, variant, eps, max_iter, qp_tol,
                            cb if callback else None)
    return obj.PrimalModel(w=w, lam=lam), trace


def iteration_budget(lam: float, eps: float, J0: float, G: float, H: float = 1.0) -> float:
    """``log2(lam J(0) / (G^2 H)) + 8 G^2 H / (lam eps)`` iterations."""
    return math.log2(lam * J0 / (G * G * H)) + 8.0 * G * G * H / (lam * eps)
