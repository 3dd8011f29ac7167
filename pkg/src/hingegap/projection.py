"""Exact projection onto a box intersected with one hyperplane.

Solves

    min  1/2 sum_i d_i^2 (alpha_i - m_i)^2
    s.t. l_i <= alpha_i <= u_i,   sum_i sigma_i alpha_i = z

by reducing it to the root of a monotone piecewise-linear function of the
equality multiplier and locating that root with a median-halving search in
O(n) expected time. The halving loop lives in a compiled kernel when one is
built; ``BACKEND`` reports which implementation is active.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, InvalidProblem
from . import _pykernels

if os.environ.get("HINGEGAP_PURE") == "1":
    _kernel = _pykernels.find_root
    BACKEND = "python"
else:
    try:
        from ._kernels import find_root as _kernel
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _kernel = _pykernels.find_root
        BACKEND = "python"

KERNELS = {"python": _pykernels.find_root}
if BACKEND == "compiled":
    KERNELS["compiled"] = _kernel

EQ_TOL = 1e-10
MEDIAN_METHODS = ("quickselect", "mom")


@dataclass(frozen=True)
class SeparableQpProblem:
    d: np.ndarray
    m: np.ndarray
    l: np.ndarray
    u: np.ndarray
    sigma: np.ndarray
    z: float

    @classmethod
    def build(cls, d, m, l, u, sigma, z) -> "SeparableQpProblem":
        """Broadcast scalars against ``m`` and coerce everything to float arrays."""
        m = np.atleast_1d(np.asarray(m, dtype=np.float64))
        n = m.shape[0]

        def vec(x):
            return np.broadcast_to(np.asarray(x, dtype=np.float64), (n,)).copy()

        return cls(d=vec(d), m=m.copy(), l=vec(l), u=vec(u), sigma=vec(sigma), z=float(z))

    @property
    def n(self) -> int:
        return self.m.shape[0]

    def objective(self, alpha) -> float:
        return 0.5 * float(np.sum(self.d**2 * (np.asarray(alpha) - self.m) ** 2))

    def window(self):
        """Range of ``sum sigma_i alpha_i`` over the box."""
        s = self.sigma
        lo = np.sum(np.where(s > 0, s * self.l, s * self.u))
        hi = np.sum(np.where(s > 0, s * self.u, s * self.l))
        return float(lo), float(hi)

    def validate(self):
        arrays = (self.d, self.m, self.l, self.u, self.sigma)
        if any(a.shape != (self.n,) for a in arrays):
            raise InvalidProblem("d, m, l, u and sigma must have the same length")
        if not all(np.all(np.isfinite(a)) for a in arrays) or not math.isfinite(self.z):
            raise InvalidProblem("problem data must be finite")
        if np.any(self.d == 0):
            raise InvalidProblem("weights d_i must be nonzero")
        if np.any(self.l >= self.u):
            raise InvalidProblem("bounds must satisfy l_i < u_i")


@dataclass(frozen=True)
class TransformedQp:
    """The problem after ``beta_i = sigma_i (alpha_i - m_i)``.

    Only coordinates with ``sigma_i != 0`` appear here.
    """

    lp: np.ndarray
    up: np.ndarray
    dbar2: np.ndarray
    zp: float

    @classmethod
    def from_problem(cls, p: SeparableQpProblem) -> "TransformedQp":
        s = p.sigma
        keep = s != 0
        s, m, l, u, d = s[keep], p.m[keep], p.l[keep], p.u[keep], p.d[keep]
        lp = np.where(s > 0, s * (l - m), s * (u - m))
        up = np.where(s > 0, s * (u - m), s * (l - m))
        zp = p.z - float(np.sum(s * m))
        return cls(lp=lp, up=up, dbar2=d**2 / s**2, zp=zp)

    @property
    def n(self) -> int:
        return self.lp.shape[0]

    def kinks(self):
        return self.dbar2 * self.lp, self.dbar2 * self.up


@dataclass(frozen=True)
class ProjectionSolution:
    alpha: np.ndarray
    lam: float
    kkt_residual: float
    iterations: int = 0


def eval_f(lam: float, tq: TransformedQp) -> float:
    """Equality-constraint residual as a function of the multiplier."""
    r = tq.dbar2
    h = (np.maximum(r * tq.lp - lam, 0.0) - np.maximum(lam - r * tq.up, 0.0) + lam) / r
    return float(np.sum(h)) - tq.zp


def _check_window(tq: TransformedQp):
    lo, hi = float(np.sum(tq.lp)), float(np.sum(tq.up))
    tol = EQ_TOL * max(1.0, abs(tq.zp), abs(lo), abs(hi))
    if tq.zp < lo - tol or tq.zp > hi + tol:
        raise Infeasible(f"hyperplane value {tq.zp} outside attainable range [{lo}, {hi}]")


def find_root_median(tq: TransformedQp, median="quickselect", backend=None):
    """Root of ``eval_f`` by median halving over the kink set.

    Returns ``(lam, iterations)``; the loop count never exceeds
    ``ceil(log2(2n))``.
    """
    if median not in MEDIAN_METHODS:
        raise ValueError(f"median must be one of {MEDIAN_METHODS}")
    if tq.n == 0:
        if abs(tq.zp) > EQ_TOL:
            raise Infeasible("no free coordinates but nonzero hyperplane value")
        return 0.0, 0
    _check_window(tq)
    kernel = _kernel if backend is None else KERNELS[backend]
    lo, hi = tq.kinks()
    inv = 1.0 / tq.dbar2
    lam, it = kernel(np.ascontiguousarray(lo), np.ascontiguousarray(hi), inv,
                     np.ascontiguousarray(tq.lp), np.ascontiguousarray(tq.up),
                     float(tq.zp), median)
    return float(lam), int(it)


def _recover(p: SeparableQpProblem, lam: float):
    # alpha_i = clip(m_i + sigma_i lam / d_i^2, l_i, u_i); sigma_i = 0 gives clip(m_i)
    return np.clip(p.m + p.sigma * lam / p.d**2, p.l, p.u)


def kkt_residual(p: SeparableQpProblem, alpha, lam: float) -> float:
    """Largest violation of the optimality conditions at ``(alpha, lam)``.

    Stationarity ``d_i^2 (alpha_i - m_i) = sigma_i lam + rho_i`` with the box
    multiplier ``rho_i`` signed by which bound is active; each term is scaled
    by ``max(1, |sigma_i lam|)``. The equality residual is scaled by
    ``max(1, |z|)``.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    g = p.d**2 * (alpha - p.m) - p.sigma * lam
    at_lo = alpha <= p.l
    at_hi = alpha >= p.u
    viol = np.where(at_lo, np.maximum(-g, 0.0), np.where(at_hi, np.maximum(g, 0.0), np.abs(g)))
    viol = viol / np.maximum(1.0, np.abs(p.sigma * lam))
    box = np.maximum(np.maximum(p.l - alpha, alpha - p.u), 0.0)
    eq = abs(float(np.dot(p.sigma, alpha)) - p.z) / max(1.0, abs(p.z))
    parts = [eq]
    if alpha.size:
        parts += [float(viol.max()), float(box.max())]
    return max(parts)


def solve_separable_qp(p: SeparableQpProblem, median="quickselect", backend=None,
                       check: bool = True) -> ProjectionSolution:
    """Exact minimizer via the median root search.

    ``check=False`` skips input validation and the KKT report (``kkt_residual``
    is then NaN); inner loops that build known-valid problems use it.
    """
    if not check:
        tq = TransformedQp.from_problem(p)
        lam, it = find_root_median(tq, median=median, backend=backend)
        return ProjectionSolution(alpha=_recover(p, lam), lam=lam, kkt_residual=math.nan,
                                  iterations=it)
    p.validate()
    lo, hi = p.window()
    tol = EQ_TOL * max(1.0, abs(p.z))
    if p.z < lo - tol or p.z > hi + tol:
        raise Infeasible(f"z={p.z} outside feasible window [{lo}, {hi}]")
    tq = TransformedQp.from_problem(p)
    lam, it = find_root_median(tq, median=median, backend=backend)
    alpha = _recover(p, lam)
    return ProjectionSolution(alpha=alpha, lam=lam, kkt_residual=kkt_residual(p, alpha, lam),
                              iterations=it)


def solve_sorted_oracle(p: SeparableQpProblem) -> ProjectionSolution:
    """Reference solver: sort all kinks and sweep the piecewise-linear residual.

    O(n log n); kept as an independent check on ``solve_separable_qp``.
    """
    p.validate()
    lo_w, hi_w = p.window()
    tol = EQ_TOL * max(1.0, abs(p.z))
    if p.z < lo_w - tol or p.z > hi_w + tol:
        raise Infeasible(f"z={p.z} outside feasible window [{lo_w}, {hi_w}]")
    tq = TransformedQp.from_problem(p)
    if tq.n == 0:
        alpha = _recover(p, 0.0)
        return ProjectionSolution(alpha=alpha, lam=0.0, kkt_residual=kkt_residual(p, alpha, 0.0))
    klo, khi = tq.kinks()
    w = 1.0 / tq.dbar2
    pts = np.concatenate((klo, khi))
    dslope = np.concatenate((w, -w))
    order = np.argsort(pts, kind="stable")
    pts, dslope = pts[order], dslope[order]
    # f at each sorted kink, swept left to right from f(-inf) = sum lp - zp
    seg_slope = np.cumsum(dslope)[:-1]
    fvals = np.empty_like(pts)
    fvals[0] = float(np.sum(tq.lp)) - tq.zp
    fvals[1:] = fvals[0] + np.cumsum(seg_slope * np.diff(pts))
    j = int(np.searchsorted(fvals, 0.0, side="left"))
    if j == 0:
        lam = float(pts[0])
    elif j >= pts.size:
        lam = float(pts[-1])
    else:
        a, b = float(pts[j - 1]), float(pts[j])
        fa, fb = eval_f(a, tq), eval_f(b, tq)
        if fb == fa:
            lam = 0.5 * (a + b)
        else:
            lam = min(max((a * fb - b * fa) / (fb - fa), a), b)
    alpha = _recover(p, lam)
    return ProjectionSolution(alpha=alpha, lam=lam, kkt_residual=kkt_residual(p, alpha, lam))


def project_simplex(v, radius: float = 1.0):
    """Euclidean projection onto ``{x >= 0, sum x = radius}``."""
    if radius <= 0:
        raise InvalidProblem("radius must be positive")
    p = SeparableQpProblem.build(1.0, v, 0.0, radius, 1.0, radius)
    return solve_separable_qp(p).alpha


def project_box_hyperplane(v, lower, upper, sigma, z, weights=1.0):
    """Projection of ``v`` onto ``{lower <= x <= upper, <sigma, x> = z}``."""
    p = SeparableQpProblem.build(weights, v, lower, upper, sigma, z)
    return solve_separable_qp(p)
