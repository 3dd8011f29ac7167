"""Hadamard worst-case instance for cutting-plane methods.

``J(w) = max_i <a_i, w> + lam/2 ||w||^2`` with the columns ``a_i`` of
``A = d^{-1/2} [[H, -H], [-H, H]]`` (``H`` Sylvester of order d/2). Its
minimizer is ``w* = 0`` with ``J(w*) = 0``; a cutting-plane method that only
ever sees mutually orthogonal slopes has model minimum ``-1/(2 lam t)``
after t cuts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bundle
from .objective import CuttingPlane

MODES = ("prescribed", "faithful")


def _is_pow2(d) -> bool:
    return isinstance(d, (int, np.integer)) and d >= 1 and (d & (d - 1)) == 0


def hadamard(d: int) -> np.ndarray:
    """Sylvester Hadamard matrix of order ``d`` (integer entries)."""
    if not _is_pow2(d):
        raise ValueError(f"order must be a power of two, got {d}")
    H = np.ones((1, 1), dtype=np.int64)
    while H.shape[0] < d:
        H = np.block([[H, H], [H, -H]])
    return H


@dataclass(frozen=True)
class HadamardInstance:
    d: int
    A: np.ndarray  # columns are the slopes a_i
    lam: float

    def __call__(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        return float(np.max(self.A.T @ w)) + 0.5 * self.lam * float(np.dot(w, w))

    objective = __call__

    def subgradient(self, w):
        """Column attaining ``max_i <a_i, w>``; ties go to the lowest index."""
        s = self.A.T @ np.asarray(w, dtype=np.float64)
        i = int(np.argmax(s))  # argmax returns the first maximal index
        return i, self.A[:, i].copy(), float(s[i])


def build_instance(d: int, lam: float) -> HadamardInstance:
    if not _is_pow2(d) or d < 4:
        raise ValueError(f"d must be a power of two >= 4, got {d}")
    if not lam > 0:
        raise ValueError("lam must be positive")
    H = hadamard(d // 2)
    B = np.block([[H, -H], [-H, H]])  # exact integers up to here
    return HadamardInstance(d=d, A=B / math.sqrt(d), lam=float(lam))


@dataclass(frozen=True)
class AdversaryRecord:
    t: int
    Jt: float          # J_t(w_t)
    J: float           # J(w_t)
    eps_t: float       # min_{0<=t'<=t} J(w_t') - J_t(w_t)
    delta_t: float     # min_{1<=t'<=t} J(w_t') - J(w*)
    column: int        # index of the slope that entered this step
    w: np.ndarray


def run_adversary(inst: HadamardInstance, t_max: int, mode: str = "prescribed"):
    """Cutting-plane run on the instance; returns a list of ``AdversaryRecord``.

    ``prescribed`` feeds cut ``(a_t, 0)`` from the first half-block at step t;
    ``faithful`` cuts at the current iterate with the lowest-index maximizing
    column and stops once the model gap closes. Both start from ``w_0 = 0``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not (1 <= t_max < inst.d // 2):
        raise ValueError(f"t_max must satisfy 1 <= t_max < d/2 = {inst.d // 2}, got {t_max}")
    lam = inst.lam
    model = bundle.CuttingPlaneModel.empty(inst.d, lam)
    w = np.zeros(inst.d)
    J0 = inst(w)
    best_all, best_run = J0, math.inf
    out = []
    for t in range(1, t_max + 1):
        if mode == "prescribed":
            col = t - 1
            plane = CuttingPlane(a=inst.A[:, col].copy(), b=0.0)
        else:
            col, a, val = inst.subgradient(w)
            plane = CuttingPlane(a=a, b=val - float(np.dot(a, w)))
        model = bundle.resolve(bundle.add_cut(model, plane))
        w = model.w
        J = inst(w)
        best_all, best_run = min(best_all, J), min(best_run, J)
        rec = AdversaryRecord(t=t, Jt=model.Jt_value, J=J, eps_t=best_all - model.Jt_value,
                              delta_t=best_run - 0.0, column=col, w=w.copy())
        out.append(rec)
        if mode == "faithful" and rec.eps_t <= 1e-12:
            break
    return out


def check_identities(inst: HadamardInstance, records, tol: float = 1e-10):
    """Closed-form checks for a prescribed run; returns a list of failure strings."""
    fails = []
    lam = inst.lam
    for r in records:
        target = 1.0 / (2.0 * lam * r.t)
        if abs(r.Jt + target) > tol * target:
            fails.append(f"t={r.t}: J_t(w_t)={r.Jt!r}, expected {-target!r}")
        if r.eps_t < target - tol:
            fails.append(f"t={r.t}: eps_t={r.eps_t!r} below {target!r}")
        if r.delta_t < target - tol:
            fails.append(f"t={r.t}: delta_t={r.delta_t!r} below {target!r}")
        w_ref = -inst.A[:, : r.t].sum(axis=1) / (r.t * lam)
        err = float(np.max(np.abs(r.w - w_ref)))
        if err > 1e-12:
            fails.append(f"t={r.t}: w_t off the closed form by {err:.3e}")
    return fails
