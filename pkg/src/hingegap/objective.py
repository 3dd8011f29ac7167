"""Primal and adjoint objectives of the linear SVM with hinge loss.

The regularizer is fixed to ``lam/2 ||w||^2``. With ``Z = diag(y) X`` the
adjoint is ``D(alpha) = sum(alpha) - ||Z^T alpha||^2 / (2 lam)`` over
``Q2 = [0, 1/n]^n`` (intersected with ``<y, alpha> = 0`` when a bias is used),
and ``w(alpha) = Z^T alpha / lam`` links the two.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataio import SparseDataset

BIAS_TOL = 1e-10


@dataclass(frozen=True)
class PrimalModel:
    w: np.ndarray
    lam: float
    bias: Optional[float] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"regularization must be positive, got {self.lam}")

    @property
    def bias_mode(self) -> bool:
        return self.bias is not None

    def decision(self, ds: SparseDataset) -> np.ndarray:
        _check_dim(self.w, ds)
        out = ds.X @ self.w
        return out + self.bias if self.bias_mode else out


@dataclass(frozen=True)
class DualPoint:
    alpha: np.ndarray
    bias_mode: bool = False

    def check(self, ds: SparseDataset, tol: float = BIAS_TOL):
        """Raise ``ValueError`` unless ``alpha`` lies in Q2 for ``ds``."""
        a = self.alpha
        if a.shape != (ds.n,):
            raise ValueError(f"alpha has shape {a.shape}, dataset has n={ds.n}")
        if np.any(a < -tol) or np.any(a > 1.0 / ds.n + tol):
            raise ValueError("alpha outside [0, 1/n]^n")
        if self.bias_mode and abs(float(np.dot(ds.y, a))) > tol:
            raise ValueError("alpha violates sum_i y_i alpha_i = 0")


@dataclass(frozen=True)
class CuttingPlane:
    """Affine minorant ``<a, w> + b`` of the empirical risk."""

    a: np.ndarray
    b: float

    def __call__(self, w) -> float:
        return float(np.dot(self.a, w)) + self.b


def _check_dim(w, ds):
    if np.shape(w) != (ds.d,):
        raise ValueError(f"weight vector has shape {np.shape(w)}, dataset has d={ds.d}")


def _alpha(alpha, ds):
    a = np.asarray(getattr(alpha, "alpha", alpha), dtype=np.float64)
    if a.shape != (ds.n,):
        raise ValueError(f"alpha has shape {a.shape}, dataset has n={ds.n}")
    return a


def hinge_risk_from_scores(scores, y, b=0.0) -> float:
    return float(np.mean(np.maximum(1.0 - y * (scores + b), 0.0)))


def empirical_risk(model: PrimalModel, ds: SparseDataset) -> float:
    """Average hinge loss; a stored bias is used as is (0 without bias)."""
    return hinge_risk_from_scores(model.decision(ds), ds.y)


def _bias_from_scores(scores, y) -> float:
    # Breakpoints: positives at 1 - s_i (loss decreasing in b), negatives at
    # -1 - s_i (increasing). The right-derivative times n is the integer
    # #neg{e_i <= b} - #pos{c_i > b}.
    pos = y > 0
    c = np.sort(1.0 - scores[pos])
    e = np.sort(-1.0 - scores[~pos])
    pts = np.unique(np.concatenate((c, e)))
    n_pos, n_neg = c.size, e.size
    # one class only: the minimizing ray is b >= max c (positives) or b <= min e
    if n_pos == 0:
        return float(pts[0])
    if n_neg == 0:
        return float(pts[-1])
    right = np.searchsorted(e, pts, side="right") - (n_pos - np.searchsorted(c, pts, side="right"))
    left = np.searchsorted(e, pts, side="left") - (n_pos - np.searchsorted(c, pts, side="left"))
    # unique vertex minimizer: left slope < 0 < right slope
    j = np.flatnonzero((left < 0) & (right > 0))
    if j.size:
        return float(pts[j[0]])
    # flat segment (pts[j], pts[j+1]) with zero slope
    j = int(np.flatnonzero(right == 0)[0])
    if j + 1 < pts.size:
        return 0.5 * float(pts[j] + pts[j + 1])
    return float(pts[j])


def optimal_bias(w, ds: SparseDataset) -> float:
    """Exact minimizer of ``b -> mean([1 - y_i(<w, x_i> + b)]_+)``.

    On a flat minimizing segment the midpoint is returned; when the segment is
    unbounded (all labels equal) its finite endpoint is returned.
    """
    _check_dim(w, ds)
    return _bias_from_scores(ds.X @ np.asarray(w, dtype=np.float64), ds.y)


def primal_objective(model: PrimalModel, ds: SparseDataset) -> float:
    """``lam/2 ||w||^2 + R_emp``; bias-mode models minimize over the bias."""
    _check_dim(model.w, ds)
    scores = ds.X @ model.w
    b = _bias_from_scores(scores, ds.y) if model.bias_mode else 0.0
    return 0.5 * model.lam * float(np.dot(model.w, model.w)) + hinge_risk_from_scores(scores, ds.y, b)


def primal_from_scores(w, scores, y, lam, bias_mode) -> float:
    b = _bias_from_scores(scores, y) if bias_mode else 0.0
    return 0.5 * lam * float(np.dot(w, w)) + hinge_risk_from_scores(scores, y, b)


def zt(alpha, ds: SparseDataset) -> np.ndarray:
    """``X^T Y alpha`` (length d)."""
    return ds.X.T @ (ds.y * alpha)


def adjoint_objective(alpha, ds: SparseDataset, lam: float) -> float:
    a = _alpha(alpha, ds)
    u = zt(a, ds)
    return float(a.sum()) - float(np.dot(u, u)) / (2.0 * lam)


def adjoint_gradient(alpha, ds: SparseDataset, lam: float) -> np.ndarray:
    """``e - Y X X^T Y alpha / lam``."""
    a = _alpha(alpha, ds)
    return 1.0 - ds.y * (ds.X @ zt(a, ds)) / lam


def w_from_alpha(alpha, ds: SparseDataset, lam: float) -> np.ndarray:
    return zt(_alpha(alpha, ds), ds) / lam


def hinge_cut(model: PrimalModel, ds: SparseDataset) -> CuttingPlane:
    """Subgradient plane of the empirical risk at ``model.w``.

    Examples with margin exactly 1 take the zero element of their
    subdifferential.
    """
    scores = model.decision(ds)
    return _cut_from_scores(model.w, scores, ds)


def _cut_from_scores(w, scores, ds):
    margin_viol = 1.0 - ds.y * scores
    active = margin_viol > 0.0
    a = -(ds.X.T @ (ds.y * active)) / ds.n
    risk = float(np.sum(margin_viol[active])) / ds.n
    return CuttingPlane(a=np.asarray(a, dtype=np.float64), b=risk - float(np.dot(w, a)))


def duality_gap(model: PrimalModel, alpha: DualPoint, ds: SparseDataset) -> float:
    if model.bias_mode != alpha.bias_mode:
        raise ValueError("primal and dual points must both use, or both omit, the bias")
    return primal_objective(model, ds) - adjoint_objective(alpha, ds, model.lam)


def accuracy(model: PrimalModel, ds: SparseDataset) -> float:
    pred = np.where(model.decision(ds) > 0, 1.0, -1.0)
    return float(np.mean(pred == ds.y))
