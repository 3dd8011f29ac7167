"""Sparse binary-classification datasets in LIBSVM text format."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class ParseError(ValueError):
    """Malformed LIBSVM input; ``line`` is the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True, eq=False)
class SparseDataset:
    """Row-sparse examples ``X`` (n x d, CSR) with labels ``y`` in {+1, -1}.

    Arrays are made read-only on construction so a dataset can be shared
    freely between solvers and threads.
    """

    X: sp.csr_matrix
    y: np.ndarray
    r_max: float

    def __post_init__(self):
        for arr in (self.X.data, self.X.indices, self.X.indptr, self.y):
            arr.flags.writeable = False

    @classmethod
    def from_arrays(cls, X, y, n_features=None) -> "SparseDataset":
        """Build from a dense or sparse matrix and a label vector.

        Labels are mapped by sign; a zero label is rejected.
        """
        X = sp.csr_matrix(X, dtype=np.float64)
        n, d = X.shape
        if n_features is not None:
            if n_features < d:
                raise ValueError(f"n_features={n_features} is smaller than the data width {d}")
            X = sp.csr_matrix((X.data, X.indices, X.indptr), shape=(n, n_features))
        X.sum_duplicates()
        X.sort_indices()
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.shape[0] != n:
            raise ValueError(f"{y.shape[0]} labels for {n} rows")
        if np.any(y == 0) or not np.all(np.isfinite(y)):
            raise ValueError("labels must be finite and nonzero")
        y = np.where(y > 0, 1.0, -1.0)
        return cls(X=X.copy(), y=y, r_max=_row_norm_max(X))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def row(self, i):
        """Return ``(indices, values)`` of row ``i`` with 1-based indices."""
        lo, hi = self.X.indptr[i], self.X.indptr[i + 1]
        return self.X.indices[lo:hi] + 1, self.X.data[lo:hi]

    def with_dimension(self, d: int) -> "SparseDataset":
        """Same examples embedded in ``d >= self.d`` features."""
        return SparseDataset.from_arrays(self.X, self.y, n_features=d)

    def validate(self):
        """Re-check every invariant; raises ``ValueError`` on the first failure."""
        X = self.X
        for i in range(self.n):
            idx = X.indices[X.indptr[i]:X.indptr[i + 1]]
            if idx.size and (idx[0] < 0 or idx[-1] >= self.d):
                raise ValueError(f"row {i}: feature index out of range")
            if np.any(np.diff(idx) <= 0):
                raise ValueError(f"row {i}: indices not strictly increasing")
        if not np.all(np.abs(self.y) == 1.0):
            raise ValueError("labels must be +1 or -1")
        r = _row_norm_max(X)
        if abs(r - self.r_max) > 1e-12 * max(1.0, r):
            raise ValueError(f"stored r_max {self.r_max} != recomputed {r}")


def _row_norm_max(X) -> float:
    if X.shape[0] == 0:
        return 0.0
    sq = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    return float(np.sqrt(sq.max()))


def max_row_norm(ds: SparseDataset) -> float:
    """Largest Euclidean row norm ``max_i ||x_i||``."""
    if ds.n < 1:
        raise ValueError("empty dataset")
    return _row_norm_max(ds.X)


def parse_libsvm(text, n_features=None) -> SparseDataset:
    """Parse LIBSVM ``<label> <idx>:<val> ...`` lines.

    ``text`` may be ``bytes`` or ``str``. Indices are 1-based and must
    strictly increase within a line; ``#`` starts a comment. Blank lines are
    skipped, so row ``i`` of the result is the ``i``-th data line.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    labels = []
    indptr = [0]
    indices = []
    values = []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
        if label == 0 or not np.isfinite(label):
            raise ParseError(f"label must be nonzero and finite, got {tokens[0]!r}", lineno)
        labels.append(1.0 if label > 0 else -1.0)
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"feature index {idx} < 1", lineno)
            if idx <= prev:
                raise ParseError(f"feature indices not strictly increasing ({prev} then {idx})", lineno)
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        indptr.append(len(indices))
    if not labels:
        raise ParseError("no examples in input")

    d_seen = (max(indices) + 1) if indices else 0
    if n_features is None:
        d = d_seen
    elif n_features < d_seen:
        raise ParseError(f"feature index {d_seen} exceeds n_features={n_features}")
    else:
        d = n_features
    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int32),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), d),
    )
    return SparseDataset(X=X, y=np.asarray(labels), r_max=_row_norm_max(X))


def load_libsvm(path, n_features=None) -> SparseDataset:
    return parse_libsvm(Path(path).read_bytes(), n_features=n_features)


def to_libsvm(ds: SparseDataset) -> str:
    """Serialize back to LIBSVM text; values use ``repr`` so parsing round-trips."""
    out = []
    for i in range(ds.n):
        idx, val = ds.row(i)
        feats = " ".join(f"{j}:{v!r}" for j, v in zip(idx.tolist(), val.tolist()))
        lab = "+1" if ds.y[i] > 0 else "-1"
        out.append(f"{lab} {feats}".rstrip())
    return "\n".join(out) + "\n"
