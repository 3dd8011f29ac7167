"""Per-iteration convergence records and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from typing import Optional

CSV_FIELDS = ("iter", "wall_seconds", "J", "D", "gap", "eps_t", "err_t", "test_acc")


@dataclass
class ConvergenceRecord:
    iter: int
    wall_seconds: float
    J: float
    D: Optional[float] = None
    gap: Optional[float] = None
    eps_t: Optional[float] = None
    err_t: Optional[float] = None
    test_acc: Optional[float] = None

    def row(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


class Trace(list):
    """List of records plus run metadata (``converged``, ``info``)."""

    def __init__(self, records=(), converged=False, info=None):
        super().__init__(records)
        self.converged = converged
        self.info = dict(info or {})

    def column(self, name):
        return [getattr(r, name) for r in self]


def write_csv(trace, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for rec in trace:
        writer.writerow(rec.row())


def read_csv(fh):
    out = []
    for row in csv.DictReader(fh):
        vals = {k: (None if row[k] == "" else float(row[k])) for k in CSV_FIELDS}
        vals["iter"] = int(vals["iter"])
        out.append(ConvergenceRecord(**vals))
    return out
