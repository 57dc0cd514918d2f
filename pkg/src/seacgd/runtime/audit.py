"""Post-hoc verification of the bounded-staleness and coverage contracts."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .._accel import njit


@njit
def block_ages(worker, j, snap, W):
    """Per-block snapshot ages ``D_i(p)`` for every apply row.

    The age of block ``p`` for a snapshot taken at counter ``s`` and applied
    as iteration ``j`` is ``j - q`` where ``q`` is the first update of ``p``
    at or after ``s`` (zero if ``p`` was not touched in between).
    """
    n = j.shape[0]
    counts = np.zeros(W + 1, dtype=np.int64)
    for i in range(n):
        counts[worker[i] + 1] += 1
    ptr = np.cumsum(counts)
    labels = np.empty(n, dtype=np.int64)
    fill = ptr[:-1].copy()
    for i in range(n):
        w = worker[i]
        labels[fill[w]] = j[i]
        fill[w] += 1
    ages = np.zeros((n, W), dtype=np.int64)
    for i in range(n):
        for p in range(W):
            lab = labels[ptr[p]:ptr[p + 1]]
            q = np.searchsorted(lab, snap[i])
            if q < lab.shape[0] and lab[q] < j[i]:
                ages[i, p] = j[i] - lab[q]
    return ages


@dataclass(frozen=True)
class AuditReport:
    n_updates: int
    tau: int
    max_staleness: int
    staleness_violations: int
    own_block_fresh: bool
    coverage_ok: bool
    worst_gap: int
    complete: bool

    @property
    def ok(self):
        return self.staleness_violations == 0 and self.own_block_fresh and self.coverage_ok

    def to_dict(self):
        out = asdict(self)
        out["ok"] = self.ok
        return out


def audit_log(events, tau) -> AuditReport:
    """Check ``max_p D_i(p) <= tau`` per apply and that every run of ``tau + 1``
    consecutive iterations updates every block.

    Coverage of the trailing window is only judged on complete logs.
    """
    a = events.arrays()
    W = len(events.block_bounds) - 1
    n = len(a["j"])
    if n == 0:
        return AuditReport(0, tau, 0, 0, True, True, 0, events.complete)
    if not np.array_equal(a["j"], np.arange(a["j"][0], a["j"][0] + n)):
        raise ValueError("event log labels are not consecutive")
    ages = block_ages(a["worker"], a["j"], a["snap_j"], W)
    mx = ages.max(axis=1)
    own_fresh = bool(np.all(ages[np.arange(n), a["worker"]] == 0))
    worst = 0
    cover = True
    for p in range(W):
        lab = a["j"][a["worker"] == p]
        if lab.size == 0:
            cover = cover and n < tau + 1
            continue
        edges = [lab[0] - a["j"][0]] + list(np.diff(lab) - 1)
        if events.complete:
            edges.append(a["j"][-1] - lab[-1])
        gap = int(max(edges))  # longest run of iterations without block p
        worst = max(worst, gap)
        if gap > tau:
            cover = False
    return AuditReport(n_updates=n, tau=int(tau), max_staleness=int(mx.max()),
                       staleness_violations=int(np.sum(mx > tau)), own_block_fresh=own_fresh,
                       coverage_ok=cover, worst_gap=worst, complete=events.complete)
