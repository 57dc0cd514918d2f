"""Run traces: sampled time series, phase records and the worker event log."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

LOG_FIELDS = ("worker", "j", "snap_j", "t_fetch", "t_done", "t_apply", "step_sq", "f", "E")
LOG_DTYPES = {"worker": np.int64, "j": np.int64, "snap_j": np.int64}
SAMPLE_FIELDS = ("t", "j", "f", "E", "grad_norm")
CSV_COLUMNS = ("virtual_or_wall_time", "j", "f", "E", "grad_norm", "phase")


def empty_log(n):
    return {k: np.empty(n, dtype=LOG_DTYPES.get(k, np.float64)) for k in LOG_FIELDS}


class EventLog:
    """Apply records, one row per global iteration, in label order.

    Row ``i`` says worker ``worker`` fetched at ``t_fetch`` (global counter
    ``snap_j``), finished its gradient at ``t_done`` and applied it as global
    iteration ``j`` at ``t_apply``.
    """

    def __init__(self, block_bounds, limit=None):
        self.block_bounds = np.asarray(block_bounds, dtype=np.int64)
        self.limit = limit
        self.n_seen = 0
        self._chunks = []
        self._cache = None

    @property
    def capacity_left(self):
        if self.limit is None:
            return None
        return max(self.limit - sum(len(c["j"]) for c in self._chunks), 0)

    def extend(self, chunk, n_applied):
        self.n_seen += n_applied
        if len(chunk["j"]):
            self._chunks.append(chunk)
            self._cache = None

    @property
    def complete(self):
        return len(self) == self.n_seen

    def __len__(self):
        return sum(len(c["j"]) for c in self._chunks)

    def arrays(self):
        if self._cache is None:
            if self._chunks:
                self._cache = {k: np.concatenate([c[k] for c in self._chunks]) for k in LOG_FIELDS}
            else:
                self._cache = empty_log(0)
        return self._cache

    def update_counts(self):
        a = self.arrays()
        return np.bincount(a["worker"], minlength=len(self.block_bounds) - 1)

    def records(self):
        """Fetch / GradientDone / ApplyUpdate dicts in time order."""
        a = self.arrays()
        n = len(a["j"])
        if n == 0:
            return []
        t_apply = a["t_apply"]
        j_done = np.searchsorted(t_apply, a["t_done"], side="right")
        # the done event of row i precedes its own apply, so cap at its label
        j_done = np.minimum(j_done, a["j"])
        times = np.concatenate([a["t_fetch"], a["t_done"], t_apply])
        kinds = np.repeat(np.arange(3), n)
        rows = np.tile(np.arange(n), 3)
        order = np.lexsort((kinds, rows, times))
        names = ("Fetch", "GradientDone", "ApplyUpdate")
        out = []
        b = self.block_bounds
        for idx in order:
            i, kind = int(rows[idx]), int(kinds[idx])
            w = int(a["worker"][i])
            rec = {"t": float(times[idx]), "worker": w, "kind": names[kind],
                   "block": [int(b[w]), int(b[w + 1])]}
            if kind == 0:
                rec["j"] = int(a["snap_j"][i])
                rec.update(step_sq_norm=None, f=None, E=None)
            elif kind == 1:
                rec["j"] = int(j_done[i])
                rec.update(step_sq_norm=None, f=None, E=None)
            else:
                rec["j"] = int(a["j"][i]) + 1
                rec.update(step_sq_norm=float(a["step_sq"][i]), f=float(a["f"][i]), E=float(a["E"][i]))
            out.append(rec)
        return out


@dataclass
class RunTrace:
    header: dict
    clock: str = "virtual"
    samples: dict = field(default_factory=dict)
    phases: list = field(default_factory=list)
    events: EventLog | None = None
    target_hit: dict | None = None
    final: dict = field(default_factory=dict)
    monitor: dict = field(default_factory=dict)
    report: object = None

    def time_to_target(self):
        return None if self.target_hit is None else self.target_hit["t"]

    @property
    def n_samples(self):
        return len(self.samples.get("j", ()))

    def write_csv(self, path):
        s = self.samples
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for i in range(self.n_samples):
                w.writerow([repr(float(s["t"][i])), int(s["j"][i]), repr(float(s["f"][i])),
                            repr(float(s["E"][i])), repr(float(s["grad_norm"][i])), s["phase"][i]])

    def write_jsonl(self, path, max_events=None):
        recs = [] if self.events is None else self.events.records()
        if max_events is not None:
            recs = recs[:max_events]
        recs = recs + [dict(p, kind="Phase") for p in self.phases]
        recs.sort(key=lambda r: r["t"])
        with open(path, "w") as fh:
            for r in recs:
                fh.write(json.dumps(r, sort_keys=True) + "\n")

    def summary(self):
        out = {"clock": self.clock, "final": self.final, "monitor": self.monitor,
               "time_to_target": self.time_to_target(),
               "iters_to_target": None if self.target_hit is None else self.target_hit["j"],
               "n_phases": len(self.phases)}
        if self.report is not None and hasattr(self.report, "to_dict"):
            out["report"] = self.report.to_dict()
        return out
