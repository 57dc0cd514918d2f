"""Experiment matrix runner and plot-data emission."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .._accel import backend_name
from ..algorithms import se_acgd
from ..baselines import BaselineConfig, run_serial_gd, run_sync_parallel_pgd
from ..hyperparams import UserInputs, derive_params
from ..objective import make_objective
from ..runtime.audit import audit_log
from ..runtime.delays import DelayModel
from ..runtime.simulator import build_runtime
from .config import PARALLEL, SEACGD, SERIAL_GD, SYNC_PGD, ExperimentConfig

PLOT_COLUMNS = ("run_id", "time", "j", "f", "E")


@dataclass(frozen=True)
class Cell:
    algorithm: str
    d: int
    W: int
    tau: int
    expected_delay: float
    seed: int

    @property
    def run_id(self):
        return (f"{self.algorithm}_d{self.d}_W{self.W}_tau{self.tau}"
                f"_delay{self.expected_delay:g}_seed{self.seed}")


def expand_cells(cfg: ExperimentConfig):
    """Cross product of the config axes; SerialGD ignores workers and delays."""
    out, seen = [], set()
    for d in cfg.dims:
        for W in cfg.workers:
            for delay in cfg.expected_delays:
                for seed in cfg.seeds:
                    for alg in cfg.algorithms:
                        if alg == SERIAL_GD:
                            cell = Cell(alg, int(d), 1, 1, 0.0, int(seed))
                        else:
                            cell = Cell(alg, int(d), int(W), cfg.tau_for(int(W)), float(delay), int(seed))
                        if cell not in seen:
                            seen.add(cell)
                            out.append(cell)
    return out


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return _finite(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _objective(cfg, d):
    kw = {"d": d}
    if cfg.objective == "paper_quartic":
        kw["box_halfwidth"] = cfg.box_halfwidth
    return make_objective(cfg.objective, **kw)


def _start_point(obj):
    return obj.saddle() if hasattr(obj, "saddle") else np.zeros(obj.d)


def run_cell(cfg: ExperimentConfig, cell: Cell, out_dir):
    """Run one cell, write its trace files, return ``(row, samples)``."""
    obj = _objective(cfg, cell.d)
    x0 = _start_point(obj)
    eps = cfg.eps_for(cell.d)
    hp = derive_params(UserInputs.for_objective(obj, x0, eps, cell.tau, cell.W, delta=cfg.delta))
    target = cfg.target_for(cell.d)
    clock = "wall" if cfg.mode == PARALLEL else "virtual"
    dm = DelayModel.exponential(cell.expected_delay, cfg.victim_policy, cfg.fixed_worker, seed=cell.seed)
    common = {"target_f": target, "sample_every": cfg.sample_every, "scheduler_seed": cell.seed}
    row = {"run_id": cell.run_id, **asdict(cell), "eps": eps, "target_f": target, "clock": clock}
    if cell.algorithm == SEACGD:
        rt = build_runtime(obj, cell.W, hp, delay_model=dm, clock=clock, event_limit=cfg.event_limit, **common)
        report, trace = se_acgd(x0, rt, obj, hp, seed=cell.seed, max_iters=cfg.max_iters,
                                header={"run_id": cell.run_id})
    elif cell.algorithm == SYNC_PGD:
        bc = BaselineConfig.from_hp(SYNC_PGD, hp, seed=cell.seed)
        trace = run_sync_parallel_pgd(x0, obj, bc, cell.W, dm, cfg.max_iters or hp.t_max, clock=clock, **common)
        trace.header["run_id"] = cell.run_id
        report = trace.report
    else:
        bc = BaselineConfig.from_hp(SERIAL_GD, hp, seed=cell.seed)
        trace = run_serial_gd(x0, obj, bc, cfg.serial_gd_iters or hp.T, clock=clock, **common)
        trace.header["run_id"] = cell.run_id
        report = None
    runs = os.path.join(out_dir, "runs")
    trace.write_csv(os.path.join(runs, cell.run_id + ".csv"))
    trace.write_jsonl(os.path.join(runs, cell.run_id + ".events.jsonl"))
    hit = trace.target_hit
    row.update({
        "outcome": getattr(report, "outcome", "Completed"),
        "certificate": getattr(getattr(report, "certificate", None), "tag", None),
        "final_f": trace.final["f"], "final_time": trace.final["t"], "total_iters": trace.final["j"],
        "reached_target": hit is not None,
        "time_to_target": None if hit is None else hit["t"],
        "iters_to_target": None if hit is None else hit["j"],
        "escapes": getattr(report, "escapes", 0),
        "perturbations": getattr(report, "total_perturbations", 0),
        "corollary_violations": trace.monitor["corollary_violations"],
        "lemma_violations": trace.monitor["lemma_violations"],
        "max_staleness": trace.monitor["max_staleness"],
        "hp": hp.to_dict(),
        "error": None,
    })
    if trace.events is not None:
        row["audit"] = audit_log(trace.events, cell.tau).to_dict()
    samples = {k: np.asarray(trace.samples[k]).tolist() for k in ("t", "j", "f", "E")}
    return _clean(row), samples


def _run_cell_safe(cfg_dict, cell, out_dir):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        return run_cell(cfg, cell, out_dir)
    except Exception as exc:  # reported per cell; the run as a whole exits 1
        return {"run_id": cell.run_id, **asdict(cell), "error": f"{type(exc).__name__}: {exc}"}, None


@dataclass
class ExperimentReport:
    config: dict
    rows: list
    output_dir: str
    comparisons: list = field(default_factory=list)

    @property
    def errors(self):
        return [r for r in self.rows if r.get("error")]

    @property
    def ok(self):
        return not self.errors

    def to_dict(self):
        return {"experiment": self.config["experiment"], "backend": backend_name(), "config": self.config,
                "rows": self.rows, "comparisons": self.comparisons}


def _check_writable(out_dir):
    os.makedirs(os.path.join(out_dir, "runs"), exist_ok=True)
    probe = os.path.join(out_dir, ".write_probe")
    with open(probe, "w") as fh:
        fh.write("ok")
    os.remove(probe)


def _comparisons(rows):
    """Median time-to-target per (d, W, delay, algorithm) and sync/async ratios."""
    groups = {}
    for r in rows:
        if r.get("error"):
            continue
        key = (r["d"], r["W"], r["expected_delay"], r["algorithm"])
        groups.setdefault(key, []).append(r.get("time_to_target"))
    out = []
    for (d, W, delay, alg), vals in sorted(groups.items()):
        hit = [v for v in vals if v is not None]
        out.append({"d": d, "W": W, "expected_delay": delay, "algorithm": alg, "runs": len(vals),
                    "reached": len(hit), "median_time_to_target": float(np.median(hit)) if hit else None})
    by = {(c["d"], c["W"], c["expected_delay"], c["algorithm"]): c for c in out}
    for c in out:
        if c["algorithm"] == SEACGD:
            s = by.get((c["d"], c["W"], c["expected_delay"], SYNC_PGD))
            if s and s["median_time_to_target"] and c["median_time_to_target"]:
                c["sync_over_async"] = s["median_time_to_target"] / c["median_time_to_target"]
    return out


def run_experiment(cfg: ExperimentConfig, jobs=1, progress=None) -> ExperimentReport:
    out_dir = cfg.output_dir
    _check_writable(out_dir)
    cells = expand_cells(cfg)
    cfg_dict = cfg.to_dict()
    results = []
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_run_cell_safe, cfg_dict, c, out_dir) for c in cells]
            for c, fut in zip(cells, futs):
                results.append(fut.result())
                if progress:
                    progress(c, results[-1][0])
    else:
        for c in cells:
            results.append(_run_cell_safe(cfg_dict, c, out_dir))
            if progress:
                progress(c, results[-1][0])
    rows = [r for r, _ in results]
    report = ExperimentReport(config=cfg_dict, rows=rows, output_dir=out_dir, comparisons=_comparisons(rows))
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_clean(report.to_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_summary_csv(os.path.join(out_dir, "summary.csv"), rows)
    emit_plot_data([(r["run_id"], s) for r, s in results if s is not None], os.path.join(out_dir, "plot_data.csv"))
    return report


SUMMARY_COLUMNS = ("run_id", "algorithm", "d", "W", "tau", "expected_delay", "seed", "outcome", "final_f",
                   "time_to_target", "iters_to_target", "total_iters", "escapes", "error")


def _write_summary_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow(["" if r.get(c) is None else r.get(c) for c in SUMMARY_COLUMNS])


def _series(item, idx):
    """``(run_id, t, j, f, E)`` from a RunTrace or a ``(run_id, samples)`` pair."""
    if isinstance(item, tuple):
        run_id, s = item
    else:
        s = item.samples
        run_id = item.header.get("run_id", f"run{idx}")
    missing = [k for k in ("t", "j", "f", "E") if k not in s]
    if missing:
        raise ValueError(f"trace {run_id!r} lacks columns {missing}")
    n = {len(s[k]) for k in ("t", "j", "f", "E")}
    if len(n) != 1:
        raise ValueError(f"trace {run_id!r} has ragged columns")
    return run_id, s["t"], s["j"], s["f"], s["E"]


def emit_plot_data(traces, out):
    """Long-format CSV ``run_id,time,j,f,E``; one row per sample."""
    series = [_series(t, i) for i, t in enumerate(traces)]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLOT_COLUMNS)
        for run_id, ts, js, fs, Es in series:
            for t, j, f, E in zip(ts, js, fs, Es):
                w.writerow([run_id, repr(float(t)), int(j), repr(float(f)), repr(float(E))])
    return out
