"""Deterministic discrete-event executors on a virtual clock.

``SimulatedRuntime`` runs the asynchronous protocol: each worker fetches
the global iterate, spends ``|block| / d`` virtual units (plus any injected
latency) on its block gradient, then hands the update to the server. The
server applies finished updates in time order subject to an
earliest-deadline-first admission test, which keeps every applied snapshot
at most ``tau`` iterations old. ``SyncRuntime`` is the barrier baseline.

Drivers talk to both through the same small interface: ``start``,
``advance(n)``, ``perturb``, ``checkpoint`` / ``restore`` and read-only
accessors for ``j``, ``now``, ``f``, ``energy``.
"""
from __future__ import annotations

import math

import numpy as np

from .._accel import backend_name
from ..errors import ConfigurationError
from ..hamiltonian import HamiltonianWindow
from ..objective import AggregateObjective
from . import kernels as K
from .delays import DelayModel
from .partition import BlockPartition, partition_blocks
from .stores import AggregateStore, make_store
from .trace import SAMPLE_FIELDS, EventLog, RunTrace, empty_log


class RuntimeBase:
    clock = "virtual"
    mode = "async"

    def __init__(self, objective, partition: BlockPartition, eta, tau, L=None, delay_model=None,
                 scheduler_seed=0, engine="auto", sample_every=1000, event_limit=None,
                 target_f=-math.inf, descent_tol=1e-9, lemma_coef=None, store="auto",
                 record_iterates=False):
        if not (eta > 0 or (eta == 0 and self.mode == "sync")):
            raise ConfigurationError("step size must be positive")
        if partition.d != objective.d:
            raise ConfigurationError("partition and objective disagree on d")
        tau = int(tau)
        if tau < max(partition.W - 1, 1) and self.mode == "async":
            raise ConfigurationError(f"tau={tau} must be >= max(W-1, 1)")
        self.objective = objective
        self.partition = partition
        self.W = partition.W
        self.eta = float(eta)
        self.tau = max(tau, 1)
        self.L = float(objective.spec.lipschitz_L if L is None else L)
        if lemma_coef is None:
            lemma_coef = 0.0 if self.eta == 0 else self.L * (1.0 / (self.eta * self.L) - math.sqrt(self.tau) - 0.5)
        self.lemma_coef = float(lemma_coef)
        self.delay_model = delay_model or DelayModel()
        self.scheduler_seed = int(scheduler_seed)
        if engine == "auto":
            engine = "fused" if isinstance(objective, AggregateObjective) else "python"
        if engine not in ("fused", "python"):
            raise ConfigurationError(f"unknown engine {engine!r}")
        if engine == "fused" and not isinstance(objective, AggregateObjective):
            raise ConfigurationError("the fused engine needs an aggregate objective")
        if engine == "fused" and store == "dense":
            raise ConfigurationError("the fused engine runs on the aggregate store only")
        self.engine = engine
        self.store_kind = "aggregate" if engine == "fused" else store
        self.sample_every = max(int(sample_every), 1)
        self.event_limit = event_limit
        self.target_f = float(target_f)
        self.descent_tol = float(descent_tol)
        if record_iterates and engine == "fused":
            raise ConfigurationError("iterate recording needs the python engine")
        self.record_iterates = bool(record_iterates)
        self.iterates = []
        self.phase = "LG"
        self.store = None

    # -- lifecycle -------------------------------------------------------
    def _store_partition(self):
        return self.partition

    def start(self, x0):
        part = self._store_partition()
        self.store = make_store(self.objective, part, x0, self.store_kind)
        self.buf = np.zeros(self.tau)
        self.ist, self.fst = K.new_counters()
        f0 = self.store.f()
        self.fst[K.F_F] = f0
        self.fst[K.F_E] = f0
        if f0 <= self.target_f:
            self.ist[K.I_HITJ] = 0
            self.fst[K.F_HITT] = 0.0
        self.comp_time = self.partition.sizes.astype(np.float64) / self.partition.d
        self.pending = np.zeros(self.W)
        self.injector = self.delay_model.injector(self.W, stream=self.scheduler_seed)
        self.events = EventLog(self.partition.bounds, self.event_limit) if self.mode == "async" else None
        self._samples = {k: [] for k in SAMPLE_FIELDS}
        self._sample_phase = []
        self.iterates = [self.store.materialize()] if self.record_iterates else []
        self._init_workers()
        self.record_sample()
        return self

    def _init_workers(self):
        pass

    # -- accessors -------------------------------------------------------
    @property
    def j(self):
        return int(self.ist[K.I_J])

    @property
    def now(self):
        return float(self.fst[K.F_NOW])

    @property
    def f(self):
        return float(self.fst[K.F_F])

    @property
    def energy(self):
        return float(self.fst[K.F_E])

    def grad_norm(self):
        return self.store.grad_norm()

    def materialize(self):
        return self.store.materialize()

    def window(self):
        return HamiltonianWindow(self.tau, self.buf.copy(), int(self.ist[K.I_HEAD]), self.f, self.j)

    @property
    def target_hit(self):
        if self.ist[K.I_HITJ] < 0:
            return None
        return {"t": float(self.fst[K.F_HITT]), "j": int(self.ist[K.I_HITJ])}

    def monitor(self):
        return {"corollary_violations": int(self.ist[K.I_NCOR]),
                "lemma_violations": int(self.ist[K.I_NLEM]),
                "min_corollary_slack": float(self.fst[K.F_MINCOR]),
                "min_lemma_slack": float(self.fst[K.F_MINLEM]),
                "max_staleness": int(self.ist[K.I_MAXSTALE]),
                "staleness_violations": int(self.ist[K.I_NSTALE]),
                "descent_tol": self.descent_tol}

    # -- driver commands -------------------------------------------------
    def perturb(self, xi):
        """Move the iterate by ``xi`` and restart the energy window there."""
        self.store.perturb(np.asarray(xi, dtype=np.float64))
        if self.record_iterates:
            self.iterates.append(self.store.materialize())
        f = self.store.f()
        self.buf[:] = 0.0
        self.ist[K.I_HEAD] = 0
        self.fst[K.F_F] = f
        self.fst[K.F_E] = f
        if self.ist[K.I_HITJ] < 0 and f <= self.target_f:
            self.ist[K.I_HITJ] = self.j
            self.fst[K.F_HITT] = self.now

    def checkpoint(self):
        return (self.store.checkpoint(), self.buf.copy(), int(self.ist[K.I_HEAD]),
                float(self.fst[K.F_F]), float(self.fst[K.F_E]))

    def restore(self, cp):
        store_cp, buf, head, f, E = cp
        self.store.restore(store_cp)
        self.buf[:] = buf
        self.ist[K.I_HEAD] = head
        self.fst[K.F_F] = f
        self.fst[K.F_E] = E

    def record_sample(self, phase=None):
        s = self._samples
        s["t"].append(self.now)
        s["j"].append(self.j)
        s["f"].append(self.f)
        s["E"].append(self.energy)
        s["grad_norm"].append(self.grad_norm())
        self._sample_phase.append(phase or self.phase)

    def _take_samples(self, n, arrays):
        for k in SAMPLE_FIELDS:
            self._samples[k].extend(np.asarray(arrays[k])[:n].tolist())
        self._sample_phase.extend([self.phase] * n)

    def _sample_buffers(self, n):
        cap = n // self.sample_every + 1
        return {"t": np.empty(cap), "j": np.empty(cap, dtype=np.int64), "f": np.empty(cap),
                "E": np.empty(cap), "grad_norm": np.empty(cap)}

    def samples(self):
        out = {k: np.asarray(v) for k, v in self._samples.items()}
        out["phase"] = list(self._sample_phase)
        return out

    def advance(self, n):
        raise NotImplementedError

    def header(self):
        return {"mode": self.mode, "engine": self.engine, "backend": backend_name(), "W": self.W,
                "tau": self.tau, "eta": self.eta, "L": self.L, "d": self.partition.d,
                "delay_model": self.delay_model.to_dict(), "scheduler_seed": self.scheduler_seed,
                "clock": self.clock, "sample_every": self.sample_every}

    def trace(self, header=None, phases=(), report=None):
        h = self.header()
        if header:
            h.update(header)
        return RunTrace(header=h, clock=self.clock, samples=self.samples(), phases=list(phases),
                        events=self.events, target_hit=self.target_hit,
                        final={"t": self.now, "j": self.j, "f": self.f, "E": self.energy,
                               "grad_norm": self.grad_norm()},
                        monitor=self.monitor(), report=report)


class SimulatedRuntime(RuntimeBase):
    """Asynchronous workers on a virtual clock; bit-reproducible."""

    def _init_workers(self):
        W = self.W
        self.snap_j = np.zeros(W, dtype=np.int64)
        self.t_fetch = np.zeros(W)
        self.finish_t = np.zeros(W)
        self.outstanding = np.zeros(W, dtype=np.int8)
        if self.engine == "fused":
            self.snap_z = np.zeros((W, len(self.store.z)))
        else:
            self.snaps = [None] * W

    def _delays_for(self, n):
        j = self.j
        return self.injector.draw((j + n) // self.W - j // self.W)

    def _log_buffers(self, n):
        left = self.events.capacity_left
        return empty_log(n if left is None else min(n, left))

    def advance(self, n):
        n = int(n)
        if n <= 0:
            return
        if self.store is None:
            raise ConfigurationError("call start(x0) first")
        dv, dw = self._delays_for(n)
        log = self._log_buffers(n)
        smp = self._sample_buffers(n)
        self.ist[K.I_NLOG] = 0
        self.ist[K.I_NSAMP] = 0
        if self.engine == "fused":
            self._advance_fused(n, dv, dw, log, smp)
        else:
            self._advance_python(n, dv, dw, log, smp)
        nl = int(self.ist[K.I_NLOG])
        self.events.extend({k: v[:nl] for k, v in log.items()}, n)
        self._take_samples(int(self.ist[K.I_NSAMP]), smp)

    def _advance_fused(self, n, dv, dw, log, smp):
        st = self.store
        K.advance_aggregate(
            n, self.W, self.tau, self.eta, self.L, self.lemma_coef, self.descent_tol, self.target_f,
            st.block_ptr, st.seg_group, st.seg_len, st.group_len, st.weights, st.params,
            st.outer_grad, st.outer_value, st.offsets, st.z, self.snap_z, self.snap_j, self.t_fetch,
            self.finish_t, self.comp_time, self.pending, self.outstanding, self.buf, self.ist, self.fst,
            dv, dw, log["worker"], log["j"], log["snap_j"], log["t_fetch"], log["t_done"], log["t_apply"],
            log["step_sq"], log["f"], log["E"], self.sample_every,
            smp["t"], smp["j"], smp["f"], smp["E"], smp["grad_norm"], st.gbuf, st.ubuf)

    def _fetch(self, k, now):
        self.snaps[k] = self.store.snapshot()
        self.snap_j[k] = self.ist[K.I_J]
        self.t_fetch[k] = now
        self.finish_t[k] = now + self.comp_time[k] + self.pending[k]
        self.pending[k] = 0.0
        self.outstanding[k] = 1

    def _advance_python(self, n, dv, dw, log, smp):
        # mirrors kernels.advance_aggregate step for step
        ist, fst, st = self.ist, self.fst, self.store
        now = fst[K.F_NOW]
        for k in range(self.W):
            if not self.outstanding[k]:
                self._fetch(k, now)
        rounds = 0
        log_cap = len(log["j"])
        samp_cap = len(smp["t"])
        for it in range(n):
            j = int(ist[K.I_J])
            k, now = K.edf_select(self.finish_t, self.snap_j, self.outstanding, j, self.tau, now)
            stale = j - int(self.snap_j[k])
            ist[K.I_MAXSTALE] = max(ist[K.I_MAXSTALE], stale)
            if stale > self.tau:
                ist[K.I_NSTALE] += 1
            u = st.compute_update(self.snaps[k], k, self.eta)
            sq = st.apply_update(k, u)
            if self.record_iterates:
                self.iterates.append(st.materialize())
            f_new = st.f()
            E_new = K.monitor_step(ist, fst, self.buf, f_new, sq, self.L, self.lemma_coef, self.descent_tol)
            self.outstanding[k] = 0
            self.snaps[k] = None
            nl = int(ist[K.I_NLOG])
            if nl < log_cap:
                for key, val in (("worker", k), ("j", j), ("snap_j", self.snap_j[k]),
                                 ("t_fetch", self.t_fetch[k]), ("t_done", self.finish_t[k]),
                                 ("t_apply", now), ("step_sq", sq), ("f", f_new), ("E", E_new)):
                    log[key][nl] = val
                ist[K.I_NLOG] = nl + 1
            j += 1
            ist[K.I_J] = j
            if ist[K.I_HITJ] < 0 and f_new <= self.target_f:
                ist[K.I_HITJ] = j
                fst[K.F_HITT] = now
            ns = int(ist[K.I_NSAMP])
            if j % self.sample_every == 0 and ns < samp_cap:
                for key, val in (("t", now), ("j", j), ("f", f_new), ("E", E_new),
                                 ("grad_norm", st.grad_norm())):
                    smp[key][ns] = val
                ist[K.I_NSAMP] = ns + 1
            if j % self.W == 0:
                self.pending[dw[rounds]] += dv[rounds]
                rounds += 1
            if it + 1 < n:
                self._fetch(k, now)
        fst[K.F_NOW] = now


class SyncRuntime(RuntimeBase):
    """Barrier-synchronised full-gradient steps (the synchronous baseline).

    Iterates are computed with a single-block store, so they match serial
    gradient descent exactly; ``W`` and the delay model only shape the clock.
    """

    mode = "sync"

    def _store_partition(self):
        return partition_blocks(self.partition.d, 1)

    def advance(self, n):
        n = int(n)
        if n <= 0:
            return
        dv, dw = self.injector.draw(n)
        smp = self._sample_buffers(n)
        self.ist[K.I_NSAMP] = 0
        if self.engine == "fused":
            st = self.store
            K.sync_aggregate(n, self.eta, self.L, self.lemma_coef, self.descent_tol, self.target_f,
                             st.n_seg, st.seg_group, st.seg_len, st.group_len, st.weights, st.params,
                             st.outer_grad, st.outer_value, st.offsets, st.z, self.comp_time, self.pending,
                             self.buf, self.ist, self.fst, dv, dw, self.sample_every,
                             smp["t"], smp["j"], smp["f"], smp["E"], smp["grad_norm"],
                             st.gbuf, st.ubuf, np.empty_like(st.z))
        else:
            self._advance_python(n, dv, dw, smp)
        self._take_samples(int(self.ist[K.I_NSAMP]), smp)

    def _advance_python(self, n, dv, dw, smp):
        ist, fst, st = self.ist, self.fst, self.store
        now = fst[K.F_NOW]
        samp_cap = len(smp["t"])
        for it in range(n):
            span = float(np.max(self.comp_time + self.pending))
            self.pending[:] = 0.0
            now += span
            sq = st.full_update(self.eta)
            if self.record_iterates:
                self.iterates.append(st.materialize())
            f_new = st.f()
            E_new = K.monitor_step(ist, fst, self.buf, f_new, sq, self.L, self.lemma_coef, self.descent_tol)
            j = int(ist[K.I_J]) + 1
            ist[K.I_J] = j
            if ist[K.I_HITJ] < 0 and f_new <= self.target_f:
                ist[K.I_HITJ] = j
                fst[K.F_HITT] = now
            ns = int(ist[K.I_NSAMP])
            if j % self.sample_every == 0 and ns < samp_cap:
                for key, val in (("t", now), ("j", j), ("f", f_new), ("E", E_new),
                                 ("grad_norm", st.grad_norm())):
                    smp[key][ns] = val
                ist[K.I_NSAMP] = ns + 1
            self.pending[dw[it]] += dv[it]
        fst[K.F_NOW] = now


def build_runtime(objective, W, hp=None, *, eta=None, tau=None, mode="async", clock="virtual", **kwargs):
    """Runtime for ``objective`` split over ``W`` workers.

    ``hp`` supplies ``eta``, ``tau``, ``L`` and the lemma coefficient unless
    overridden. ``mode`` is ``"async"`` or ``"sync"``; ``clock="wall"``
    selects the threaded executors.
    """
    if hp is not None:
        eta = hp.eta if eta is None else eta
        tau = hp.tau if tau is None else tau
        kwargs.setdefault("L", hp.L)
    if eta is None or tau is None:
        raise ConfigurationError("need eta and tau, directly or through hp")
    partition = partition_blocks(objective.d, W)
    if mode == "sync":
        if clock == "wall":
            from .parallel import WallSyncRuntime
            return WallSyncRuntime(objective, partition, eta, tau, **kwargs)
        return SyncRuntime(objective, partition, eta, tau, **kwargs)
    if clock == "wall":
        from .parallel import ThreadedRuntime
        return ThreadedRuntime(objective, partition, eta, tau, **kwargs)
    return SimulatedRuntime(objective, partition, eta, tau, **kwargs)
