"""Real concurrent workers on the wall clock.

One thread per worker computes block gradients on private snapshots; the
global iterate, counter and energy window change only under one condition
variable, which plays the server. Admission uses the same
earliest-deadline-first test as the simulator, so the staleness bound holds
here too. Injected latency is a real ``sleep``.

Threads live for one ``advance`` call. A worker whose update is finished
but not yet applied when the call ends parks it and applies it first thing
in the next call, exactly like an outstanding worker in the simulator.
"""
from __future__ import annotations

import threading
import time

import numpy as np

from ..errors import RunAborted
from . import kernels as K
from .simulator import RuntimeBase, SyncRuntime
from .trace import LOG_FIELDS, SAMPLE_FIELDS, empty_log


class ThreadedRuntime(RuntimeBase):
    clock = "wall"

    def _init_workers(self):
        W = self.W
        self.snap_j = np.zeros(W, dtype=np.int64)
        self.t_fetch = np.zeros(W)
        self.finish_t = np.zeros(W)
        self.outstanding = np.zeros(W, dtype=np.int8)
        self._held = [None] * W
        self._cond = threading.Condition()
        self._t0 = time.perf_counter()
        self._fail = None
        self._fail_hook = None

    def _clock(self):
        return time.perf_counter() - self._t0

    def _fetch(self, k):
        # caller holds the lock (or no worker thread is running)
        self._snaps[k] = self.store.snapshot()
        self.snap_j[k] = self.ist[K.I_J]
        self.t_fetch[k] = self._clock()
        self.outstanding[k] = 1
        self._delay[k] = self.pending[k]
        self.pending[k] = 0.0

    def advance(self, n):
        n = int(n)
        if n <= 0:
            return
        self._remaining = n
        self._log = {k: [] for k in LOG_FIELDS}
        self._smp = {k: [] for k in SAMPLE_FIELDS}
        self._log_left = self.events.capacity_left
        if not hasattr(self, "_snaps"):
            self._snaps = [None] * self.W
            self._delay = np.zeros(self.W)
        for k in range(self.W):
            if not self.outstanding[k]:
                self._fetch(k)
        threads = [threading.Thread(target=self._worker, args=(k,), daemon=True) for k in range(self.W)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        self.fst[K.F_NOW] = self._clock()
        chunk = empty_log(len(self._log["j"]))
        for k in LOG_FIELDS:
            chunk[k][:] = self._log[k]
        self.events.extend(chunk, n - self._remaining)
        cnt = len(self._smp["t"])
        self._take_samples(cnt, self._smp)
        if self._fail is not None:
            err, self._fail = self._fail, None
            raise RunAborted(f"worker failed: {err!r}", trace=self.trace()) from err

    def _worker(self, k):
        cond = self._cond
        try:
            while True:
                if self._held[k] is None:
                    if self._fail_hook is not None:
                        self._fail_hook(k)
                    u = self.store.compute_update(self._snaps[k], k, self.eta)
                    if self._delay[k] > 0:
                        time.sleep(self._delay[k])
                    self._held[k] = (u, self._clock())
                u, t_done = self._held[k]
                with cond:
                    while True:
                        if self._remaining <= 0 or self._fail is not None:
                            return
                        if K.admissible(k, self.snap_j, self.outstanding, self.ist[K.I_J], self.tau):
                            break
                        cond.wait()
                    self._apply(k, u, t_done)
                    self._held[k] = None
                    self._snaps[k] = None
                    if self._remaining > 0:
                        self._fetch(k)
                    cond.notify_all()
                    if self._remaining <= 0:
                        return
        except BaseException as exc:  # surfaces in advance()
            with cond:
                self._fail = exc
                cond.notify_all()

    def _apply(self, k, u, t_done):
        ist = self.ist
        j = int(ist[K.I_J])
        stale = j - int(self.snap_j[k])
        ist[K.I_MAXSTALE] = max(ist[K.I_MAXSTALE], stale)
        if stale > self.tau:
            ist[K.I_NSTALE] += 1
        sq = self.store.apply_update(k, u)
        f_new = self.store.f()
        E_new = K.monitor_step(ist, self.fst, self.buf, f_new, sq, self.L, self.lemma_coef, self.descent_tol)
        now = self._clock()
        self.outstanding[k] = 0
        if self._log_left is None or len(self._log["j"]) < self._log_left:
            for key, val in (("worker", k), ("j", j), ("snap_j", self.snap_j[k]), ("t_fetch", self.t_fetch[k]),
                             ("t_done", t_done), ("t_apply", now), ("step_sq", sq), ("f", f_new), ("E", E_new)):
                self._log[key].append(val)
        j += 1
        ist[K.I_J] = j
        self.fst[K.F_NOW] = now
        if ist[K.I_HITJ] < 0 and f_new <= self.target_f:
            ist[K.I_HITJ] = j
            self.fst[K.F_HITT] = now
        if j % self.sample_every == 0:
            for key, val in (("t", now), ("j", j), ("f", f_new), ("E", E_new), ("grad_norm", self.store.grad_norm())):
                self._smp[key].append(val)
        if j % self.W == 0:
            dv, dw = self.injector.draw(1)
            self.pending[dw[0]] += dv[0]
        self._remaining -= 1


class WallSyncRuntime(SyncRuntime):
    """Synchronous baseline on the wall clock.

    The full step is computed in-process; the barrier's extra wait for a
    delayed worker is a real ``sleep`` of the largest pending latency.
    """

    clock = "wall"

    def start(self, x0):
        self._t0 = time.perf_counter()
        return super().start(x0)

    def advance(self, n):
        n = int(n)
        if n <= 0:
            return
        dv, dw = self.injector.draw(n)
        ist, fst, st = self.ist, self.fst, self.store
        for it in range(n):
            wait = float(np.max(self.pending))
            self.pending[:] = 0.0
            sq = st.full_update(self.eta)
            if wait > 0:
                time.sleep(wait)
            now = time.perf_counter() - self._t0
            f_new = st.f()
            E_new = K.monitor_step(ist, fst, self.buf, f_new, sq, self.L, self.lemma_coef, self.descent_tol)
            j = int(ist[K.I_J]) + 1
            ist[K.I_J] = j
            fst[K.F_NOW] = now
            if ist[K.I_HITJ] < 0 and f_new <= self.target_f:
                ist[K.I_HITJ] = j
                fst[K.F_HITT] = now
            if j % self.sample_every == 0:
                self._take_samples(1, {"t": [now], "j": [j], "f": [f_new], "E": [E_new],
                                       "grad_norm": [st.grad_norm()]})
            self.pending[dw[it]] += dv[it]
