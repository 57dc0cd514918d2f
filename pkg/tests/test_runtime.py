import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seacgd.errors import ConfigurationError, ContractViolation, RunAborted
from seacgd.hamiltonian import HamiltonianWindow
from seacgd.hyperparams import UserInputs, derive_params
from seacgd.objective import PaperQuartic
from seacgd.runtime import (FIXED_WORKER, ROUND_ROBIN, DelayedSnapshot, DelayModel, EventLog, SimulatedRuntime,
                            SyncRuntime, apply_update, audit_log, block_ages, build_runtime,
                            partition_blocks, sw_acgd_step)
from seacgd.runtime.parallel import ThreadedRuntime
from seacgd.runtime.trace import LOG_FIELDS, empty_log

from conftest import HalfSquare


def quartic_hp(d, W, tau, eps=0.1):
    obj = PaperQuartic(d)
    hp = derive_params(UserInputs.for_objective(obj, obj.saddle(), eps, tau, W))
    return obj, hp


def off_saddle(obj, seed=0):
    rng = np.random.default_rng(seed)
    return obj.saddle() + rng.uniform(-0.3, 0.3, obj.d)


def run(obj, hp, W, n, x0, **kw):
    rt = build_runtime(obj, W, hp, **kw)
    rt.start(x0)
    rt.advance(n)
    return rt


class TestPartition:
    def test_even(self):
        p = partition_blocks(4, 2)
        assert p.blocks == (slice(0, 2), slice(2, 4))

    def test_remainder_first(self):
        assert partition_blocks(5, 2).blocks == (slice(0, 3), slice(3, 5))

    def test_singletons(self):
        assert partition_blocks(3, 3).blocks == (slice(0, 1), slice(1, 2), slice(2, 3))

    def test_too_many_workers(self):
        with pytest.raises(ConfigurationError):
            partition_blocks(2, 3)

    @settings(max_examples=200, deadline=None)
    @given(d=st.integers(1, 10_000), W=st.integers(1, 64))
    def test_cover(self, d, W):
        if W > d:
            return
        p = partition_blocks(d, W)
        s = p.sizes
        assert s.sum() == d and s.min() >= 1 and s.max() - s.min() <= 1
        assert p.bounds[0] == 0 and p.bounds[-1] == d
        assert all(p.owner(int(b.start)) == i for i, b in enumerate(p.blocks))


class TestOps:
    def test_sw_step(self, half_square):
        snap = DelayedSnapshot(0, np.array([1.0, 2.0]), [0, 0], 0)
        np.testing.assert_array_equal(sw_acgd_step(snap, half_square, 0.1, [0]), [-0.1, 0.0])

    def test_sw_step_saddle(self):
        obj = PaperQuartic(6)
        for block in (slice(0, 3), slice(3, 6), slice(2, 5)):
            assert np.all(sw_acgd_step(obj.saddle(), obj, 0.3, block) == 0)

    def test_sw_step_zero_eta(self, half_square):
        assert np.all(sw_acgd_step(np.array([5.0, -3.0]), half_square, 0.0, slice(0, 2)) == 0)

    def test_snapshot_own_block(self):
        with pytest.raises(ContractViolation):
            DelayedSnapshot(1, np.zeros(2), [0, 1], 0)

    def test_apply_zero(self, half_square):
        w = HamiltonianWindow(2, current_f=2.5)
        x, w2 = apply_update(np.array([1.0, 2.0]), np.zeros(2), w, half_square)
        np.testing.assert_array_equal(x, [1.0, 2.0])
        assert w2.current_j == 1 and w2.norms()[-1] == 0.0

    def test_apply_example(self, half_square):
        w = HamiltonianWindow(2, current_f=2.5)
        x, w2 = apply_update(np.array([1.0, 2.0]), np.array([-0.1, 0.0]), w, half_square, block=[0])
        np.testing.assert_allclose(x, [0.9, 2.0], rtol=0, atol=1e-15)
        assert w2.current_j == w.current_j + 1
        assert w2.norms()[-1] == pytest.approx(0.01, abs=1e-15)
        assert w2.current_f == pytest.approx(0.5 * (0.81 + 4))

    def test_commute(self, half_square):
        w = HamiltonianWindow(1)
        x0 = np.array([1.0, 2.0])
        a, b = np.array([-0.1, 0.0]), np.array([0.0, 0.3])
        xa, _ = apply_update(apply_update(x0, a, w, half_square)[0], b, w, half_square)
        xb, _ = apply_update(apply_update(x0, b, w, half_square)[0], a, w, half_square)
        np.testing.assert_array_equal(xa, xb)

    def test_apply_off_block(self, half_square):
        with pytest.raises(ContractViolation):
            apply_update(np.zeros(2), np.array([1.0, 1.0]), HamiltonianWindow(1), half_square, block=[0])


class TestDelays:
    def test_none(self):
        v, w = DelayModel().injector(4).draw(10)
        assert np.all(v == 0)

    def test_round_robin(self):
        inj = DelayModel.exponential(0.05, ROUND_ROBIN, seed=3).injector(3)
        _, w1 = inj.draw(4)
        _, w2 = inj.draw(3)
        np.testing.assert_array_equal(np.r_[w1, w2], [0, 1, 2, 0, 1, 2, 0])

    def test_mean_and_determinism(self):
        m = DelayModel.exponential(0.05, seed=7)
        v1, _ = m.injector(8, stream=1).draw(200_000)
        v2, _ = m.injector(8, stream=1).draw(200_000)
        np.testing.assert_array_equal(v1, v2)
        assert v1.mean() == pytest.approx(0.05, rel=0.01)

    def test_bad(self):
        with pytest.raises(ConfigurationError):
            DelayModel.exponential(0.1, FIXED_WORKER, fixed_worker=5).injector(4)
        with pytest.raises(ConfigurationError):
            DelayModel(expected_delay=-1.0)
        with pytest.raises(ConfigurationError):
            DelayModel(kind="Weibull")


class TestSimulator:
    def test_w2_tau1_alternation(self):
        obj, hp = quartic_hp(10, 2, 1)
        for engine in ("fused", "python"):
            rt = run(obj, hp, 2, 100, off_saddle(obj), engine=engine)
            a = rt.events.arrays()
            assert len(a["j"]) == 100
            assert np.all(a["j"] - a["snap_j"] <= 1)
            np.testing.assert_array_equal(a["worker"], np.arange(100) % 2)
            assert audit_log(rt.events, 1).ok

    def test_deterministic(self):
        obj, hp = quartic_hp(1000, 8, 16, eps=1.0)
        dm = DelayModel.exponential(0.05, seed=4)
        traces = []
        for _ in range(2):
            rt = run(obj, hp, 8, 5000, off_saddle(obj), delay_model=dm, scheduler_seed=4, sample_every=100)
            traces.append((rt.events.arrays(), rt.samples(), rt.materialize()))
        (a1, s1, x1), (a2, s2, x2) = traces
        for k in LOG_FIELDS:
            np.testing.assert_array_equal(a1[k], a2[k])
        for k in ("t", "j", "f", "E"):
            np.testing.assert_array_equal(s1[k], s2[k])
        np.testing.assert_array_equal(x1, x2)

    @pytest.mark.parametrize("W,tau,delay", [(2, 1, 0.0), (4, 3, 0.0), (8, 16, 0.05), (3, 6, 0.01)])
    def test_fused_matches_python(self, W, tau, delay):
        obj, hp = quartic_hp(50, W, tau)
        x0 = off_saddle(obj, 1)
        dm = DelayModel.exponential(delay, seed=2)
        out = []
        for engine in ("fused", "python"):
            rt = build_runtime(obj, W, hp, engine=engine, delay_model=dm, sample_every=7)
            rt.start(x0)
            for n in (13, 1, 200, 57):
                rt.advance(n)
            rt.perturb(np.full(obj.d, 1e-3))
            rt.advance(300)
            out.append((rt.events.arrays(), rt.materialize(), rt.energy, rt.now, rt.samples()))
        (a1, x1, e1, t1, s1), (a2, x2, e2, t2, s2) = out
        for k in LOG_FIELDS:
            np.testing.assert_array_equal(a1[k], a2[k])
        np.testing.assert_array_equal(x1, x2)
        assert e1 == e2 and t1 == t2
        np.testing.assert_array_equal(s1["f"], s2["f"])

    def test_dense_matches_aggregate(self):
        obj, hp = quartic_hp(40, 4, 8)
        x0 = off_saddle(obj, 2)
        res = []
        for store in ("dense", "aggregate"):
            rt = build_runtime(obj, 4, hp, engine="python", store=store,
                               delay_model=DelayModel.exponential(0.01, seed=1))
            rt.start(x0)
            rt.advance(2000)
            res.append((rt.materialize(), rt.f, rt.events.arrays()["worker"]))
        np.testing.assert_allclose(res[0][0], res[1][0], atol=1e-10)
        assert res[0][1] == pytest.approx(res[1][1], abs=1e-10)
        np.testing.assert_array_equal(res[0][2], res[1][2])

    def test_update_conservation(self):
        obj, hp = quartic_hp(30, 3, 6)
        x0 = off_saddle(obj, 3)
        rt = build_runtime(obj, 3, hp, engine="python", record_iterates=True,
                           delay_model=DelayModel.exponential(0.05, seed=5))
        rt.start(x0)
        rt.advance(600)
        its = np.array(rt.iterates)
        diffs = np.diff(its, axis=0)
        a = rt.events.arrays()
        b = rt.partition.bounds
        for i, w in enumerate(a["worker"]):
            outside = np.r_[diffs[i, :b[w]], diffs[i, b[w + 1]:]]
            assert np.all(outside == 0)
            assert diffs[i] @ diffs[i] == pytest.approx(a["step_sq"][i], rel=1e-8, abs=1e-20)
        np.testing.assert_allclose(x0 + diffs.sum(axis=0), rt.materialize(), atol=1e-10)

    def test_monitor_clean(self):
        obj, hp = quartic_hp(100, 8, 16)
        rt = run(obj, hp, 8, 20_000, off_saddle(obj), delay_model=DelayModel.exponential(0.05, seed=0))
        m = rt.monitor()
        assert m["corollary_violations"] == 0 and m["lemma_violations"] == 0
        assert m["max_staleness"] <= 16 and m["staleness_violations"] == 0
        rep = audit_log(rt.events, 16)
        assert rep.ok and rep.complete and rep.max_staleness <= 16

    def test_w1_equals_serial_gd(self):
        obj, hp = quartic_hp(20, 1, 1)
        x0 = off_saddle(obj, 4)
        a = build_runtime(obj, 1, hp, engine="python", record_iterates=True,
                          delay_model=DelayModel.exponential(0.05, seed=9))
        s = build_runtime(obj, 1, hp, mode="sync", engine="python", record_iterates=True)
        for rt in (a, s):
            rt.start(x0)
            rt.advance(500)
        np.testing.assert_array_equal(np.array(a.iterates), np.array(s.iterates))

    def test_fixed_victim_fewest_updates(self):
        obj, hp = quartic_hp(1000, 8, 16, eps=1.0)
        dm = DelayModel.exponential(0.05, FIXED_WORKER, fixed_worker=3, seed=1)
        rt = run(obj, hp, 8, 20_000, off_saddle(obj), delay_model=dm)
        c = rt.events.update_counts()
        assert c[3] == c.min() and c[3] < np.delete(c, 3).min()

    def test_tau_below_w_minus_1(self):
        obj, hp = quartic_hp(10, 2, 1)
        with pytest.raises(ConfigurationError):
            build_runtime(obj, 4, eta=hp.eta, tau=2)

    def test_event_records_alternate(self):
        obj, hp = quartic_hp(12, 3, 6)
        rt = run(obj, hp, 3, 60, off_saddle(obj), delay_model=DelayModel.exponential(0.05, seed=2))
        recs = rt.events.records()
        assert [r["t"] for r in recs] == sorted(r["t"] for r in recs)
        cycle = ("Fetch", "GradientDone", "ApplyUpdate")
        for w in range(3):
            kinds = [r["kind"] for r in recs if r["worker"] == w]
            assert kinds == [cycle[i % 3] for i in range(len(kinds))]


class TestAudit:
    def _log(self, worker, snap, W):
        n = len(worker)
        log = empty_log(n)
        log["worker"][:] = worker
        log["j"][:] = np.arange(n)
        log["snap_j"][:] = snap
        for k in ("t_fetch", "t_done", "t_apply", "step_sq", "f", "E"):
            log[k][:] = 0.0
        ev = EventLog(partition_blocks(W, W).bounds)
        ev.extend(log, n)
        return ev

    def test_block_ages_hand(self):
        # W=2: iterations 0 (w0), 1 (w1, snapshot at 0), 2 (w0, snapshot at 1)
        ages = block_ages(np.array([0, 1, 0]), np.array([0, 1, 2]), np.array([0, 0, 1]), 2)
        np.testing.assert_array_equal(ages, [[0, 0], [1, 0], [0, 1]])

    def test_detects_staleness(self):
        rep = audit_log(self._log([0, 1, 1, 1, 0], [0, 0, 2, 3, 1], 2), 2)
        assert rep.staleness_violations == 1 and rep.max_staleness == 3 and rep.own_block_fresh
        assert not rep.ok

    def test_detects_coverage_gap(self):
        rep = audit_log(self._log([0, 1, 1, 1, 0], [0, 1, 2, 3, 4], 2), 2)
        assert not rep.coverage_ok and rep.worst_gap == 3

    def test_clean(self):
        rep = audit_log(self._log([0, 1, 0, 1], [0, 1, 2, 3], 2), 1)
        assert rep.ok and rep.own_block_fresh


class TestThreaded:
    def test_w1_matches_simulated(self):
        obj, hp = quartic_hp(20, 1, 1)
        x0 = off_saddle(obj, 5)
        out = []
        for clock in ("virtual", "wall"):
            rt = build_runtime(obj, 1, hp, clock=clock)
            rt.start(x0)
            for n in (100, 37, 400):
                rt.advance(n)
            out.append(rt.materialize())
        np.testing.assert_array_equal(out[0], out[1])

    def test_w8_contracts(self):
        obj, hp = quartic_hp(10_000, 8, 7, eps=1.0)
        rt = build_runtime(obj, 8, hp, clock="wall")
        assert isinstance(rt, ThreadedRuntime)
        rt.start(off_saddle(obj))
        for _ in range(5):
            rt.advance(2000)
        assert rt.j == 10_000
        rep = audit_log(rt.events, 7)
        assert rep.ok and rep.n_updates == 10_000
        assert rt.monitor()["corollary_violations"] == 0
        assert rt.events.update_counts().sum() == rt.j

    def test_delayed_worker_fewest_updates(self):
        obj, hp = quartic_hp(1000, 4, 8, eps=1.0)
        dm = DelayModel.exponential(0.05, FIXED_WORKER, fixed_worker=2, seed=0)
        rt = build_runtime(obj, 4, hp, clock="wall", delay_model=dm)
        rt.start(off_saddle(obj))
        rt.advance(400)
        c = rt.events.update_counts()
        assert c[2] == c.min()
        assert audit_log(rt.events, 8).ok

    def test_worker_failure_aborts(self):
        obj, hp = quartic_hp(100, 4, 3)
        rt = build_runtime(obj, 4, hp, clock="wall")
        rt.start(off_saddle(obj))
        rt.advance(50)
        calls = {"n": 0}

        def hook(k):
            calls["n"] += 1
            if calls["n"] > 20:
                raise RuntimeError("boom")

        rt._fail_hook = hook
        with pytest.raises(RunAborted) as info:
            rt.advance(10_000)
        tr = info.value.trace
        assert tr is not None and 50 <= tr.final["j"] < 10_050
        assert audit_log(tr.events, 3).staleness_violations == 0
