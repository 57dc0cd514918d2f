"""Hot loops of the simulator.

State lives in flat arrays so the same code runs under numba or as plain
Python. Integer and float scalars that change inside a loop are kept in the
small ``ist`` / ``fst`` arrays indexed by the constants below.
"""
import math

import numpy as np

from .._accel import njit
from ..hamiltonian import kinetic_energy, push_norm

# ist slots
I_J = 0
I_HEAD = 1
I_NCOR = 2
I_NLEM = 3
I_MAXSTALE = 4
I_HITJ = 5
I_NLOG = 6
I_NSAMP = 7
I_NSTALE = 8
I_LEN = 9

# fst slots
F_NOW = 0
F_F = 1
F_E = 2
F_MINCOR = 3
F_MINLEM = 4
F_HITT = 5
F_LEN = 6


def new_counters():
    ist = np.zeros(I_LEN, dtype=np.int64)
    ist[I_HITJ] = -1
    fst = np.zeros(F_LEN)
    fst[F_MINCOR] = np.inf
    fst[F_MINLEM] = np.inf
    fst[F_HITT] = np.nan
    return ist, fst


@njit
def admissible(k, snap_j, outstanding, j, tau):
    """Can worker ``k`` take label ``j`` without dooming another deadline?

    Every other outstanding worker ``i`` must still fit its own update at a
    label ``<= snap_j[i] + tau``; serving them earliest-deadline-first after
    ``k`` is optimal, so it is enough to check that order.
    """
    if j > snap_j[k] + tau:
        return False
    W = snap_j.shape[0]
    n = 0
    dl = np.empty(W, dtype=np.int64)
    for i in range(W):
        if i != k and outstanding[i]:
            dl[n] = snap_j[i] + tau
            n += 1
    dl = np.sort(dl[:n])
    for m in range(n):
        if j + 1 + m > dl[m]:
            return False
    return True


@njit
def edf_select(finish_t, snap_j, outstanding, j, tau, now):
    """Next worker to apply and the clock at which it applies.

    Among finished workers the earliest finisher (ties by id) that passes
    ``admissible`` wins; if none does, the clock jumps to the next finish.
    Returns ``(-1, now)`` if nobody is outstanding.
    """
    W = finish_t.shape[0]
    while True:
        best = -1
        for k in range(W):
            if outstanding[k] and finish_t[k] <= now:
                if best < 0 or finish_t[k] < finish_t[best]:
                    if admissible(k, snap_j, outstanding, j, tau):
                        best = k
        if best >= 0:
            return best, now
        nxt = np.inf
        for k in range(W):
            if outstanding[k] and now < finish_t[k] < nxt:
                nxt = finish_t[k]
        if nxt == np.inf:
            return -1, now
        now = nxt


@njit
def segment_update(snap_z, lo, hi, seg_group, weights, eta, outer_grad, params, gbuf, ubuf):
    """Per-segment step ``-eta * dF/dx`` at the snapshot aggregates."""
    outer_grad(snap_z, params, gbuf)
    for s in range(lo, hi):
        g = seg_group[s]
        ubuf[s - lo] = -eta * weights[g] * gbuf[g]


@njit
def apply_segments(lo, hi, seg_group, seg_len, weights, ubuf, offsets, z):
    """Add the step to segments ``lo:hi``; return its squared norm."""
    sq = 0.0
    for s in range(lo, hi):
        u = ubuf[s - lo]
        g = seg_group[s]
        offsets[s] += u
        z[g] += weights[g] * seg_len[s] * u
        sq += seg_len[s] * u * u
    return sq


@njit
def aggregate_grad_sq(z, weights, group_len, outer_grad, params, gbuf):
    outer_grad(z, params, gbuf)
    sq = 0.0
    for g in range(z.shape[0]):
        v = weights[g] * gbuf[g]
        sq += group_len[g] * v * v
    return sq


@njit
def monitor_step(ist, fst, buf, f_new, step_sq, L, lemma_coef, tol):
    """Push a step into the energy window and score both descent bounds."""
    ist[I_HEAD] = push_norm(buf, ist[I_HEAD], step_sq)
    E_new = f_new + kinetic_energy(buf, ist[I_HEAD], L)
    drop = fst[F_E] - E_new
    cor = drop - 0.375 * L * step_sq
    lem = drop - lemma_coef * step_sq
    if cor < fst[F_MINCOR]:
        fst[F_MINCOR] = cor
    if lem < fst[F_MINLEM]:
        fst[F_MINLEM] = lem
    if cor < -tol:
        ist[I_NCOR] += 1
    if lem < -tol:
        ist[I_NLEM] += 1
    fst[F_E] = E_new
    fst[F_F] = f_new
    return E_new


@njit
def fetch(k, z, snap_z, snap_j, t_fetch, finish_t, comp_time, pending, outstanding, j, now):
    snap_z[k, :] = z
    snap_j[k] = j
    t_fetch[k] = now
    finish_t[k] = now + comp_time[k] + pending[k]
    pending[k] = 0.0
    outstanding[k] = 1


@njit
def advance_aggregate(n, W, tau, eta, L, lemma_coef, tol, target,
                      block_ptr, seg_group, seg_len, group_len, weights, params, outer_grad, outer_value,
                      offsets, z, snap_z, snap_j, t_fetch, finish_t, comp_time, pending, outstanding,
                      buf, ist, fst, delay_vals, delay_victims,
                      log_worker, log_j, log_snap, log_tf, log_td, log_ta, log_sq, log_f, log_E,
                      sample_every, s_t, s_j, s_f, s_E, s_g, gbuf, ubuf):
    """Run ``n`` asynchronous global iterations on an aggregate store.

    Workers idle since the previous call fetch first, so a perturbation made
    between calls is visible. The worker that makes the last apply does not
    refetch. Returns the number of delay rounds consumed.
    """
    now = fst[F_NOW]
    for k in range(W):
        if not outstanding[k]:
            fetch(k, z, snap_z, snap_j, t_fetch, finish_t, comp_time, pending, outstanding, ist[I_J], now)
    rounds = 0
    log_cap = log_worker.shape[0]
    samp_cap = s_t.shape[0]
    for it in range(n):
        j = ist[I_J]
        k, now = edf_select(finish_t, snap_j, outstanding, j, tau, now)
        stale = j - snap_j[k]
        if stale > ist[I_MAXSTALE]:
            ist[I_MAXSTALE] = stale
        if stale > tau:
            ist[I_NSTALE] += 1
        lo = block_ptr[k]
        hi = block_ptr[k + 1]
        segment_update(snap_z[k], lo, hi, seg_group, weights, eta, outer_grad, params, gbuf, ubuf)
        sq = apply_segments(lo, hi, seg_group, seg_len, weights, ubuf, offsets, z)
        f_new = outer_value(z, params)
        E_new = monitor_step(ist, fst, buf, f_new, sq, L, lemma_coef, tol)
        outstanding[k] = 0
        nl = ist[I_NLOG]
        if nl < log_cap:
            log_worker[nl] = k
            log_j[nl] = j
            log_snap[nl] = snap_j[k]
            log_tf[nl] = t_fetch[k]
            log_td[nl] = finish_t[k]
            log_ta[nl] = now
            log_sq[nl] = sq
            log_f[nl] = f_new
            log_E[nl] = E_new
            ist[I_NLOG] = nl + 1
        j += 1
        ist[I_J] = j
        if ist[I_HITJ] < 0 and f_new <= target:
            ist[I_HITJ] = j
            fst[F_HITT] = now
        ns = ist[I_NSAMP]
        if j % sample_every == 0 and ns < samp_cap:
            s_t[ns] = now
            s_j[ns] = j
            s_f[ns] = f_new
            s_E[ns] = E_new
            s_g[ns] = math.sqrt(aggregate_grad_sq(z, weights, group_len, outer_grad, params, gbuf))
            ist[I_NSAMP] = ns + 1
        if j % W == 0:
            pending[delay_victims[rounds]] += delay_vals[rounds]
            rounds += 1
        if it + 1 < n:
            fetch(k, z, snap_z, snap_j, t_fetch, finish_t, comp_time, pending, outstanding, j, now)
    fst[F_NOW] = now
    return rounds


@njit
def sync_aggregate(n, eta, L, lemma_coef, tol, target,
                   n_seg, seg_group, seg_len, group_len, weights, params, outer_grad, outer_value,
                   offsets, z, comp_time, pending, buf, ist, fst, delay_vals, delay_victims,
                   sample_every, s_t, s_j, s_f, s_E, s_g, gbuf, ubuf, zsnap):
    """``n`` barrier-synchronised full-gradient iterations.

    Each iteration lasts as long as the slowest worker; one delay is drawn
    per iteration and lands on the victim's next computation.
    """
    samp_cap = s_t.shape[0]
    W = comp_time.shape[0]
    now = fst[F_NOW]
    for it in range(n):
        span = 0.0
        for w in range(W):
            c = comp_time[w] + pending[w]
            pending[w] = 0.0
            if c > span:
                span = c
        now += span
        zsnap[:] = z
        segment_update(zsnap, 0, n_seg, seg_group, weights, eta, outer_grad, params, gbuf, ubuf)
        sq = apply_segments(0, n_seg, seg_group, seg_len, weights, ubuf, offsets, z)
        f_new = outer_value(z, params)
        E_new = monitor_step(ist, fst, buf, f_new, sq, L, lemma_coef, tol)
        j = ist[I_J] + 1
        ist[I_J] = j
        if ist[I_HITJ] < 0 and f_new <= target:
            ist[I_HITJ] = j
            fst[F_HITT] = now
        ns = ist[I_NSAMP]
        if j % sample_every == 0 and ns < samp_cap:
            s_t[ns] = now
            s_j[ns] = j
            s_f[ns] = f_new
            s_E[ns] = E_new
            s_g[ns] = math.sqrt(aggregate_grad_sq(z, weights, group_len, outer_grad, params, gbuf))
            ist[I_NSAMP] = ns + 1
        pending[delay_victims[it]] += delay_vals[it]
    fst[F_NOW] = now
