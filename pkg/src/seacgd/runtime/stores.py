"""Storage of the global iterate.

``DenseStore`` keeps a plain vector and works with any objective.
``AggregateStore`` exploits objectives whose gradient is constant on
contiguous groups: the iterate is a base vector plus one offset per
(block, group) segment, so a block update costs O(segments) instead of
O(|block|), and a snapshot is just the aggregate vector.
"""
from __future__ import annotations

import math

import numpy as np

from ..objective import AggregateObjective, Objective
from . import kernels
from .partition import BlockPartition


class DenseStore:
    kind = "dense"

    def __init__(self, objective: Objective, partition: BlockPartition, x0):
        self.objective = objective
        self.partition = partition
        self.x = objective._check(x0).copy()
        self._f = objective.value(self.x)

    def snapshot(self):
        return self.x.copy()

    def compute_update(self, snap, k, eta):
        return -eta * self.objective.block_values(snap, self.partition.blocks[k])

    def apply_update(self, k, u):
        self.x[self.partition.blocks[k]] += u
        self._f = self.objective.value(self.x)
        return float(u @ u)

    def full_update(self, eta):
        u = -eta * self.objective.gradient(self.x)
        self.x += u
        self._f = self.objective.value(self.x)
        return float(u @ u)

    def f(self):
        return self._f

    def grad_norm(self):
        return float(np.linalg.norm(self.objective.gradient(self.x)))

    def materialize(self):
        return self.x.copy()

    def perturb(self, xi):
        self.x = self.x + xi
        self._f = self.objective.value(self.x)

    def checkpoint(self):
        return self.x.copy()

    @staticmethod
    def materialize_checkpoint(cp):
        return cp.copy()

    def restore(self, cp):
        self.x = cp.copy()
        self._f = self.objective.value(self.x)


class AggregateStore:
    kind = "aggregate"

    def __init__(self, objective: AggregateObjective, partition: BlockPartition, x0):
        self.objective = objective
        self.partition = partition
        gb = objective.group_bounds
        cuts = np.union1d(gb, partition.bounds)
        starts, stops = cuts[:-1], cuts[1:]
        self.seg_group = (np.searchsorted(gb, starts, side="right") - 1).astype(np.int64)
        self.seg_len_int = (stops - starts).astype(np.int64)
        self.seg_len = self.seg_len_int.astype(np.float64)
        self.block_ptr = np.searchsorted(starts, partition.bounds).astype(np.int64)
        self.group_len = np.diff(gb).astype(np.float64)
        self.weights = np.asarray(objective.group_weights, dtype=np.float64)
        self.params = np.asarray(objective.params, dtype=np.float64)
        self.outer_grad = objective.outer_grad
        self.outer_value = objective.outer_value
        self.n_seg = len(starts)
        self.max_block_segs = int(np.max(np.diff(self.block_ptr)))
        self.gbuf = np.empty(len(self.weights))
        self.ubuf = np.empty(self.n_seg)
        # iterates are kept as deviations from the group centers
        self.center = objective.center_vector()
        self.x_base = objective._check(x0) - self.center
        self.offsets = np.zeros(self.n_seg)
        self.z = objective.weighted_sums(self.x_base)

    def snapshot(self):
        return self.z.copy()

    def compute_update(self, snap, k, eta):
        lo, hi = self.block_ptr[k], self.block_ptr[k + 1]
        u = np.empty(hi - lo)
        # private scratch: worker threads may call this concurrently
        kernels.segment_update(snap, lo, hi, self.seg_group, self.weights, eta,
                               self.outer_grad, self.params, np.empty_like(self.gbuf), u)
        return u

    def apply_update(self, k, u):
        lo, hi = self.block_ptr[k], self.block_ptr[k + 1]
        return kernels.apply_segments(lo, hi, self.seg_group, self.seg_len, self.weights, u, self.offsets, self.z)

    def full_update(self, eta):
        u = np.empty(self.n_seg)
        kernels.segment_update(self.z.copy(), 0, self.n_seg, self.seg_group, self.weights, eta,
                               self.outer_grad, self.params, self.gbuf, u)
        return kernels.apply_segments(0, self.n_seg, self.seg_group, self.seg_len, self.weights,
                                      u, self.offsets, self.z)

    def f(self):
        return float(self.outer_value(self.z, self.params))

    def grad_norm(self):
        return math.sqrt(kernels.aggregate_grad_sq(self.z, self.weights, self.group_len,
                                                   self.outer_grad, self.params, self.gbuf))

    def materialize(self):
        return self.materialize_checkpoint((self.x_base, self.offsets))

    def perturb(self, xi):
        # the old base array may be held by a checkpoint, so never write into it
        self.x_base = self.x_base + np.repeat(self.offsets, self.seg_len_int) + xi
        self.offsets = np.zeros(self.n_seg)
        self.z = self.objective.weighted_sums(self.x_base)

    def checkpoint(self):
        return self.x_base, self.offsets.copy(), self.z.copy()

    def materialize_checkpoint(self, cp):
        return self.center + (cp[0] + np.repeat(cp[1], self.seg_len_int))

    def restore(self, cp):
        self.x_base, offsets, z = cp
        self.offsets = offsets.copy()
        self.z = z.copy()


def make_store(objective, partition, x0, kind="auto"):
    if kind == "auto":
        kind = "aggregate" if isinstance(objective, AggregateObjective) else "dense"
    if kind == "aggregate":
        return AggregateStore(objective, partition, x0)
    if kind == "dense":
        return DenseStore(objective, partition, x0)
    raise ValueError(f"unknown store kind {kind!r}")
