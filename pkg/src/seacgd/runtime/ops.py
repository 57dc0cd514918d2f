"""Single-worker step and server-side apply on plain vectors.

These are the reference semantics; the runtimes implement the same steps
on their own storage.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolation
from ..hamiltonian import HamiltonianWindow
from ..objective import as_block


@dataclass
class DelayedSnapshot:
    worker_id: int
    values: np.ndarray = field(repr=False)
    block_ages: np.ndarray
    taken_at_j: int

    def __post_init__(self):
        self.block_ages = np.asarray(self.block_ages, dtype=np.int64)
        if self.block_ages[self.worker_id] != 0:
            raise ContractViolation("a worker's own block is never stale")


def sw_acgd_step(snapshot, objective, eta, block):
    """``u`` with ``u_b = -eta * grad_b f(snapshot)`` and zeros elsewhere."""
    values = snapshot.values if isinstance(snapshot, DelayedSnapshot) else snapshot
    values = objective._check(values)
    block = as_block(block, objective.d)
    u = np.zeros(objective.d)
    u[block] = -eta * objective.block_values(values, block)
    return u


def apply_update(x, update, window: HamiltonianWindow, objective, L=None, block=None):
    """Return ``(x + update, window')`` with ``|update|^2`` and the new f pushed.

    ``window.current_j`` plays the global counter. When ``block`` is given
    the update must vanish outside it. ``L`` is accepted for call-site
    symmetry; the window stores only squared norms.
    """
    x = objective._check(x)
    u = objective._check(update)
    if block is not None:
        block = as_block(block, objective.d)
        outside = np.concatenate([u[:block.start], u[block.stop:]])
        if np.any(outside != 0):
            raise ContractViolation("update must be supported on its block")
    x_new = x + u
    w = window.copy().push(objective.value(x_new), float(u @ u))
    return x_new, w
