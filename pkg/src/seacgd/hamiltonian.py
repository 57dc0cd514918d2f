"""Discrete Hamiltonian: objective value plus a delay-weighted kinetic term.

``E_j = f(x^j) + L/(2 sqrt(tau)) * sum_k k * |x^{i+1} - x^i|^2`` over the
last ``tau`` steps, weights ``1..tau`` from oldest to newest. Missing history
(before the first step, or right after a perturbation) counts as zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit
from .errors import ContractViolation


@njit
def kinetic_energy(buf, head, L):
    """Weighted kinetic term of a ring buffer whose oldest entry is ``buf[head]``."""
    tau = buf.shape[0]
    total = 0.0
    comp = 0.0
    for k in range(tau):
        term = (k + 1) * buf[(head + k) % tau] - comp
        t = total + term
        comp = (t - total) - term
        total = t
    return L / (2.0 * math.sqrt(tau)) * total


@njit
def push_norm(buf, head, step_sq):
    """Overwrite the oldest entry with ``step_sq``; return the new head."""
    buf[head] = step_sq
    head += 1
    if head == buf.shape[0]:
        head = 0
    return head


@dataclass
class HamiltonianWindow:
    tau: int
    step_sq_norms: np.ndarray = field(default=None, repr=False)
    head: int = 0
    current_f: float = 0.0
    current_j: int = 0

    def __post_init__(self):
        if self.tau < 1:
            raise ContractViolation("tau must be >= 1")
        if self.step_sq_norms is None:
            self.step_sq_norms = np.zeros(self.tau)
        if self.step_sq_norms.shape != (self.tau,):
            raise ContractViolation("window buffer must hold exactly tau entries")

    @classmethod
    def from_history(cls, tau, norms, f, j=None):
        """Window holding the last ``tau`` of ``norms`` (oldest first), zero-padded."""
        norms = np.asarray(norms, dtype=np.float64)[-tau:]
        buf = np.zeros(tau)
        buf[tau - len(norms):] = norms
        return cls(tau=tau, step_sq_norms=buf, head=0, current_f=float(f),
                   current_j=len(norms) if j is None else j)

    def norms(self):
        """Stored squared step norms, oldest first."""
        return np.roll(self.step_sq_norms, -self.head)

    def kinetic(self, L):
        return kinetic_energy(self.step_sq_norms, self.head, L)

    def energy(self, L):
        return self.current_f + self.kinetic(L)

    def push(self, new_f, step_sq_norm):
        if not step_sq_norm >= 0.0:
            raise ContractViolation(f"squared step norm must be >= 0, got {step_sq_norm!r}")
        self.head = push_norm(self.step_sq_norms, self.head, float(step_sq_norm))
        self.current_f = float(new_f)
        self.current_j += 1
        return self

    def reset(self, f):
        """Drop all history (used right after a perturbation)."""
        self.step_sq_norms[:] = 0.0
        self.head = 0
        self.current_f = float(f)

    def copy(self):
        return HamiltonianWindow(self.tau, self.step_sq_norms.copy(), self.head, self.current_f, self.current_j)


def energy(window: HamiltonianWindow, L) -> float:
    return window.energy(L)


def push_step(window: HamiltonianWindow, new_f, step_sq_norm) -> HamiltonianWindow:
    return window.copy().push(new_f, step_sq_norm)


@dataclass(frozen=True)
class DescentReport:
    lemma_ok: bool
    corollary_ok: bool
    lemma_slack: float
    corollary_slack: float


def check_descent(E_prev, E_next, step_sq_norm, hp, inputs=None, atol=0.0) -> DescentReport:
    """Compare an energy drop with the per-step lower bounds.

    ``inputs`` is accepted for symmetry with ``derive_params``; ``hp`` already
    carries ``L``, ``tau`` and ``eta``.
    """
    L = hp.L if inputs is None else inputs.L
    drop = E_prev - E_next
    lemma_slack = drop - hp.lemma_coefficient * step_sq_norm
    cor_slack = drop - 0.375 * L * step_sq_norm
    return DescentReport(lemma_ok=lemma_slack >= -atol, corollary_ok=cor_slack >= -atol,
                         lemma_slack=lemma_slack, corollary_slack=cor_slack)
