"""LG-ACGD, P-ACGD and the saddle-escaping outer loop.

The drivers only command a runtime (``advance``, ``perturb``,
``checkpoint``/``restore``) and read its energy, so the same code runs
asynchronous, synchronous and serial executions.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .objective import PointClass, classify_point

LG = "LG"
PERTURB = "PERTURB"
DONE = "DONE"

SOSP = "SecondOrderStationary"
CAP_REACHED = "IterationCapReached"


def uniform_ball_sample(center, radius, seed):
    """Uniform point in the ball of ``radius`` around ``center``.

    Direction from a normalised Gaussian, length ``radius * U**(1/d)``.
    ``seed`` may be anything ``np.random.default_rng`` accepts.
    """
    center = np.asarray(center, dtype=np.float64)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return center.copy()
    rng = np.random.default_rng(seed)
    d = center.shape[0]
    v = rng.standard_normal(d)
    v *= radius * rng.random() ** (1.0 / d) / np.linalg.norm(v)
    return center + v


@dataclass
class PhaseResult:
    phase: str
    entry_energy: float
    final_energy: float
    energy_drop: float
    global_iters_used: int
    truncated: bool = False
    _runtime: object = field(default=None, repr=False, compare=False)
    _checkpoint: object = field(default=None, repr=False, compare=False)

    @property
    def final_iterate(self):
        return self._runtime.store.materialize_checkpoint(self._checkpoint[0])


@dataclass
class TerminationReport:
    outcome: str
    certificate: PointClass | None
    total_global_iters: int
    total_perturbations: int
    escapes: int
    final_f: float = float("nan")
    final_time: float = float("nan")
    n_lg_phases: int = 0
    iterate: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if k != "iterate"}
        return out


def _start(runtime, x):
    if runtime.store is None:
        if x is None:
            raise ValueError("runtime not started and no start point given")
        runtime.start(x)


def _phase(runtime, kind, n, entry_E):
    j0 = runtime.j
    runtime.phase = kind
    runtime.advance(n)
    E = runtime.energy
    return PhaseResult(kind, entry_E, E, entry_E - E, runtime.j - j0,
                       _runtime=runtime, _checkpoint=runtime.checkpoint())


def lg_acgd(x, runtime, objective=None, hp=None, max_iters=None):
    """``tau + 1`` asynchronous iterations; the drop spans the whole window.

    ``x`` starts a fresh runtime; on a running one it may be ``None`` and
    the phase continues from the current iterate.
    """
    _start(runtime, x)
    n = hp.tau + 1
    truncated = max_iters is not None and max_iters < n
    if truncated:
        n = max(int(max_iters), 0)
    res = _phase(runtime, LG, n, runtime.energy)
    res.truncated = truncated
    return res


def p_acgd(x, runtime, objective=None, hp=None, rng_seed=0, max_iters=None, xi=None):
    """Perturb by a uniform draw from the ``eta * r`` ball, then run ``T`` iterations.

    The drop is the entry energy minus the energy of the phase's own
    trailing window. ``xi`` overrides the random perturbation.
    """
    _start(runtime, x)
    entry_E = runtime.energy
    if xi is None:
        xi = uniform_ball_sample(np.zeros(runtime.partition.d), hp.perturb_radius, rng_seed)
    runtime.phase = PERTURB
    runtime.perturb(xi)
    n = int(hp.T)
    truncated = max_iters is not None and max_iters < n
    if truncated:
        n = max(int(max_iters), 0)
    res = _phase(runtime, PERTURB, n, entry_E)
    res.truncated = truncated
    return res


def _record(phases, runtime, res, F, decision):
    phases.append({"t": runtime.now, "j": runtime.j, "phase": res.phase, "entry_E": res.entry_energy,
                   "exit_E": res.final_energy, "drop": res.energy_drop, "threshold_F": F,
                   "iters": res.global_iters_used, "decision": decision})


def se_acgd(x0, runtime, objective, hp, seed=0, max_iters=None, certify=True, header=None):
    """Saddle-escaping outer loop; returns ``(TerminationReport, RunTrace)``.

    Repeats LG phases while their window drop reaches ``F``. A small drop
    triggers a perturbation phase; if that also fails to drop by ``F`` the
    pre-perturbation iterate is restored and returned. The run stops with
    ``IterationCapReached`` after ``max_iters`` (default ``hp.t_max``)
    global iterations.
    """
    _start(runtime, x0)
    cap = hp.t_max if max_iters is None else int(max_iters)
    F = hp.F_threshold
    phases = []
    used = 0
    n_pert = escapes = n_lg = 0
    outcome = CAP_REACHED
    while used < cap:
        lg = lg_acgd(None, runtime, objective, hp, max_iters=cap - used)
        used += lg.global_iters_used
        n_lg += 1
        if lg.truncated:
            _record(phases, runtime, lg, F, "cap")
            break
        if lg.energy_drop >= F:
            _record(phases, runtime, lg, F, "continue")
            continue
        _record(phases, runtime, lg, F, "perturb")
        if used >= cap:
            break
        saved = runtime.checkpoint()
        pr = p_acgd(None, runtime, objective, hp, rng_seed=[seed, n_pert], max_iters=cap - used)
        n_pert += 1
        used += pr.global_iters_used
        if pr.truncated:
            _record(phases, runtime, pr, F, "cap")
            break
        if pr.energy_drop < F:
            _record(phases, runtime, pr, F, "stop")
            runtime.restore(saved)
            outcome = SOSP
            break
        escapes += 1
        _record(phases, runtime, pr, F, "escaped")
    runtime.phase = DONE
    runtime.record_sample(DONE)
    x = runtime.materialize()
    cert = classify_point(objective, x, hp.eps) if certify else None
    report = TerminationReport(outcome=outcome, certificate=cert, total_global_iters=used,
                               total_perturbations=n_pert, escapes=escapes, final_f=runtime.f,
                               final_time=runtime.now, n_lg_phases=n_lg, iterate=x)
    h = {"algorithm": "SEACGD", "seed": seed, "hp": hp.to_dict() if hasattr(hp, "to_dict") else None}
    if header:
        h.update(header)
    return report, runtime.trace(header=h, phases=phases, report=report)
