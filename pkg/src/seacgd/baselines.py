"""Serial GD, serial PGD and barrier-synchronised parallel PGD.

The PGD variants reuse the saddle-escaping control loop (window of
``tau + 1`` steps, perturbation phases of ``T`` steps, threshold ``F``) on a
synchronous runtime, so they differ from SE-ACGD only in how iterations
are executed.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

from .algorithms import DONE, LG, se_acgd
from .errors import ConfigurationError
from .runtime.delays import DelayModel
from .runtime.partition import partition_blocks
from .runtime.simulator import SyncRuntime

SERIAL_GD = "SerialGD"
SERIAL_PGD = "SerialPGD"
SYNC_PGD = "SyncParallelPGD"


@dataclass(frozen=True)
class BaselineConfig:
    kind: str
    eta: float
    perturb_radius: float = 0.0
    perturb_interval_T: int = 1
    threshold: float = 0.0
    seed: int = 0
    tau: int = 1
    L: float | None = None
    eps: float = 1.0

    def __post_init__(self):
        if self.kind not in (SERIAL_GD, SERIAL_PGD, SYNC_PGD):
            raise ConfigurationError(f"unknown baseline {self.kind!r}")
        if self.eta < 0 or self.perturb_radius < 0:
            raise ConfigurationError("eta and perturb_radius must be >= 0")
        if self.perturb_interval_T < 1 or self.tau < 1:
            raise ConfigurationError("perturb_interval_T and tau must be >= 1")

    @classmethod
    def from_hp(cls, kind, hp, seed=0):
        """Reuse SE-ACGD's step, radius, phase length and threshold."""
        return cls(kind=kind, eta=hp.eta, perturb_radius=hp.perturb_radius, perturb_interval_T=hp.T,
                   threshold=hp.F_threshold, seed=seed, tau=hp.tau, L=hp.L, eps=hp.eps)

    # attribute names the shared driver reads
    @property
    def T(self):
        return self.perturb_interval_T

    @property
    def F_threshold(self):
        return self.threshold

    def to_dict(self):
        return asdict(self)


def _sync_runtime(objective, config, W, delay_model, clock="virtual", **kw):
    cls = SyncRuntime
    if clock == "wall":
        from .runtime.parallel import WallSyncRuntime as cls
    return cls(objective, partition_blocks(objective.d, W), config.eta, config.tau, L=config.L,
               delay_model=delay_model, **kw)


def run_serial_gd(x0, objective, config: BaselineConfig, max_iters, **runtime_kw):
    """Plain full-gradient descent for ``max_iters`` steps."""
    rt = _sync_runtime(objective, config, 1, None, **runtime_kw)
    rt.start(x0)
    rt.phase = LG
    rt.advance(int(max_iters))
    rt.phase = DONE
    rt.record_sample(DONE)
    return rt.trace(header={"algorithm": SERIAL_GD, "config": config.to_dict()})


def _pgd(x0, objective, config, W, delay_model, max_iters, name, certify, runtime_kw):
    rt = _sync_runtime(objective, config, W, delay_model, **runtime_kw)
    rt.start(x0)
    report, trace = se_acgd(None, rt, objective, config, seed=config.seed, max_iters=max_iters,
                            certify=certify, header={"algorithm": name, "config": config.to_dict(), "hp": None})
    return trace


def run_serial_pgd(x0, objective, config: BaselineConfig, max_iters, certify=True, **runtime_kw):
    return _pgd(x0, objective, config, 1, None, max_iters, SERIAL_PGD, certify, runtime_kw)


def run_sync_parallel_pgd(x0, objective, config: BaselineConfig, W, delay_model: DelayModel | None,
                          max_iters, certify=True, **runtime_kw):
    """All ``W`` workers step from the same iterate; each iteration waits for the slowest."""
    return _pgd(x0, objective, config, W, delay_model, max_iters, SYNC_PGD, certify, runtime_kw)
