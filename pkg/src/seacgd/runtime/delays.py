"""Injected latency: one exponential draw per round of W block computations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError

NO_DELAY = "None"
EXPONENTIAL_ONE_WORKER = "ExponentialOneWorker"

ROUND_ROBIN = "RoundRobin"
FIXED_WORKER = "FixedWorker"
RANDOM_EACH_ITER = "RandomEachIter"


@dataclass(frozen=True)
class DelayModel:
    kind: str = NO_DELAY
    expected_delay: float = 0.0
    victim_policy: str = ROUND_ROBIN
    fixed_worker: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (NO_DELAY, EXPONENTIAL_ONE_WORKER):
            raise ConfigurationError(f"unknown delay kind {self.kind!r}")
        if self.victim_policy not in (ROUND_ROBIN, FIXED_WORKER, RANDOM_EACH_ITER):
            raise ConfigurationError(f"unknown victim policy {self.victim_policy!r}")
        if self.expected_delay < 0:
            raise ConfigurationError("expected_delay must be >= 0")

    @classmethod
    def exponential(cls, expected_delay, victim_policy=ROUND_ROBIN, fixed_worker=0, seed=0):
        if expected_delay == 0:
            return cls(seed=seed)
        return cls(EXPONENTIAL_ONE_WORKER, float(expected_delay), victim_policy, fixed_worker, seed)

    @property
    def active(self):
        return self.kind == EXPONENTIAL_ONE_WORKER and self.expected_delay > 0

    def injector(self, W, stream=0):
        return DelayInjector(self, W, stream)

    def to_dict(self):
        return {"kind": self.kind, "expected_delay": self.expected_delay,
                "victim_policy": self.victim_policy, "fixed_worker": self.fixed_worker, "seed": self.seed}


class DelayInjector:
    """Deterministic stream of ``(latency, victim)`` pairs, one per round."""

    def __init__(self, model: DelayModel, W, stream=0):
        if model.victim_policy == FIXED_WORKER and not 0 <= model.fixed_worker < W:
            raise ConfigurationError(f"fixed victim {model.fixed_worker} outside [0, {W})")
        self.model = model
        self.W = W
        self.rounds = 0
        self._rng = np.random.default_rng([model.seed, stream])

    def draw(self, n_rounds):
        n = int(n_rounds)
        m = self.model
        if not m.active:
            values = np.zeros(n)
            victims = np.zeros(n, dtype=np.int64)
        else:
            values = self._rng.exponential(m.expected_delay, size=n)
            if m.victim_policy == ROUND_ROBIN:
                victims = (self.rounds + np.arange(n, dtype=np.int64)) % self.W
            elif m.victim_policy == FIXED_WORKER:
                victims = np.full(n, m.fixed_worker, dtype=np.int64)
            else:
                victims = self._rng.integers(0, self.W, size=n).astype(np.int64)
        self.rounds += n
        return values, victims
