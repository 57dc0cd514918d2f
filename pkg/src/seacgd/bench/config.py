"""Declarative experiment configuration (JSON) with command-line overrides."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigurationError
from ..runtime.delays import FIXED_WORKER, RANDOM_EACH_ITER, ROUND_ROBIN

SADDLE_EVASION = "SaddleEvasion"
DELAY_SWEEP = "DelaySweep"
SCALABILITY = "Scalability"
EXPERIMENTS = (SADDLE_EVASION, DELAY_SWEEP, SCALABILITY)

SEACGD = "SEACGD"
SERIAL_GD = "SerialGD"
SYNC_PGD = "SyncParallelPGD"
ALGORITHMS = (SEACGD, SERIAL_GD, SYNC_PGD)

SIMULATED = "Simulated"
PARALLEL = "Parallel"

LARGE_DIM = 10 ** 6

_DEFAULTS = {
    SADDLE_EVASION: {"dims": [100, 10_000, 1_000_000], "workers": [8], "expected_delays": [0.0],
                     "algorithms": [SEACGD, SERIAL_GD, SYNC_PGD]},
    DELAY_SWEEP: {"dims": [1_000_000], "workers": [8], "expected_delays": [0.0, 0.01, 0.05],
                  "algorithms": [SEACGD, SYNC_PGD], "tau": "2W"},
    SCALABILITY: {"dims": [1_000_000], "workers": [2, 8], "expected_delays": [0.0],
                  "algorithms": [SEACGD]},
}


@dataclass
class ExperimentConfig:
    experiment: str
    dims: list = field(default_factory=list)
    workers: list = field(default_factory=list)
    expected_delays: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0])
    algorithms: list = field(default_factory=list)
    output_dir: str = "bench_out"
    mode: str = SIMULATED
    # "W-1", "2W" or a fixed integer
    tau: object = "W-1"
    # None picks 0.1 for d <= 1000 and 1.0 above
    eps: float | None = None
    delta: float = 0.1
    target_tol_per_dim: float = 1e-3
    victim_policy: str = ROUND_ROBIN
    fixed_worker: int = 0
    box_halfwidth: float = 1.25
    objective: str = "paper_quartic"
    sample_every: int = 1000
    event_limit: int | None = 10_000
    serial_gd_iters: int | None = None
    max_iters: int | None = None
    allow_large_dims: bool = False

    @classmethod
    def with_defaults(cls, experiment, **overrides):
        if experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
        data = dict(_DEFAULTS[experiment])
        data.update({k: v for k, v in overrides.items() if v is not None})
        data["experiment"] = experiment
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        if "experiment" not in data:
            raise ConfigurationError("config needs an 'experiment' key")
        exp = data["experiment"]
        if exp not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {exp!r}; choose from {EXPERIMENTS}")
        merged = dict(_DEFAULTS[exp])
        merged.update(data)
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self):
        for name in ("dims", "workers", "expected_delays", "seeds", "algorithms"):
            v = getattr(self, name)
            if not isinstance(v, list) or not v:
                raise ConfigurationError(f"{name} must be a non-empty list")
        if any(int(d) < 2 for d in self.dims):
            raise ConfigurationError("dims must be >= 2")
        if not self.allow_large_dims and any(int(d) > LARGE_DIM for d in self.dims):
            raise ConfigurationError(f"dims above {LARGE_DIM} need allow_large_dims / --allow-large-dims")
        if any(int(w) < 1 for w in self.workers):
            raise ConfigurationError("workers must be >= 1")
        if any(float(x) < 0 for x in self.expected_delays):
            raise ConfigurationError("expected delays must be >= 0")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ConfigurationError(f"unknown algorithms {sorted(bad)}")
        if self.mode not in (SIMULATED, PARALLEL):
            raise ConfigurationError(f"mode must be {SIMULATED} or {PARALLEL}")
        if self.victim_policy not in (ROUND_ROBIN, FIXED_WORKER, RANDOM_EACH_ITER):
            raise ConfigurationError(f"unknown victim policy {self.victim_policy!r}")
        if not (self.tau in ("W-1", "2W") or (isinstance(self.tau, int) and self.tau >= 1)):
            raise ConfigurationError("tau must be 'W-1', '2W' or a positive integer")
        if self.eps is not None and self.eps <= 0:
            raise ConfigurationError("eps must be positive")
        if self.sample_every < 1:
            raise ConfigurationError("sample_every must be >= 1")

    def tau_for(self, W):
        if self.tau == "W-1":
            return max(W - 1, 1)
        if self.tau == "2W":
            return 2 * W
        return int(self.tau)

    def eps_for(self, d):
        if self.eps is not None:
            return float(self.eps)
        return 0.1 if d <= 1000 else 1.0

    def target_for(self, d):
        return -d / 4.0 + self.target_tol_per_dim * d

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def load_config(path, experiment=None, **overrides):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a JSON object")
    # a resolved summary.json embeds the config under "config"
    if isinstance(data.get("config"), dict):
        data = dict(data["config"])
    if experiment is not None:
        if data.get("experiment", experiment) != experiment:
            raise ConfigurationError(f"config is for {data['experiment']}, not {experiment}")
        data["experiment"] = experiment
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)
