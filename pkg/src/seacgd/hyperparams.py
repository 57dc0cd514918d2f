"""Hyperparameters derived from the user's accuracy, delay and smoothness inputs."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractViolation, DegenerateProblemError, RegimeError


def beta_constraint(beta, tau):
    """``(15/8) tau^(1/2 - beta) - sqrt(tau) - 1/2``; feasible when >= 0."""
    return 15.0 / 8.0 * tau ** (0.5 - beta) - math.sqrt(tau) - 0.5


def solve_beta(tau):
    """Largest ``beta <= 1/2`` with ``beta_constraint(beta, tau) >= 0``.

    The constraint is decreasing in ``beta``, so the boundary has a closed
    form; the result is nudged down by ulps if rounding left it infeasible.
    """
    tau = int(tau)
    if tau < 1:
        raise ContractViolation(f"tau must be >= 1, got {tau}")
    c = 8.0 / 15.0 * (math.sqrt(tau) + 0.5)
    if c <= 1.0:
        return 0.5
    beta = 0.5 - math.log(c) / math.log(tau)
    while beta_constraint(beta, tau) < 0.0:
        beta = float(np.nextafter(beta, -np.inf))
    if beta <= 0.0:
        raise ConfigurationError(f"no positive beta satisfies the step-size constraint for tau={tau}")
    return min(beta, 0.5)


@dataclass
class UserInputs:
    eps: float
    tau: int
    L: float
    rho: float
    delta: float
    d: int
    x0: np.ndarray = field(repr=False)
    W: int
    mu: float = 1.0
    fstar: float = 0.0
    f_x0: float | None = None

    def __post_init__(self):
        self.tau = int(self.tau)
        self.W = int(self.W)
        self.d = int(self.d)
        if self.eps <= 0 or self.L <= 0 or self.rho <= 0:
            raise ConfigurationError("eps, L and rho must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")
        if self.W < 1 or self.tau < 1:
            raise ConfigurationError("W and tau must be >= 1")
        if self.tau < self.W - 1:
            raise ConfigurationError(f"tau={self.tau} is below W-1={self.W - 1}; no schedule can meet it")
        if self.mu < 1:
            raise ConfigurationError("mu must be >= 1")

    @classmethod
    def for_objective(cls, objective, x0, eps, tau, W, delta=0.1, mu=1.0):
        spec = objective.spec
        x0 = np.asarray(x0, dtype=np.float64)
        return cls(eps=eps, tau=tau, L=spec.lipschitz_L, rho=spec.hessian_rho, delta=delta, d=spec.d,
                   x0=x0, W=W, mu=mu, fstar=spec.global_min_fstar, f_x0=objective.value(x0))

    @property
    def delta_f(self):
        if self.f_x0 is None:
            raise ConfigurationError("f(x0) unknown; build inputs with UserInputs.for_objective")
        return self.f_x0 - self.fstar

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if k != "x0"}
        out["delta_f"] = self.delta_f
        return out


@dataclass(frozen=True)
class HyperParams:
    sigma: float
    iota: float
    chi: float
    beta: float
    eta: float
    r: float
    phi: float
    F_threshold: float
    gamma: float
    T: int
    r0: float
    M: float
    # carried along so drivers need only this object
    tau: int
    L: float
    eps: float
    rho: float
    delta_f: float

    @property
    def perturb_radius(self):
        """Radius of the perturbation ball, ``eta * r``."""
        return self.eta * self.r

    @property
    def lemma_coefficient(self):
        """``L (1/(eta L) - sqrt(tau) - 1/2)``, the per-step descent factor."""
        return self.L * (1.0 / (self.eta * self.L) - math.sqrt(self.tau) - 0.5)

    @property
    def t_max(self):
        """Iteration cap ``ceil(T * delta_f / F)``."""
        return int(math.ceil(self.T * self.delta_f / self.F_threshold))

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: data[k] for k in cls.__dataclass_fields__})

    def replace(self, **changes):
        data = self.to_dict()
        data.update(changes)
        return HyperParams.from_dict(data)


def step_size_bound(L, tau, beta, iota, chi):
    return 1.0 / (2.0 * L * tau ** (0.5 - beta) * iota * chi)


def derive_params(inputs: UserInputs) -> HyperParams:
    eps, tau, L, rho = inputs.eps, inputs.tau, inputs.L, inputs.rho
    if eps > L * L / rho:
        raise RegimeError(f"eps={eps} exceeds L^2/rho={L * L / rho}")
    delta_f = inputs.delta_f
    if delta_f <= 0:
        raise DegenerateProblemError(f"f(x0) - fstar = {delta_f} <= 0")

    sigma = max(1280.0 * math.sqrt(inputs.d) * delta_f * L * tau
                / (math.sqrt(math.pi) * eps * eps * inputs.delta), 8.0)
    iota = inputs.mu * math.log2(sigma)
    chi = max(1.0, math.sqrt(rho * eps) / (L * L))
    beta = solve_beta(tau)
    eta = step_size_bound(L, tau, beta, iota, chi)
    r = eta * eps * L
    phi = 5.0 * eps / (4.0 * L * tau ** (0.5 - beta) * iota * chi)
    F = L * (1.0 / (eta * L) - math.sqrt(tau) - 0.5) * eta * eta * eps * eps
    gamma = inputs.delta * F / delta_f
    T = int(math.ceil(math.log2(sigma * iota * iota * chi * chi) / (eta * math.sqrt(rho * eps))))
    r0 = r * gamma * math.sqrt(math.pi) / (2.0 * math.sqrt(inputs.d))
    hp = HyperParams(sigma=sigma, iota=iota, chi=chi, beta=beta, eta=eta, r=r, phi=phi,
                     F_threshold=F, gamma=gamma, T=T, r0=r0, M=eta * eps,
                     tau=tau, L=L, eps=eps, rho=rho, delta_f=delta_f)
    _assert_invariants(hp)
    return hp


def _assert_invariants(hp):
    assert hp.eta * hp.L <= 0.5
    assert hp.sigma >= 8.0
    assert hp.iota >= 3.0 - 1e-12
    assert hp.chi >= 1.0
    assert 0.0 < hp.beta <= 0.5
    assert hp.F_threshold >= 3.0 / 8.0 * hp.L * hp.eta ** 2 * hp.eps ** 2 * (1 - 1e-12)
    assert beta_constraint(hp.beta, hp.tau) >= 0.0


def validate_step_size(eta, inputs: UserInputs, beta, iota=None, chi=None) -> bool:
    """True iff ``eta`` lies in the admissible region of the descent lemma.

    ``iota`` and ``chi`` default to the values derived from ``inputs``.
    """
    if iota is None or chi is None:
        hp = derive_params(inputs)
        iota = hp.iota if iota is None else iota
        chi = hp.chi if chi is None else chi
    return bool(eta <= step_size_bound(inputs.L, inputs.tau, beta, iota, chi))
