"""Objective contract, the built-in quartic test function and point classification.

Blocks are contiguous 0-based coordinate ranges passed as ``slice`` objects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._accel import njit
from .errors import ContractViolation

LARGE_GRADIENT = "LargeGradient"
SADDLE_REGION = "SaddleRegion"
NEAR_SOSP = "NearSecondOrderStationary"


@dataclass(frozen=True)
class ObjectiveSpec:
    d: int
    lipschitz_L: float
    hessian_rho: float
    global_min_fstar: float

    def __post_init__(self):
        if self.d < 2:
            raise ContractViolation(f"dimension must be >= 2, got {self.d}")
        if not self.lipschitz_L > 0 or not self.hessian_rho > 0:
            raise ContractViolation("L and rho must be strictly positive")


@dataclass(frozen=True)
class LandscapeParams:
    """Strict-saddle triple: gradient floor, curvature margin, optima radius."""

    grad_floor_phi: float
    curvature_gamma: float
    optima_radius_zeta: float

    def __post_init__(self):
        if min(self.grad_floor_phi, self.curvature_gamma, self.optima_radius_zeta) <= 0:
            raise ContractViolation("landscape parameters must be strictly positive")


@dataclass(frozen=True)
class PointClass:
    tag: str
    grad_norm: float
    min_eig_estimate: float
    low_confidence: bool = False


def as_block(block, d):
    """Normalise ``block`` to a non-empty ``slice`` inside ``[0, d)``."""
    if isinstance(block, slice):
        if (block.stop is not None and block.stop > d) or (block.start is not None and block.start < 0):
            raise ContractViolation(f"block {block} outside [0, {d})")
        start, stop, step = block.indices(d)
        if step != 1:
            raise ContractViolation("blocks must be contiguous")
    else:
        idx = np.asarray(block, dtype=np.int64).ravel()
        if idx.size == 0:
            raise ContractViolation("empty block")
        start, stop = int(idx.min()), int(idx.max()) + 1
        if stop - start != idx.size or np.any(np.diff(np.sort(idx)) != 1):
            raise ContractViolation("blocks must be contiguous index ranges")
    if stop <= start:
        raise ContractViolation("empty block")
    if start < 0 or stop > d:
        raise ContractViolation(f"block [{start}, {stop}) outside [0, {d})")
    return slice(start, stop)


class Objective:
    """Base class for objectives; subclasses provide ``value`` and ``gradient``.

    ``block_values`` and ``hessian_vector_product`` have generic fallbacks
    (slice of the full gradient, central differences of the gradient).
    """

    spec: ObjectiveSpec
    fd_step = 1e-5

    @property
    def d(self):
        return self.spec.d

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ContractViolation(f"expected a vector of length {self.d}, got shape {x.shape}")
        return x

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)

    def block_values(self, x, block) -> np.ndarray:
        """Gradient entries on ``block`` only (length ``|block|``)."""
        block = as_block(block, self.d)
        return self.gradient(x)[block]

    def block_gradient(self, x, block) -> np.ndarray:
        """Block gradient as a length-``d`` vector, zero off the block."""
        x = self._check(x)
        block = as_block(block, self.d)
        out = np.zeros(self.d)
        out[block] = self.block_values(x, block)
        return out

    def hessian_vector_product(self, x, v) -> np.ndarray:
        x = self._check(x)
        v = self._check(v)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return np.zeros(self.d)
        h = self.fd_step * max(1.0, np.linalg.norm(x)) / nv
        return (self.gradient(x + h * v) - self.gradient(x - h * v)) / (2.0 * h)

    def check_lower_bound(self, fval, atol=1e-9):
        fstar = self.spec.global_min_fstar
        if fval < fstar - atol * max(1.0, abs(fstar)):
            raise ContractViolation(f"observed f={fval!r} below declared lower bound {fstar!r}")


class AggregateObjective(Objective):
    """``f(x) = F(z)`` with ``z_g = w_g * sum(x[group g] - c_g)`` over contiguous groups.

    The gradient is constant on every group, so iterates can be tracked per
    (block, group) segment plus a handful of aggregates. The centers ``c_g``
    let ``F`` work in coordinates where the interesting point sits at the
    origin, so tiny moves away from it keep full relative precision.
    Subclasses set ``group_bounds``, ``group_weights``, ``params`` (and
    optionally ``group_centers``) plus two njit kernels:
    ``outer_value(z, params) -> float`` and ``outer_grad(z, params, out)``.
    """

    group_bounds: np.ndarray
    group_weights: np.ndarray
    params: np.ndarray
    outer_value: Callable
    outer_grad: Callable
    group_centers: np.ndarray | None = None

    def outer_hessian(self, z) -> np.ndarray:
        raise NotImplementedError

    @property
    def n_groups(self):
        return len(self.group_weights)

    @property
    def centers(self):
        if self.group_centers is None:
            return np.zeros(self.n_groups)
        return np.asarray(self.group_centers, dtype=np.float64)

    def center_vector(self):
        """``x`` with every coordinate at its group center."""
        return np.repeat(self.centers, np.diff(self.group_bounds))

    def weighted_sums(self, v) -> np.ndarray:
        """``w_g * sum(v[group g])`` without centering."""
        b = self.group_bounds
        return np.array([self.group_weights[g] * v[b[g]:b[g + 1]].sum() for g in range(self.n_groups)])

    def aggregates(self, x) -> np.ndarray:
        x = self._check(x)
        return self.weighted_sums(x - self.center_vector())

    def _outer_grad(self, z):
        out = np.empty(self.n_groups)
        self.outer_grad(z, self.params, out)
        return out

    def value(self, x) -> float:
        return float(self.outer_value(self.aggregates(x), self.params))

    def gradient(self, x) -> np.ndarray:
        gz = self._outer_grad(self.aggregates(x))
        return np.repeat(self.group_weights * gz, np.diff(self.group_bounds))

    def block_values(self, x, block) -> np.ndarray:
        block = as_block(block, self.d)
        gz = self.group_weights * self._outer_grad(self.aggregates(x))
        b = self.group_bounds
        out = np.empty(block.stop - block.start)
        for g in range(self.n_groups):
            lo, hi = max(b[g], block.start), min(b[g + 1], block.stop)
            if lo < hi:
                out[lo - block.start:hi - block.start] = gz[g]
        return out

    def hessian_vector_product(self, x, v) -> np.ndarray:
        z = self.aggregates(x)
        av = self.weighted_sums(self._check(v))
        hz = self.outer_hessian(z) @ av
        return np.repeat(self.group_weights * hz, np.diff(self.group_bounds))


# z = (r - 1, s + 1): the aggregates are centered on the saddle
@njit
def quartic_outer_value(z, params):
    d = params[0]
    a = z[0]
    b = z[1]
    a2 = a * a
    return d * (a2 * a2 - a2 + b * b)


@njit
def quartic_outer_grad(z, params, out):
    d = params[0]
    a = z[0]
    out[0] = d * (4.0 * a * a * a - 2.0 * a)
    out[1] = d * 2.0 * z[1]


def quartic_constants(d, box_halfwidth=1.25):
    """Gradient- and Hessian-Lipschitz constants of the quartic on a box.

    The box is ``|r - 1| <= h, |s + 1| <= h`` around the saddle. The Hessian
    is ``f_rr(r) a a^T + f_ss b b^T`` with ``|a|^2 = |b|^2 = 2/d``, so
    ``L = max(|24 (r-1)^2 - 4|, 4)`` and ``rho = sup|f_rrr| |a|^3 = 24 h 2^1.5 / sqrt(d)``.
    """
    h = float(box_halfwidth)
    L = max(24.0 * h * h - 4.0, 4.0)
    rho = 24.0 * h * 2.0 ** 1.5 / math.sqrt(d)
    return L, rho


class PaperQuartic(AggregateObjective):
    """``d [(r-1)^4 - (r-1)^2 + (s+1)^2]`` of the two half-means scaled by 2/d.

    Saddle at ``(r, s) = (1, -1)`` with value 0; minima at ``r = 1 +- 1/sqrt(2)``
    with value ``-d/4``.
    """

    outer_value = staticmethod(quartic_outer_value)
    outer_grad = staticmethod(quartic_outer_grad)

    def __init__(self, d, box_halfwidth=1.25):
        d = int(d)
        if d < 2 or d % 2:
            raise ContractViolation(f"the quartic needs an even dimension >= 2, got {d}")
        L, rho = quartic_constants(d, box_halfwidth)
        self.box_halfwidth = float(box_halfwidth)
        self.spec = ObjectiveSpec(d=d, lipschitz_L=L, hessian_rho=rho, global_min_fstar=-d / 4.0)
        self.group_bounds = np.array([0, d // 2, d], dtype=np.int64)
        self.group_weights = np.full(2, 2.0 / d)
        self.params = np.array([float(d)])
        self.group_centers = np.array([1.0, -1.0])

    def outer_hessian(self, z):
        d = self.params[0]
        a = z[0]
        return np.diag([d * (12.0 * a * a - 2.0), 2.0 * d])

    def point(self, r, s):
        """A point whose half-means are exactly ``r`` and ``s``."""
        half = self.d // 2
        return np.concatenate([np.full(half, float(r)), np.full(half, float(s))])

    def saddle(self):
        return self.point(1.0, -1.0)

    def local_minimum(self, sign=1):
        return self.point(1.0 + sign / math.sqrt(2.0), -1.0)

    def to_rs(self, x):
        a, b = self.aggregates(x)
        return 1.0 + a, b - 1.0


_REGISTRY: dict[str, Callable[..., Objective]] = {"paper_quartic": PaperQuartic}


def register_objective(name, factory):
    """Register ``factory(d=..., **kwargs) -> Objective`` under ``name``."""
    if name in _REGISTRY:
        raise ValueError(f"objective {name!r} already registered")
    _REGISTRY[name] = factory


def make_objective(name, **kwargs) -> Objective:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ContractViolation(f"unknown objective {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**kwargs)


def registered_objectives():
    return sorted(_REGISTRY)


def min_eigenvalue(objective, x, power_iters=500, seed=0, rtol=1e-12):
    """Smallest Hessian eigenvalue by power iteration on ``L I - H``.

    Returns ``(estimate, converged)``. Valid while ``L`` bounds the spectrum.
    """
    L = objective.spec.lipschitz_L
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(objective.d)
    v /= np.linalg.norm(v)
    mu = math.inf
    for _ in range(int(power_iters)):
        w = L * v - objective.hessian_vector_product(x, v)
        mu_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return L, True
        v = w / nw
        if abs(mu_new - mu) <= rtol * max(1.0, abs(mu_new)):
            return L - mu_new, True
        mu = mu_new
    return L - mu, False


def classify_point(objective, x, eps, power_iters=500, seed=0) -> PointClass:
    spec = objective.spec
    if not eps > 0:
        raise ContractViolation("eps must be positive")
    if eps > spec.lipschitz_L ** 2 / spec.hessian_rho:
        raise ContractViolation("eps must not exceed L**2 / rho")
    x = objective._check(x)
    grad_norm = float(np.linalg.norm(objective.gradient(x)))
    lam, converged = min_eigenvalue(objective, x, power_iters=power_iters, seed=seed)
    if grad_norm > eps:
        tag = LARGE_GRADIENT
    elif lam < -math.sqrt(spec.hessian_rho * eps):
        tag = SADDLE_REGION
    else:
        tag = NEAR_SOSP
    return PointClass(tag=tag, grad_norm=grad_norm, min_eig_estimate=float(lam), low_confidence=not converged)
