import numpy as np
import pytest

from seacgd.objective import Objective, ObjectiveSpec, PaperQuartic


class HalfSquare(Objective):
    """f(x) = |x|^2 / 2: the hand-checkable helper used in the examples."""

    def __init__(self, d=2, L=1.0):
        self.spec = ObjectiveSpec(d=d, lipschitz_L=L, hessian_rho=1e-9, global_min_fstar=0.0)

    def value(self, x):
        x = self._check(x)
        return 0.5 * float(x @ x)

    def gradient(self, x):
        return self._check(x).copy()


@pytest.fixture
def half_square():
    return HalfSquare()


@pytest.fixture
def quartic2():
    return PaperQuartic(2)


def quartic_reference(x):
    """Independent scalar evaluation of the test function."""
    d = len(x)
    r = 2.0 / d * sum(x[: d // 2])
    s = 2.0 / d * sum(x[d // 2:])
    return d * ((r - 1) ** 4 - (r - 1) ** 2 + (s + 1) ** 2)
