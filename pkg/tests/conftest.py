import math

import numpy as np
import pytest

from polbounds.polcore import ModalParams


def random_interior_states(seed, n, amp_range=(0.3, 2.0)):
    """Seeded interior modal points (away from poles and the vacuum)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        ah, av = rng.uniform(*amp_range, size=2)
        out.append(ModalParams(ah, av, rng.uniform(-math.pi, math.pi)))
    return out


def random_interior_states_s0(seed, n, s0, frac_range=(0.08, 0.92)):
    """Seeded interior points at a fixed total power."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        frac = rng.uniform(*frac_range)
        ah = math.sqrt(frac * s0)
        out.append(ModalParams(ah, math.sqrt(s0 - ah * ah),
                               rng.uniform(-math.pi, math.pi)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
