from __future__ import annotations

import numpy as np
import pytest

from qmatch.dist import Cdf, Domain, atomic, from_points, mix, uniform
from qmatch.implement import quantile_bounds
from qmatch.optimize import hp_distribution

UNIT = Domain(0.0, 1.0)


def prior_corpus() -> dict[str, Cdf]:
    """Priors used across the suite: continuous, kinked, atomic and mixed."""
    wide = Domain(-1.0, 2.0)
    return {
        "uniform": uniform(0.0, 1.0),
        "kinked": from_points(UNIT, [0.0, 0.3, 0.7, 1.0], [0.0, 0.6, 0.7, 1.0]),
        "atomic": atomic([0.1, 0.35, 0.5, 0.8], [0.2, 0.3, 0.1, 0.4], UNIT),
        "mixed": mix([(0.6, uniform(0.0, 1.0)), (0.4, atomic([0.25, 0.9], [0.5, 0.5], UNIT))]),
        "wide": from_points(wide, [-1.0, 0.0, 1.5, 2.0], [0.0, 0.1, 0.8, 1.0]),
    }


def continuous_corpus() -> dict[str, Cdf]:
    c = prior_corpus()
    return {k: c[k] for k in ("uniform", "kinked", "wide")}


def random_implementable(f: Cdf, q: float, rng: np.random.Generator) -> Cdf:
    """Random convex combination of the two bounds, two H_p and the prior."""
    lower, upper = quantile_bounds(f, q)
    parts = [lower, upper, hp_distribution(rng.random(), f, q), hp_distribution(rng.random(), f, q), f]
    w = rng.dirichlet(np.ones(len(parts)))
    return mix(list(zip(w, parts)))


@pytest.fixture
def uni():
    return uniform(0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def atomic8():
    return atomic((2 * np.arange(8) + 1) / 16, np.full(8, 1 / 8), UNIT)
