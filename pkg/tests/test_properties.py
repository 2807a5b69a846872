from __future__ import annotations

import json

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from qmatch.dist import atomic, from_points, ks_distance, mix, stieltjes_integral
from qmatch.implement import is_implementable, matching_experiment, matching_selection, pushforward, quantile_bounds
from qmatch.io import cdf_from_json, cdf_to_json
from qmatch.objective import Objective
from qmatch.optimize import hp_distribution, optimize_quantile_dist

from .conftest import UNIT

SETTINGS = settings(max_examples=40, deadline=None)
qs = st.floats(0.05, 0.95)
levels = st.floats(0.0, 1.0)


@st.composite
def atomic_priors(draw):
    k = draw(st.integers(1, 6))
    locs = draw(st.lists(st.integers(0, 40), min_size=k, max_size=k, unique=True))
    w = np.array(draw(st.lists(st.integers(1, 20), min_size=k, max_size=k)), dtype=float)
    return atomic(np.array(locs) / 40, w / w.sum(), UNIT)


@st.composite
def continuous_priors(draw):
    k = draw(st.integers(1, 5))
    inner = sorted(draw(st.lists(st.integers(1, 39), min_size=k, max_size=k, unique=True)))
    steps = np.array(draw(st.lists(st.integers(1, 20), min_size=k + 1, max_size=k + 1)), dtype=float)
    xs = np.r_[0, np.array(inner) / 40, 1]
    return from_points(UNIT, xs, np.r_[0, np.cumsum(steps) / steps.sum()])


priors = st.one_of(atomic_priors(), continuous_priors(),
                   st.tuples(atomic_priors(), continuous_priors(), st.floats(0.1, 0.9))
                   .map(lambda t: mix([(t[2], t[0]), (1 - t[2], t[1])])))


@SETTINGS
@given(priors, qs)
def test_bounds_sandwich_prior(f, q):
    lower, upper = quantile_bounds(f, q)
    xs = np.linspace(0, 1, 97)
    assert np.all(lower(xs) <= f(xs) + 1e-12) and np.all(f(xs) <= upper(xs) + 1e-12)


@SETTINGS
@given(priors, levels)
def test_galois_inequality(f, p):
    assert f.eval(f.gen_inverse(p)) >= p - 1e-12
    assert f.upper_inverse(p) >= f.gen_inverse(p)


@SETTINGS
@given(priors, qs, levels)
def test_hp_is_implementable(f, q, p):
    assert is_implementable(hp_distribution(p, f, q), f, q)


@SETTINGS
@given(priors, qs, levels, levels)
def test_matching_implements_mixtures(f, q, p, w):
    lower, _ = quantile_bounds(f, q)
    h = mix([(w, lower), (1 - w, hp_distribution(p, f, q))]) if 0 < w < 1 else lower
    out = pushforward(matching_experiment(f, q), matching_selection(h, f, q))
    assert ks_distance(out, h) < 1e-12


@SETTINGS
@given(priors, qs, st.floats(-0.5, 1.5), levels)
def test_optimum_beats_hp_family(f, q, c, p):
    v = Objective.quadratic(c)
    opt = optimize_quantile_dist(v, f, q)
    assert is_implementable(opt.H_star, f, q, tol=1e-9)
    assert stieltjes_integral(v, hp_distribution(p, f, q)) <= opt.value + 1e-9
    assert abs(opt.value - stieltjes_integral(v, opt.H_star)) < 1e-9


@SETTINGS
@given(priors)
def test_json_round_trip(f):
    back = cdf_from_json(json.loads(json.dumps(cdf_to_json(f))))
    assert np.array_equal(back.x, f.x) and np.array_equal(back.right, f.right)
    assert np.array_equal(back.left, f.left)
