"""Independent reference computations: brute force, bisection, quadrature, LP."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog


def bisect_inverse(fn, p, lo, hi, iters=200):
    """Smallest x with fn(x) >= p for nondecreasing fn, by bisection."""
    if p <= 0:
        return lo
    a, b = lo, hi
    for _ in range(iters):
        m = 0.5 * (a + b)
        if fn(m) >= p:
            b = m
        else:
            a = m
    return b


def levelwise_value(v, f_inv, q, levels=20001, xs_per_interval=401):
    """Midpoint-rule integral over p of the max of v on [F^-1(qp), F^-1(q + (1-q)p)]."""
    ps = (np.arange(levels) + 0.5) / levels
    total = 0.0
    for p in ps:
        a, b = f_inv(q * p), f_inv(q + (1 - q) * p)
        xs = np.linspace(a, b, xs_per_interval)
        total += np.max(v(xs))
    return total / levels


def quantile_integral(v, h_inv, levels=200001):
    """Midpoint-rule integral of v(H^-1(p)) dp, i.e. the integral of v dH."""
    ps = (np.arange(levels) + 0.5) / levels
    return float(np.mean(v(h_inv(ps))))


def lp_feasible(lo, hi, w, locs, masses, tol=1e-9):
    """Transport feasibility of interval supplies to point demands, via linprog."""
    pairs = [(i, j) for i in range(len(w)) for j in range(len(locs)) if lo[i] - tol <= locs[j] <= hi[i] + tol]
    if not pairs:
        return False
    a_eq = np.zeros((len(w) + len(locs), len(pairs)))
    for k, (i, j) in enumerate(pairs):
        a_eq[i, k] = 1.0
        a_eq[len(w) + j, k] = 1.0
    b_eq = np.r_[w, masses]
    res = linprog(np.zeros(len(pairs)), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0
