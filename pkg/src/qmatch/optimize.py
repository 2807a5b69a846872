"""Optimal implementable quantile distributions for continuous objectives.

The optimum over the implementable set is obtained levelwise: at level
``p`` the quantile may sit anywhere in ``[a(p), b(p)]`` with
``a = H_upper^{-1}`` and ``b = H_lower^{-1}``, so the best value is the
integral over ``p`` of ``max V`` on that interval.  Both endpoints are
piecewise linear in ``p`` and ``V`` is piecewise quadratic, which lets the
sweep below compute the integral and its min-argmax path exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .dist import TOL, Cdf, InvariantError, QuantileInterval, splice, stieltjes_integral
from .implement import _check_q, is_implementable, matching_experiment, quantile_bounds
from .objective import Objective

TIE_TOL = 1e-12
# sweep candidates are indexed lower end 0, upper end 1, interior 2; on the line the interior sits between
_LINE_ORDER = {0: 0, 2: 1, 1: 2}


class ObjectiveShapeError(ValueError):
    """The objective lacks the shape a closed-form solution requires."""


@dataclass(frozen=True)
class SweepResult:
    value: float
    min_path: list  # quantile pieces of the min-argmax path
    max_path: list  # quantile pieces of the max-argmax path
    nonunique_measure: float


@dataclass(frozen=True)
class Optimum:
    H_star: Cdf
    value: float
    J_star: tuple
    unique: bool
    nonunique_measure: float
    alternative: Cdf | None = None

    def to_dict(self) -> dict:
        from .io import cdf_to_json

        out = {
            "value": self.value,
            "H_star": cdf_to_json(self.H_star),
            "J_star": [list(pc) for pc in self.J_star],
            "unique": self.unique,
            "nonunique_measure": self.nonunique_measure,
        }
        if self.alternative is not None:
            out["alternative"] = cdf_to_json(self.alternative)
        return out


# -- the sweep ------------------------------------------------------------------


def _piece_at(pieces, u):
    for pc in pieces:
        if pc[0] - TOL <= u <= pc[1] + TOL:
            return pc
    return pieces[-1]


def _linear_on(pc, s0, s1):
    """Values of a linear piece at ``s0`` and ``s1``."""
    u0, u1, x0, x1 = pc
    slope = (x1 - x0) / (u1 - u0) if u1 > u0 else 0.0
    return x0 + slope * (s0 - u0), x0 + slope * (s1 - u0)


def _crossings(pieces, cands):
    """Levels at which a piecewise-linear path crosses a candidate state."""
    out = []
    for u0, u1, x0, x1 in pieces:
        if abs(x1 - x0) <= TOL:
            continue
        lo, hi = min(x0, x1), max(x0, x1)
        inside = cands[(cands > lo + TOL) & (cands < hi - TOL)]
        out.extend(u0 + (inside - x0) / (x1 - x0) * (u1 - u0))
    return out


def _compose(v: Objective, x_mid: float, xa: float, xb: float, length: float) -> Polynomial:
    """``V`` along the segment from ``xa`` to ``xb``, in local level ``t`` in ``[0, length]``."""
    c0, c1, c2 = v.coefs[int(v.piece_index(x_mid))]
    slope = (xb - xa) / length if length > 0 else 0.0
    path = Polynomial([xa, slope])
    return Polynomial([c0, c1, c2])(path)


def sweep(lower_pieces: Sequence, upper_pieces: Sequence, v: Objective) -> SweepResult:
    """Integrate ``max{V(x): lower(u) <= x <= upper(u)}`` over ``u`` in ``[0, 1]``.

    Both paths are lists of ``(u0, u1, x0, x1)`` linear pieces covering
    the unit interval.  Returns the integral, the min- and max-argmax
    paths as pieces, and the measure of levels with several distinct
    maximizers.
    """
    cands = v.fixed_candidates()
    events = [0.0, 1.0]
    for pieces in (lower_pieces, upper_pieces):
        events.extend(u for pc in pieces for u in pc[:2])
        events.extend(_crossings(pieces, cands))
    events = np.unique(np.clip(events, 0.0, 1.0))
    events = events[np.r_[True, np.diff(events) > TOL]]
    events[-1] = 1.0

    total = 0.0
    nonunique = 0.0
    min_path, max_path = [], []
    for s0, s1 in zip(events[:-1], events[1:]):
        length = s1 - s0
        mid = 0.5 * (s0 + s1)
        a0, a1 = _linear_on(_piece_at(lower_pieces, mid), s0, s1)
        b0, b1 = _linear_on(_piece_at(upper_pieces, mid), s0, s1)
        am, bm = 0.5 * (a0 + a1), 0.5 * (b0 + b1)
        if bm < am - 1e-9:
            raise InvariantError(f"lower path exceeds upper path at level {mid}")
        pa = _compose(v, am, a0, a1, length)
        pb = _compose(v, bm, b0, b1, length)
        inner = cands[(cands > am + TOL) & (cands < bm - TOL)]
        polys = [pa, pb]
        inner_best = None
        if inner.size:
            vals = v.eval(inner)
            best = float(vals.max())
            hit = inner[vals >= best - TIE_TOL * max(1.0, abs(best))]
            inner_best = (float(hit.min()), float(hit.max()))
            polys.append(Polynomial([best]))

        # split where candidate values cross
        cuts = [0.0, length]
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                diff = (polys[i] - polys[j]).trim(tol=1e-14)
                if diff.degree() < 1 or np.all(np.abs(diff.coef) <= 1e-14):
                    continue
                for r in diff.roots():
                    if abs(r.imag) <= 1e-12 and 0.0 < r.real < length:
                        cuts.append(float(r.real))
        cuts = np.unique(cuts)

        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            if t1 - t0 <= 0:
                continue
            tm = 0.5 * (t0 + t1)
            vals = np.array([float(p(tm)) for p in polys])
            best = vals.max()
            tied = np.flatnonzero(vals >= best - TIE_TOL * max(1.0, abs(best)))
            k_min = min(tied, key=_LINE_ORDER.get)
            k_max = max(tied, key=_LINE_ORDER.get)
            win = polys[k_min].integ()
            total += float(win(t1) - win(t0))

            u0, u1 = s0 + t0, s0 + t1
            ends = {
                0: (a0 + (a1 - a0) * t0 / length, a0 + (a1 - a0) * t1 / length),
                1: (b0 + (b1 - b0) * t0 / length, b0 + (b1 - b0) * t1 / length),
            }
            if inner_best is not None:
                ends[2] = (inner_best[0], inner_best[0])
                ends[3] = (inner_best[1], inner_best[1])
            lo_pos = ends[k_min]
            hi_pos = ends[3] if k_max == 2 else ends[k_max]
            min_path.append((u0, u1, *lo_pos))
            max_path.append((u0, u1, *hi_pos))
            mid_lo, mid_hi = 0.5 * sum(lo_pos), 0.5 * sum(hi_pos)
            if mid_hi - mid_lo > 1e-12:
                nonunique += t1 - t0
    return SweepResult(total, min_path, max_path, nonunique)


# -- public operations ----------------------------------------------------------


def feasible_interval(f: Cdf, q: float, p: float) -> QuantileInterval:
    """States available at level ``p``: ``[F^{-1}(q p), F^{-1}(q + (1 - q) p)]``.

    For ``p > 0`` these are the generalized inverses of the upper and
    lower bounds; at ``p = 0`` the right limit is reported.
    """
    _check_q(q)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    lo = float(f.gen_inverse(q * p))
    hi = float(f.gen_inverse(q + (1 - q) * p))
    return QuantileInterval(lo, max(lo, hi))


def optimize_quantile_dist(v: Objective, f: Cdf, q: float) -> Optimum:
    """Maximize ``integral V dH`` over implementable ``H``.

    ``H_star`` has the min-argmax path as its generalized inverse.  When
    ties between distinct maximizers occupy a positive measure of levels
    the solution is not unique and the max-argmax path is returned as the
    alternative.
    """
    _check_q(q)
    v.require_covers(f.domain)
    lower, upper = matching_experiment(f, q).interval_pieces()
    res = sweep(lower, upper, v)
    h_star = Cdf.from_quantile_pieces(res.min_path, f.domain)
    check = is_implementable(h_star, f, q, tol=1e-9)
    if not check:
        raise InvariantError(f"optimizer left the implementable set at x={check.x}")
    unique = res.nonunique_measure <= 1e-12
    alt = None if unique else Cdf.from_quantile_pieces(res.max_path, f.domain)
    return Optimum(h_star, res.value, tuple(res.min_path), unique, res.nonunique_measure, alt)


def hp_distribution(p: float, f: Cdf, q: float) -> Cdf:
    """``H_upper`` below ``F^{-1}(q p)``, flat at ``p`` until ``F^{-1}(q + (1 - q) p)``, ``H_lower`` after."""
    _check_q(q)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    lower, upper = quantile_bounds(f, q)
    iv = feasible_interval(f, q, p)
    dom = f.domain
    return splice(dom, [(dom.lo, upper), (iv.lo, float(p)), (iv.hi, lower)])


def solution_quasiconcave(x_star: float, f: Cdf, q: float) -> Cdf:
    """``H_lower`` below ``x_star`` and ``H_upper`` from ``x_star`` on."""
    _check_q(q)
    dom = f.domain
    if not dom.contains(x_star):
        raise ValueError(f"x_star={x_star} outside [{dom.lo}, {dom.hi}]")
    lower, upper = quantile_bounds(f, q)
    return splice(dom, [(dom.lo, lower), (float(x_star), upper)])


def _structural_levels(f: Cdf, q: float) -> np.ndarray:
    """Levels ``p`` at which either end of the feasible interval can change regime."""
    vals = np.unique(np.r_[f.left, f.right])
    return np.unique(np.clip(np.r_[vals / q, (vals - q) / (1 - q)], 0.0, 1.0))


def _last_true(pred, iters: int) -> float | None:
    """``sup{p in [0, 1]: pred(p)}`` for a predicate that is true then false; None if never true."""
    if not pred(0.0):
        return None
    if pred(1.0):
        return 1.0
    a, b = 0.0, 1.0
    for _ in range(iters):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        if pred(m):
            a = m
        else:
            b = m
    return b


def indifference_level(v: Objective, f: Cdf, q: float, iters: int = 200) -> float:
    """Level ``p* = sup{p: V(lower end) >= V(upper end)}`` of the feasible interval.

    Below ``p*`` the lower end is (weakly) preferred and above it the upper
    end, so ties go to the lower end as in the min-argmax path.  Without
    an interior switch the boundary agreeing with the general optimizer
    is returned: 0 when the upper end always wins, 1 when the lower end
    always does.

    Since ``lower end <= F^-1(q) <= upper end``, an interval collapses
    exactly when both ends sit at ``F^-1(q)``; such levels carry no choice
    and are skipped.  On the remaining levels the preference crosses once
    for strictly quasi-convex ``V``.
    """
    m = float(f.gen_inverse(q))
    gap = TOL * max(1.0, f.domain.width)

    def ends(p):
        iv = feasible_interval(f, q, p)
        return iv.lo, iv.hi

    def margin(p):
        lo, hi = ends(p)
        a, b = float(v.eval(lo)), float(v.eval(hi))
        return a - b, max(1.0, abs(a), abs(b))

    def lower_wins(p, slack):
        d, scale = margin(p)
        return d >= -slack * scale

    def search(slack):
        # levels whose lower end is still below F^-1(q) come first and never collapse
        opening = lambda p: ends(p)[0] < m - gap  # noqa: E731
        a = _last_true(opening, iters)
        p1 = _last_true(lambda p: opening(p) and lower_wins(p, slack), iters)
        if a is not None:
            if p1 is None:
                return 0.0
            if p1 < a - 1e-12:
                return p1
        # the lower end won throughout: continue past collapsed levels (upper end at F^-1(q))
        p2 = _last_true(lambda p: ends(p)[1] <= m + gap or lower_wins(p, slack), iters)
        return 0.0 if p2 is None else p2

    p_star = search(0.0)
    # a rounding-level tie over a whole range of levels goes to the lower end
    p_tied = search(TIE_TOL)
    if p_tied - p_star > 1e-9:
        d, scale = margin(0.5 * (p_star + p_tied))
        if abs(d) <= 64 * np.finfo(float).eps * scale:
            p_star = p_tied
    # knot snapping inside the inverses shifts jumps by about TOL / q, and where the
    # margin vanishes at a structural level its sign is only rounding nearby
    levels = _structural_levels(f, q)
    if levels.size:
        near = float(levels[np.argmin(np.abs(levels - p_star))])
        if abs(near - p_star) <= 1e-9:
            return near
        if abs(near - p_star) <= 1e-6:
            d, scale = margin(0.5 * (near + p_star))
            if abs(d) <= TIE_TOL * scale:
                return near
    return float(p_star)


def solution_quasiconvex(v: Objective, f: Cdf, q: float) -> Cdf:
    """Optimal ``H_p`` for a strictly quasi-convex objective."""
    _check_q(q)
    if not v.is_strictly_quasiconvex(f.domain):
        raise ObjectiveShapeError("objective is not strictly quasi-convex on the domain")
    return hp_distribution(indifference_level(v, f, q), f, q)


def objective_value(v: Objective, h: Cdf) -> float:
    return stieltjes_integral(v, h)
