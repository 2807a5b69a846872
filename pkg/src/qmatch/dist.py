"""Piecewise-linear distribution functions with atoms on a compact interval.

A :class:`Cdf` is stored as sorted knots ``(x, left, right)``: ``right`` is the
value at ``x``, ``left`` the left limit there, and the function is linear
between consecutive knots.  The class is closed under everything the rest of
the package needs (generalized inverses, mixtures, splicing), so no quadrature
ever enters the core.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TOL = 1e-12


class DomainError(ValueError):
    """A state lies outside the distribution's domain."""


class InvariantError(ValueError):
    """Input data would violate a distribution invariant."""


@dataclass(frozen=True)
class Domain:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise InvariantError(f"domain needs finite lo < hi, got [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x, tol: float = TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lo - tol) & (x <= self.hi + tol)))

    def clip(self, x):
        return np.clip(x, self.lo, self.hi)


@dataclass(frozen=True)
class QuantileInterval:
    """Closed interval ``[lo, hi]`` of quantiles of a posterior."""

    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float, tol: float = 1e-9) -> bool:
        return self.lo - tol <= x <= self.hi + tol


# (u0, u1, x0, x1): on levels (u0, u1] the quantile function runs linearly
# from x0 to x1.  Constant pieces (x0 == x1) are atoms.
QuantilePiece = tuple


class Cdf:
    """Right-continuous distribution function, piecewise linear with atoms.

    Instances are immutable.  The constructor normalizes its input: knots
    closer than ``TOL`` are merged, a knot is added at each end of the
    domain, and tiny monotonicity defects (below ``1e-9``) are repaired.
    Larger defects raise :class:`InvariantError`.
    """

    __slots__ = ("domain", "x", "left", "right")

    def __init__(self, domain: Domain, x, left, right):
        if not isinstance(domain, Domain):
            domain = Domain(*domain)
        x = np.array(x, dtype=float).ravel()
        left = np.array(left, dtype=float).ravel()
        right = np.array(right, dtype=float).ravel()
        if not (x.shape == left.shape == right.shape) or x.size == 0:
            raise InvariantError("knot arrays must be non-empty and of equal length")
        if np.any(~np.isfinite(x)) or np.any(~np.isfinite(left)) or np.any(~np.isfinite(right)):
            raise InvariantError("knots must be finite")
        if np.any(np.diff(x) < 0):
            order = np.argsort(x, kind="stable")
            x, left, right = x[order], left[order], right[order]
        if x[0] < domain.lo - TOL or x[-1] > domain.hi + TOL:
            raise InvariantError(
                f"knots span [{x[0]}, {x[-1]}], outside domain [{domain.lo}, {domain.hi}]"
            )
        x = np.clip(x, domain.lo, domain.hi)
        x, left, right = _merge_close(x, left, right)

        # close the function off at both ends of the domain
        if x[0] > domain.lo + TOL:
            x = np.concatenate(([domain.lo], x))
            left = np.concatenate(([0.0], left))
            right = np.concatenate(([left[1]], right))
        else:
            x[0] = domain.lo
        left[0] = 0.0
        if x[-1] < domain.hi - TOL:
            x = np.concatenate((x, [domain.hi]))
            left = np.concatenate((left, [right[-1]]))
            right = np.concatenate((right, [right[-1]]))
        else:
            x[-1] = domain.hi

        vals = np.empty(2 * x.size)
        vals[0::2], vals[1::2] = left, right
        if np.any(vals < -1e-9) or np.any(vals > 1 + 1e-9):
            raise InvariantError("distribution values must lie in [0, 1]")
        if np.any(np.diff(vals) < -1e-9):
            i = int(np.argmax(np.diff(vals) < -1e-9)) // 2
            raise InvariantError(f"distribution function decreases near x={x[i]}")
        if abs(vals[-1] - 1.0) > 1e-9:
            raise InvariantError(f"value at the top of the domain is {vals[-1]}, expected 1")
        vals = np.maximum.accumulate(np.clip(vals, 0.0, 1.0))
        vals[-1] = 1.0
        left, right = vals[0::2].copy(), vals[1::2].copy()
        for arr in (x, left, right):
            arr.setflags(write=False)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def __setattr__(self, name, value):
        raise AttributeError("Cdf is immutable")

    def __repr__(self):
        return f"Cdf(domain=[{self.domain.lo}, {self.domain.hi}], knots={self.x.size})"

    def __reduce__(self):
        return (Cdf, (self.domain, np.array(self.x), np.array(self.left), np.array(self.right)))

    # -- evaluation -----------------------------------------------------------

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        if not self.domain.contains(x):
            bad = x[(x < self.domain.lo - TOL) | (x > self.domain.hi + TOL)]
            raise DomainError(f"state {bad.ravel()[0]} outside [{self.domain.lo}, {self.domain.hi}]")
        x = self.domain.clip(x)
        i = np.searchsorted(self.x, x + TOL, side="right") - 1
        i = np.clip(i, 0, self.x.size - 1)
        at_knot = np.abs(x - self.x[i]) <= TOL
        return x, i, at_knot

    def _between(self, x, i):
        j = np.minimum(i + 1, self.x.size - 1)
        dx = self.x[j] - self.x[i]
        t = np.divide(x - self.x[i], dx, out=np.zeros_like(x), where=dx > 0)
        return self.right[i] + t * (self.left[j] - self.right[i])

    def eval(self, x, side: str = "right"):
        """Value ``D(x)`` (``side="right"``) or left limit ``D(x-)``."""
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        x, i, at_knot = self._locate(x)
        knot_vals = self.right[i] if side == "right" else self.left[i]
        out = np.where(at_knot, knot_vals, self._between(x, i))
        return float(out) if out.ndim == 0 else out

    __call__ = eval

    def left_limit(self, x):
        return self.eval(x, side="left")

    def gen_inverse(self, p):
        """Smallest ``x`` with ``D(x) >= p``; ``p = 0`` maps to ``domain.lo``."""
        p = _check_levels(p)
        k = np.searchsorted(self.right, p - TOL, side="left")
        k = np.clip(k, 0, self.x.size - 1)
        prev = np.maximum(k - 1, 0)
        r, l = self.right[prev], self.left[k]
        x0, x1 = self.x[prev], self.x[k]
        rise = l - r
        inside = (k > 0) & (l >= p - TOL) & (rise > TOL)
        t = np.divide(p - r, rise, out=np.ones_like(p), where=rise > TOL)
        interp = np.clip(x0 + np.clip(t, 0.0, 1.0) * (x1 - x0), x0, x1)
        out = np.where(inside, interp, x1)
        out = np.where(p <= 0, self.domain.lo, out)
        return float(out) if out.ndim == 0 else out

    def upper_inverse(self, p):
        """Largest ``x`` with ``D(x-) <= p``."""
        p = _check_levels(p)
        j = np.searchsorted(self.left, p + TOL, side="right")
        top = j >= self.x.size
        j = np.clip(j, 1, self.x.size - 1)
        r, l = self.right[j - 1], self.left[j]
        x0, x1 = self.x[j - 1], self.x[j]
        rise = l - r
        t = np.divide(p - r, rise, out=np.zeros_like(p), where=rise > TOL)
        interp = np.clip(x0 + np.clip(t, 0.0, 1.0) * (x1 - x0), x0, x1)
        out = np.where(r > p + TOL, x0, interp)
        out = np.where(top, self.domain.hi, out)
        return float(out) if out.ndim == 0 else out

    # -- structure ------------------------------------------------------------

    @property
    def jumps(self) -> np.ndarray:
        return self.right - self.left

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Locations and masses of all atoms."""
        m = self.jumps > TOL
        return self.x[m].copy(), self.jumps[m].copy()

    @property
    def is_atomic(self) -> bool:
        return bool(np.all(self.left[1:] - self.right[:-1] <= TOL))

    @property
    def is_continuous(self) -> bool:
        return bool(np.all(self.jumps <= TOL))

    @property
    def is_strictly_increasing(self) -> bool:
        return bool(np.all(self.left[1:] - self.right[:-1] > TOL))

    def quantile_pieces(self) -> list[QuantilePiece]:
        """The generalized inverse as linear pieces over levels, in level order."""
        pieces = []
        for i in range(self.x.size):
            if self.right[i] - self.left[i] > TOL:
                pieces.append((self.left[i], self.right[i], self.x[i], self.x[i]))
            if i + 1 < self.x.size and self.left[i + 1] - self.right[i] > TOL:
                pieces.append((self.right[i], self.left[i + 1], self.x[i], self.x[i + 1]))
        return [tuple(float(v) for v in pc) for pc in pieces]

    @classmethod
    def from_quantile_pieces(cls, pieces: Iterable[QuantilePiece], domain: Domain) -> "Cdf":
        """Distribution whose generalized inverse is the given monotone pieces.

        Pieces must tile the levels ``(0, 1]`` in order, with the state
        nondecreasing across them.  Level gaps or state decreases below
        ``1e-9`` are absorbed.
        """
        xs, ls, rs = [], [], []
        last_x = -np.inf

        def put(x, lft, rgt):
            if xs and x <= xs[-1] + TOL:
                rs[-1] = max(rs[-1], rgt)
            else:
                xs.append(x)
                ls.append(lft)
                rs.append(rgt)

        for u0, u1, x0, x1 in pieces:
            if u1 - u0 <= TOL:
                continue
            if x0 < last_x - 1e-9 or x1 < x0 - 1e-9:
                raise InvariantError("quantile pieces are not monotone")
            x0 = max(x0, last_x)
            x1 = max(x1, x0)
            if x1 - x0 <= TOL:
                put(x0, u0, u1)
            else:
                put(x0, u0, u0)
                put(x1, u1, u1)
            last_x = x1
        if not xs:
            raise InvariantError("no quantile pieces with positive length")
        return cls(domain, xs, ls, rs)

    def knots(self) -> list[tuple[float, float, float]]:
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.x, self.left, self.right)]


def _merge_close(x, left, right):
    keep = np.ones(x.size, dtype=bool)
    keep[1:] = np.diff(x) > TOL
    if keep.all():
        return x.copy(), left.copy(), right.copy()
    first = np.flatnonzero(keep)
    last = np.r_[first[1:] - 1, x.size - 1]
    return x[first].copy(), left[first].copy(), right[last].copy()


def _check_levels(p):
    p = np.asarray(p, dtype=float)
    if np.any(p < -TOL) or np.any(p > 1 + TOL) or np.any(np.isnan(p)):
        raise ValueError("levels must lie in [0, 1]")
    return np.clip(p, 0.0, 1.0)


# -- constructors ---------------------------------------------------------------


def uniform(a: float, b: float, domain: Domain | None = None) -> Cdf:
    domain = domain or Domain(a, b)
    return Cdf(domain, [a, b], [0.0, 1.0], [0.0, 1.0])


def dirac(at: float, domain: Domain) -> Cdf:
    return atomic([at], [1.0], domain)


def atomic(locs: Sequence[float], masses: Sequence[float], domain: Domain) -> Cdf:
    """Pure-atom distribution; coincident locations are pooled."""
    locs = np.asarray(locs, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if locs.shape != masses.shape or locs.size == 0:
        raise InvariantError("atom locations and masses must match and be non-empty")
    if np.any(masses < -TOL):
        raise InvariantError("atom masses must be nonnegative")
    if abs(masses.sum() - 1.0) > 1e-9:
        raise InvariantError(f"atom masses sum to {masses.sum()}, expected 1")
    order = np.argsort(locs, kind="stable")
    locs, masses = locs[order], masses[order]
    cum = np.cumsum(masses)
    return Cdf(domain, locs, cum - masses, cum)


def from_points(domain: Domain, xs: Sequence[float], values: Sequence[float]) -> Cdf:
    """Continuous piecewise-linear distribution through ``(xs, values)``."""
    return Cdf(domain, xs, values, values)


# -- operations -----------------------------------------------------------------


def cdf_eval(d: Cdf, x: float, side: str = "right") -> float:
    return d.eval(x, side)


def gen_inverse(d: Cdf, p: float) -> float:
    return d.gen_inverse(p)


def upper_inverse(d: Cdf, p: float) -> float:
    return d.upper_inverse(p)


def quantile_interval(g: Cdf, q: float) -> QuantileInterval:
    """All ``x`` with ``G(x-) <= q <= G(x)``."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    lo = g.gen_inverse(q)
    hi = g.upper_inverse(q)
    return QuantileInterval(lo, max(lo, hi))


def merged_knots(*dists: Cdf) -> np.ndarray:
    xs = np.unique(np.concatenate([d.x for d in dists]))
    keep = np.ones(xs.size, dtype=bool)
    keep[1:] = np.diff(xs) > TOL
    return xs[keep]


def _shared_domain(dists: Sequence[Cdf]) -> Domain:
    dom = dists[0].domain
    for d in dists[1:]:
        if abs(d.domain.lo - dom.lo) > TOL or abs(d.domain.hi - dom.hi) > TOL:
            raise DomainError("distributions live on different domains")
    return dom


def mix(parts: Sequence[tuple[float, Cdf]]) -> Cdf:
    """Convex combination ``sum w_k D_k``."""
    parts = list(parts)
    if not parts:
        raise InvariantError("nothing to mix")
    weights = np.array([w for w, _ in parts], dtype=float)
    if np.any(weights < -TOL):
        raise InvariantError("mixture weights must be nonnegative")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise InvariantError(f"mixture weights sum to {weights.sum()}, expected 1")
    dists = [d for _, d in parts]
    dom = _shared_domain(dists)
    xs = merged_knots(*dists)
    left = sum(w * d.eval(xs, "left") for w, d in zip(weights, dists))
    right = sum(w * d.eval(xs, "right") for w, d in zip(weights, dists))
    return Cdf(dom, xs, left, right)


def ks_distance(d1: Cdf, d2: Cdf) -> float:
    """Sup-distance between two distribution functions (exact)."""
    _shared_domain([d1, d2])
    xs = merged_knots(d1, d2)
    gap_r = np.abs(d1.eval(xs, "right") - d2.eval(xs, "right"))
    gap_l = np.abs(d1.eval(xs, "left") - d2.eval(xs, "left"))
    return float(max(gap_r.max(), gap_l.max()))


def sup_gap_at(d1: Cdf, d2: Cdf, points) -> float:
    """Largest ``|D1 - D2|`` over the given states (right values)."""
    points = np.asarray(points, dtype=float)
    return float(np.max(np.abs(d1.eval(points) - d2.eval(points))))


def stieltjes_integral(v, d: Cdf) -> float:
    """Exact ``integral of V dD`` for piecewise polynomial ``V`` of degree <= 2.

    ``v`` is any object with ``eval`` and ``breakpoints``; plain callables
    are accepted and integrated with Simpson's rule between knots (exact
    only when the callable is piecewise quadratic on those knots).
    """
    evaluate = getattr(v, "eval", v)
    extra = np.asarray(getattr(v, "breakpoints", lambda dom: [])(d.domain), dtype=float)
    xs = d.x
    if extra.size:
        extra = extra[(extra > d.domain.lo) & (extra < d.domain.hi)]
        xs = np.unique(np.concatenate([xs, extra]))
    vx = np.asarray(evaluate(xs), dtype=float)
    jump = d.eval(xs, "right") - d.eval(xs, "left")
    total = float(np.dot(vx, jump))
    a, b = xs[:-1], xs[1:]
    mass = d.eval(b, "left") - d.eval(a, "right")
    vm = np.asarray(evaluate(0.5 * (a + b)), dtype=float)
    # Simpson is exact on each span since V is quadratic and the density flat there
    total += float(np.dot(mass, (vx[:-1] + 4.0 * vm + vx[1:]) / 6.0))
    return total


def splice(domain: Domain, segments: Sequence[tuple[float, Cdf | float]]) -> Cdf:
    """Glue sources together: segment ``k`` uses its source on ``[s_k, s_{k+1})``.

    A source is a :class:`Cdf` or a constant level.  Starts must be
    nondecreasing and begin at ``domain.lo``; the last segment runs through
    ``domain.hi``.  When several segments start at the same state, the last
    one wins there.
    """
    starts = [float(s) for s, _ in segments]
    if abs(starts[0] - domain.lo) > TOL or any(b < a - TOL for a, b in zip(starts, starts[1:])):
        raise InvariantError("splice starts must begin at domain.lo and be nondecreasing")

    def value(src, x, side):
        return float(src.eval(x, side)) if isinstance(src, Cdf) else float(src)

    cuts, active = [], []
    for s, src in zip(starts, (src for _, src in segments)):
        s = min(max(s, domain.lo), domain.hi)
        if cuts and s - cuts[-1] <= TOL:
            active[-1] = src
        else:
            cuts.append(s)
            active.append(src)

    xs, ls, rs = [], [], []
    for j, (cut, src) in enumerate(zip(cuts, active)):
        xs.append(cut)
        ls.append(0.0 if j == 0 else value(active[j - 1], cut, "left"))
        rs.append(value(src, cut, "right"))
        end = cuts[j + 1] if j + 1 < len(cuts) else domain.hi
        if isinstance(src, Cdf):
            for xi in src.x[(src.x > cut + TOL) & (src.x < end - TOL)]:
                xs.append(float(xi))
                ls.append(value(src, xi, "left"))
                rs.append(value(src, xi, "right"))
    if cuts[-1] < domain.hi - TOL:
        xs.append(domain.hi)
        ls.append(value(active[-1], domain.hi, "left"))
        rs.append(value(active[-1], domain.hi, "right"))
    return Cdf(domain, xs, ls, rs)
