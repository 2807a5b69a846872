"""Continuous objectives on the state interval.

Every objective is a piecewise polynomial of degree at most two, stored as
interior breakpoints plus one row of global coefficients ``(c0, c1, c2)`` per
piece.  Piecewise-linear points, centered quadratics and tents are all exact
members of this class; arbitrary callables are sampled onto it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dist import TOL, Domain, InvariantError

DEFAULT_SEGMENTS = 2**12


@dataclass(frozen=True)
class Objective:
    breaks: np.ndarray
    coefs: np.ndarray  # shape (len(breaks) + 1, 3)
    support: tuple[float, float] = (-np.inf, np.inf)
    kind: str = "piecewise_linear"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        breaks = np.asarray(self.breaks, dtype=float).ravel()
        coefs = np.asarray(self.coefs, dtype=float).reshape(-1, 3)
        if coefs.shape[0] != breaks.size + 1:
            raise InvariantError("need one coefficient row per piece")
        if np.any(np.diff(breaks) <= 0):
            raise InvariantError("objective breakpoints must be strictly increasing")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "coefs", coefs)

    # -- constructors -----------------------------------------------------------

    @classmethod
    def piecewise_linear(cls, points: Sequence[Sequence[float]]) -> "Objective":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise InvariantError("piecewise-linear objective needs at least two (x, v) points")
        xs, vs = pts[:, 0], pts[:, 1]
        if np.any(np.diff(xs) <= 0):
            raise InvariantError("objective points must have strictly increasing x")
        slopes = np.diff(vs) / np.diff(xs)
        slopes = np.r_[slopes[0], slopes, slopes[-1]]
        anchors_x = np.r_[xs[0], xs]
        anchors_v = np.r_[vs[0], vs]
        coefs = np.column_stack([anchors_v - slopes * anchors_x, slopes, np.zeros_like(slopes)])
        return cls(xs, coefs, (float(xs[0]), float(xs[-1])), "piecewise_linear",
                   {"points": pts.tolist()})

    @classmethod
    def quadratic(cls, center: float, scale: float = 1.0) -> "Objective":
        """``scale * (x - center)**2``."""
        c, s = float(center), float(scale)
        return cls(np.empty(0), [[s * c * c, -2.0 * s * c, s]], kind="quadratic",
                   params={"center": c, "scale": s})

    @classmethod
    def tent(cls, peak: float) -> "Objective":
        """``-|x - peak|``: quasi-concave with its maximum at ``peak``."""
        c = float(peak)
        return cls([c], [[-c, 1.0, 0.0], [c, -1.0, 0.0]], kind="tent", params={"peak": c})

    @classmethod
    def affine(cls, slope: float, intercept: float = 0.0) -> "Objective":
        return cls(np.empty(0), [[intercept, slope, 0.0]], kind="affine",
                   params={"slope": float(slope), "intercept": float(intercept)})

    @classmethod
    def sampled(cls, fn: Callable, domain: Domain, segments: int = DEFAULT_SEGMENTS) -> "Objective":
        """Piecewise-linear interpolant of ``fn`` on ``segments`` equal spans."""
        xs = np.linspace(domain.lo, domain.hi, segments + 1)
        vs = np.asarray(fn(xs), dtype=float)
        if vs.shape != xs.shape:
            vs = np.array([float(fn(x)) for x in xs])
        obj = cls.piecewise_linear(np.column_stack([xs, vs]))
        return cls(obj.breaks, obj.coefs, obj.support, "custom_sampled", {"segments": segments})

    # -- evaluation -------------------------------------------------------------

    def piece_index(self, x):
        return np.searchsorted(self.breaks, x, side="right")

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        c = self.coefs[self.piece_index(x)]
        c = c.reshape(x.shape + (3,))
        out = c[..., 0] + x * (c[..., 1] + x * c[..., 2])
        return float(out) if out.ndim == 0 else out

    __call__ = eval

    def breakpoints(self, domain: Domain | None = None) -> np.ndarray:
        if domain is None:
            return self.breaks.copy()
        b = self.breaks
        return b[(b > domain.lo) & (b < domain.hi)]

    def fixed_candidates(self) -> np.ndarray:
        """States that can be interior maximizers: breakpoints and concave vertices."""
        cands = list(self.breaks)
        edges = np.r_[-np.inf, self.breaks, np.inf]
        for k, (c0, c1, c2) in enumerate(self.coefs):
            if c2 < 0:
                v = -c1 / (2.0 * c2)
                if edges[k] < v < edges[k + 1]:
                    cands.append(v)
        return np.unique(np.asarray(cands, dtype=float))

    def covers(self, domain: Domain) -> bool:
        return self.support[0] <= domain.lo + TOL and self.support[1] >= domain.hi - TOL

    def require_covers(self, domain: Domain) -> None:
        if not self.covers(domain):
            raise InvariantError(
                f"objective defined on {self.support}, which does not cover "
                f"[{domain.lo}, {domain.hi}]"
            )

    def is_strictly_quasiconvex(self, domain: Domain, samples: int = 513) -> bool:
        """Strictly decreasing then strictly increasing on ``domain``."""
        xs = np.unique(np.concatenate([
            np.linspace(domain.lo, domain.hi, samples),
            self.fixed_candidates(),
            [-c1 / (2 * c2) for c0, c1, c2 in self.coefs if c2 > 0],
        ]))
        xs = xs[(xs >= domain.lo) & (xs <= domain.hi)]
        # near-coincident samples would read as a flat stretch
        xs = xs[np.r_[True, np.diff(xs) > 1e-9 * max(1.0, domain.width)]]
        d = np.diff(self.eval(xs))
        if np.any(np.abs(d) <= 1e-14):
            return False
        signs = np.sign(d)
        return int(np.count_nonzero(np.diff(signs) != 0)) <= 1 and not (signs[0] > 0 > signs[-1])


@dataclass(frozen=True)
class ArgmaxResult:
    min_argmax: float
    max_argmax: float
    max_value: float


def argmax_interval(v: Objective, lo: float, hi: float, tol: float = 1e-12) -> ArgmaxResult:
    """Exact maximizers of ``v`` over ``[lo, hi]``.

    Candidates are the endpoints plus breakpoints and concave vertices
    inside the interval; a flat stretch of maxima is reported by its two
    ends.
    """
    if hi < lo - TOL:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    hi = max(hi, lo)
    fixed = v.fixed_candidates()
    inner = fixed[(fixed > lo) & (fixed < hi)]
    cands = np.r_[lo, inner, hi]
    vals = v.eval(cands)
    best = float(vals.max())
    hit = cands[vals >= best - tol * max(1.0, abs(best))]
    return ArgmaxResult(float(hit.min()), float(hit.max()), best)
