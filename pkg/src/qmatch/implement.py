"""Implementable quantile distributions and the experiments that induce them.

Parametric experiments are indexed by a *level* ``u`` uniform on ``[0, 1]``.
For the matching and negative-assortative experiments the label is
``omega = q * u``; posteriors put weight ``q`` on a lower state and ``1 - q``
on an upper state, both given by generalized inverses of the prior.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .dist import (
    TOL,
    Cdf,
    Domain,
    InvariantError,
    QuantileInterval,
    atomic,
    ks_distance,
    merged_knots,
    mix,
    quantile_interval,
)

log = logging.getLogger(__name__)

MATCHING = "matching"
NAM = "nam"


class NotImplementableError(ValueError):
    """Target distribution falls outside the implementable bounds."""

    def __init__(self, verdict: "Implementability"):
        self.verdict = verdict
        super().__init__(
            f"not implementable: {verdict.bound} bound violated at x={verdict.x:.12g} "
            f"(H={verdict.value:.12g}, bound={verdict.bound_value:.12g})"
        )


class SelectionError(ValueError):
    """A selection picked a state outside the posterior's quantile set."""


class GridApproximationWarning(UserWarning):
    """A pushforward was approximated on a label grid."""


# -- bounds -----------------------------------------------------------------------


def _insert_level_crossings(f: Cdf, level: float) -> Cdf:
    x, left, right = f.x, f.left, f.right
    r, l = right[:-1], left[1:]
    cross = np.flatnonzero((r < level - TOL) & (l > level + TOL))
    if cross.size == 0:
        return f
    t = (level - r[cross]) / (l[cross] - r[cross])
    xc = x[cross] + t * (x[cross + 1] - x[cross])
    xs = np.r_[x, xc]
    return Cdf(f.domain, xs, np.r_[left, np.full(xc.size, level)], np.r_[right, np.full(xc.size, level)])


def quantile_bounds(f: Cdf, q: float) -> tuple[Cdf, Cdf]:
    """Lowest and highest implementable quantile distributions ``(H_lower, H_upper)``.

    ``H_lower = max(0, (F - q) / (1 - q))`` and ``H_upper = min(F / q, 1)``.
    """
    _check_q(q)
    g = _insert_level_crossings(f, q)
    upper = Cdf(f.domain, g.x, np.minimum(g.left / q, 1.0), np.minimum(g.right / q, 1.0))
    lower = Cdf(
        f.domain,
        g.x,
        np.maximum(0.0, (g.left - q) / (1 - q)),
        np.maximum(0.0, (g.right - q) / (1 - q)),
    )
    return lower, upper


@dataclass(frozen=True)
class Implementability:
    ok: bool
    x: float | None = None
    bound: str | None = None  # "lower" or "upper"
    value: float | None = None
    bound_value: float | None = None

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        if self.ok:
            return {"implementable": True}
        return {"implementable": False, "witness": self.x, "violated": self.bound,
                "H": self.value, "bound": self.bound_value}


def is_implementable(h: Cdf, f: Cdf, q: float, tol: float = TOL) -> Implementability:
    """Check ``H_lower <= H <= H_upper`` everywhere (exact for this class).

    On failure the witness is a state where the violation holds for the
    plain value ``H(x)``.
    """
    lower, upper = quantile_bounds(f, q)
    xs = merged_knots(h, lower, upper)
    # interleave left limit then value at every knot, in order of the real line
    hv = np.column_stack([h.eval(xs, "left"), h.eval(xs, "right")]).ravel()
    lv = np.column_stack([lower.eval(xs, "left"), lower.eval(xs, "right")]).ravel()
    uv = np.column_stack([upper.eval(xs, "left"), upper.eval(xs, "right")]).ravel()
    lo_gap, up_gap = lv - hv, hv - uv
    bad = np.flatnonzero((lo_gap > tol) | (up_gap > tol))
    if bad.size == 0:
        return Implementability(True)
    k = int(bad[0])
    bound = "lower" if lo_gap[k] > tol else "upper"
    i = k // 2
    if k % 2 == 1:
        wx = float(xs[i])
    else:
        # the left limit violates while the previous value did not: the
        # violation starts inside the preceding span, so report a point there
        gap = lo_gap if bound == "lower" else up_gap
        g0, g1 = max(gap[k - 1], 0.0), gap[k]
        a, b = xs[i - 1], xs[i]
        start = a + (b - a) * g0 / (g0 + g1) if g1 > 0 else a
        wx = float(0.5 * (start + b))
    hx = float(h.eval(wx))
    bx = float(lower.eval(wx) if bound == "lower" else upper.eval(wx))
    return Implementability(False, wx, bound, hx, bx)


# -- experiments ----------------------------------------------------------------


class AtomMap(NamedTuple):
    """One atom of the posterior at level ``u``: mass, location, monotonicity."""

    weight: Callable[[np.ndarray], np.ndarray]
    loc: Callable[[np.ndarray], np.ndarray]
    increasing: bool


@dataclass(frozen=True)
class LabeledPosterior:
    label: float
    dist: Cdf

    def quantiles(self, q: float) -> QuantileInterval:
        return quantile_interval(self.dist, q)


class ParametricExperiment:
    """A posterior-valued map over a labeled index.

    The base class implements the matching and negative-assortative
    experiments; subclasses override the level/label maps and atom maps.
    """

    def __init__(self, prior: Cdf, q: float, kind: str):
        _check_q(q)
        if kind not in (MATCHING, NAM):
            raise ValueError(f"unknown parametric experiment kind {kind!r}")
        self.prior = prior
        self.q = float(q)
        self.kind = kind

    def __repr__(self):
        return f"{type(self).__name__}(kind={self.kind!r}, q={self.q})"

    @property
    def domain(self) -> Domain:
        return self.prior.domain

    @property
    def label_range(self) -> tuple[float, float]:
        return (0.0, self.q)

    def label_at(self, u):
        return self.q * np.asarray(u, dtype=float)

    def level_of(self, label):
        return np.clip(np.asarray(label, dtype=float) / self.q, 0.0, 1.0)

    def lower_state(self, u):
        return self.prior.gen_inverse(np.clip(self.q * np.asarray(u, dtype=float), 0.0, 1.0))

    def upper_state(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == MATCHING:
            lvl = self.q + (1 - self.q) * u
        else:
            lvl = 1.0 - (1 - self.q) * u
        return self.prior.gen_inverse(np.clip(lvl, 0.0, 1.0))

    def atom_maps(self) -> list[AtomMap]:
        q = self.q
        return [
            AtomMap(lambda u: np.full(np.shape(u), q), self.lower_state, True),
            AtomMap(lambda u: np.full(np.shape(u), 1 - q), self.upper_state, self.kind == MATCHING),
        ]

    def structural_levels(self) -> np.ndarray:
        """Levels between which every atom weight is constant."""
        return np.array([0.0, 1.0])

    def posterior_at_level(self, u: float) -> LabeledPosterior:
        u = float(u)
        locs = [float(m.loc(np.asarray(u))) for m in self.atom_maps()]
        ws = [float(m.weight(np.asarray(u))) for m in self.atom_maps()]
        keep = [i for i, w in enumerate(ws) if w > TOL]
        ws_kept = np.array([ws[i] for i in keep])
        dist = atomic([locs[i] for i in keep], ws_kept / ws_kept.sum(), self.domain)
        return LabeledPosterior(float(self.label_at(u)), dist)

    def posterior_at(self, label: float) -> LabeledPosterior:
        post = self.posterior_at_level(float(self.level_of(label)))
        return LabeledPosterior(float(label), post.dist)

    def interval_pieces(self):
        """Quantile-set endpoints as piecewise-linear functions of the level."""
        pieces = self.prior.quantile_pieces()
        q = self.q
        lower = _rescale_pieces(pieces, 0.0, q)
        upper = _rescale_pieces(pieces, q, 1.0, reverse=self.kind == NAM)
        return lower, upper

    def sample_labels(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.label_at(rng.random(n))

    def to_dict(self) -> dict:
        from .io import cdf_to_json

        return {"kind": self.kind, "prior": cdf_to_json(self.prior), "q": self.q}


def _rescale_pieces(pieces, a: float, b: float, reverse: bool = False):
    """Restrict quantile pieces to levels ``[a, b]`` and map them onto ``[0, 1]``."""
    out = []
    span = b - a
    for u0, u1, x0, x1 in pieces:
        lo, hi = max(u0, a), min(u1, b)
        if hi - lo <= TOL:
            continue
        slope = (x1 - x0) / (u1 - u0)
        y0, y1 = x0 + slope * (lo - u0), x0 + slope * (hi - u0)
        if reverse:
            out.append(((b - hi) / span, (b - lo) / span, y1, y0))
        else:
            out.append(((lo - a) / span, (hi - a) / span, y0, y1))
    if reverse:
        out.reverse()
    return out


def matching_experiment(f: Cdf, q: float) -> ParametricExperiment:
    """Pairs states across the prior q-quantile, positively assortatively."""
    return ParametricExperiment(f, q, MATCHING)


def nam_experiment(f: Cdf, q: float) -> ParametricExperiment:
    """Pairs the lowest states with the highest (negative assortative)."""
    return ParametricExperiment(f, q, NAM)


@dataclass(frozen=True)
class Entry:
    label: float
    weight: float
    posterior: Cdf
    levels: tuple[float, float] | None = None


@dataclass(frozen=True)
class FiniteExperiment:
    prior: Cdf
    entries: tuple[Entry, ...]
    residual: float = 0.0

    @classmethod
    def create(cls, prior: Cdf, entries: Sequence[Entry], validate: bool = True) -> "FiniteExperiment":
        entries = tuple(entries)
        if not entries:
            raise InvariantError("finite experiment needs at least one entry")
        w = np.array([e.weight for e in entries])
        if np.any(w <= 0):
            raise InvariantError("entry weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvariantError(f"entry weights sum to {w.sum()}, expected 1")
        exp = cls(prior, entries)
        residual = ks_distance(exp.average_posterior(), prior)
        if validate and residual > 1e-9:
            raise InvariantError(f"posteriors average to something other than the prior (gap {residual:.3g})")
        return cls(prior, entries, residual)

    @property
    def domain(self) -> Domain:
        return self.prior.domain

    @property
    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.entries])

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=float)

    def average_posterior(self) -> Cdf:
        w = self.weights
        return mix([(wi / w.sum(), e.posterior) for wi, e in zip(w, self.entries)])

    def intervals(self, q: float) -> list[QuantileInterval]:
        return [quantile_interval(e.posterior, q) for e in self.entries]

    def sample_labels(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(len(self.entries), size=n, p=self.weights / self.weights.sum())
        return self.labels[idx]

    def to_dict(self) -> dict:
        from .io import cdf_to_json

        entries = []
        for e in self.entries:
            locs, masses = e.posterior.atoms()
            entries.append({"label": e.label, "weight": e.weight,
                            "atoms": [[float(a), float(m)] for a, m in zip(locs, masses)]})
        return {"prior": cdf_to_json(self.prior), "entries": entries}


Experiment = ParametricExperiment | FiniteExperiment


def full_revelation_finite(f: Cdf) -> FiniteExperiment:
    """Reveal the state exactly; only defined here for atomic priors."""
    if not f.is_atomic:
        raise InvariantError("finite full revelation needs an atomic prior")
    locs, masses = f.atoms()
    entries = [Entry(float(x), float(m), atomic([x], [1.0], f.domain)) for x, m in zip(locs, masses)]
    return FiniteExperiment.create(f, entries)


# -- selections -----------------------------------------------------------------


@dataclass(frozen=True)
class Selection:
    """Label-indexed choice of one quantile per posterior.

    ``level_pieces`` optionally certifies the selection as a monotone
    piecewise-linear function of the level, which makes pushforwards exact.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    level_pieces: tuple | None = None
    monotone: bool = False
    name: str = ""

    def __call__(self, labels):
        return self.fn(labels)


def identity_selection() -> Selection:
    return Selection(lambda x: np.asarray(x, dtype=float), None, True, "identity")


def constant_selection(c: float) -> Selection:
    c = float(c)
    return Selection(lambda x: np.full(np.shape(x), c), ((0.0, 1.0, c, c),), True, f"constant {c:g}")


def lowest_quantile_selection(exp: FiniteExperiment, q: float) -> Selection:
    table = {e.label: iv.lo for e, iv in zip(exp.entries, exp.intervals(q))}
    return Selection(lambda xs: np.array([table[float(x)] for x in np.ravel(xs)]), None, False, "lowest")


def matching_selection(h: Cdf, f: Cdf, q: float, checks: int = 1025) -> Selection:
    """Selection ``omega -> H^{-1}(omega / q)`` on the matching experiment.

    Raises :class:`NotImplementableError` when ``H`` violates the bounds.
    """
    verdict = is_implementable(h, f, q)
    if not verdict:
        raise NotImplementableError(verdict)
    pieces = tuple(h.quantile_pieces())

    def fn(omega):
        return h.gen_inverse(np.clip(np.asarray(omega, dtype=float) / q, 0.0, 1.0))

    sel = Selection(fn, pieces, True, "matching")
    exp = matching_experiment(f, q)
    ends = np.array([u for pc in pieces for u in pc[:2]])
    us = np.unique(np.r_[(np.arange(checks) + 0.5) / checks, ends, np.clip(ends + 1e-9, 0, 1)])
    chosen = sel(exp.label_at(us))
    lo, hi = exp.lower_state(us), exp.upper_state(us)
    if np.any(chosen < lo - 1e-9) or np.any(chosen > hi + 1e-9):
        k = int(np.argmax((chosen < lo - 1e-9) | (chosen > hi + 1e-9)))
        raise SelectionError(f"selected {chosen[k]} outside [{lo[k]}, {hi[k]}] at level {us[k]}")
    for u in us[:: max(1, us.size // 32)]:
        post = exp.posterior_at_level(u)
        if not post.quantiles(q).contains(float(sel(post.label))):
            raise SelectionError(f"selection leaves the quantile set at level {u}")
    return sel


# -- pushforward and Bayes plausibility ------------------------------------------


def pushforward(exp, sel: Selection, q: float | None = None, cells: int = 2**14) -> Cdf:
    """Distribution of the selected quantile.

    Exact for finite experiments and for parametric experiments whose
    selection carries ``level_pieces``.  Otherwise the label levels are cut
    into ``cells`` equal cells and a :class:`GridApproximationWarning`
    reports the resolution.
    """
    if isinstance(exp, FiniteExperiment):
        states = np.array([float(np.ravel(sel(np.array([e.label])))[0]) for e in exp.entries])
        if q is not None:
            for e, s, iv in zip(exp.entries, states, exp.intervals(q)):
                if not iv.contains(s):
                    raise SelectionError(f"entry {e.label}: {s} not in [{iv.lo}, {iv.hi}]")
        w = exp.weights
        return atomic(states, w / w.sum(), exp.domain)
    if sel.level_pieces is not None:
        return Cdf.from_quantile_pieces(sel.level_pieces, exp.domain)
    levels = (np.arange(cells) + 0.5) / cells
    states = np.asarray(sel(exp.label_at(levels)), dtype=float)
    warnings.warn(
        f"pushforward approximated on {cells} label cells (level resolution {1.0 / cells:.3g})",
        GridApproximationWarning,
        stacklevel=2,
    )
    return atomic(states, np.full(cells, 1.0 / cells), exp.domain)


def _mass_below(loc, increasing: bool, s0: float, s1: float, theta: np.ndarray, iters: int = 64):
    """Length of ``{u in [s0, s1]: loc(u) <= theta}`` for monotone ``loc``."""
    thr = theta + 1e-12
    lo = np.full(theta.shape, s0)
    hi = np.full(theta.shape, s1)
    if increasing:
        all_in = np.asarray(loc(np.full(theta.shape, s1))) <= thr
        none_in = np.asarray(loc(np.full(theta.shape, s0))) > thr
    else:
        all_in = np.asarray(loc(np.full(theta.shape, s0))) <= thr
        none_in = np.asarray(loc(np.full(theta.shape, s1))) > thr
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = np.asarray(loc(mid)) <= thr
        if increasing:
            lo, hi = np.where(ok, mid, lo), np.where(ok, hi, mid)
        else:
            lo, hi = np.where(ok, lo, mid), np.where(ok, mid, hi)
    length = (lo - s0) if increasing else (s1 - hi)
    length = np.where(all_in, s1 - s0, np.where(none_in, 0.0, length))
    return length


def bayes_residual(exp, grid_size: int = 1001) -> float:
    """``max_theta |E[G(theta)] - F(theta)|`` over a state grid.

    For parametric experiments the label integral is computed piece by
    piece: atom weights are constant between structural levels and atom
    locations are monotone, so each indicator integral is located by
    bisection.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    dom = exp.domain
    theta = np.unique(np.r_[np.linspace(dom.lo, dom.hi, grid_size), exp.prior.x])
    if isinstance(exp, FiniteExperiment):
        w = exp.weights
        avg = sum(wi * e.posterior.eval(theta) for wi, e in zip(w, exp.entries))
        return float(np.max(np.abs(avg - exp.prior.eval(theta))))
    levels = exp.structural_levels()
    avg = np.zeros_like(theta)
    for s0, s1 in zip(levels[:-1], levels[1:]):
        if s1 - s0 <= 0:
            continue
        mid = np.asarray(0.5 * (s0 + s1))
        for m in exp.atom_maps():
            w = float(m.weight(mid))
            if w <= 0:
                continue
            avg += w * _mass_below(m.loc, m.increasing, s0, s1, theta)
    return float(np.max(np.abs(avg - exp.prior.eval(theta))))


def discretize_experiment(exp: ParametricExperiment, cells: int = 256) -> FiniteExperiment:
    """Finite version of a parametric experiment.

    When every atom location is a step function of the level (atomic
    prior, matching or negative-assortative kind) the cut points are the
    steps and the result is exact.  Otherwise ``cells`` equal level cells
    are used and the Bayes residual is recorded on the result.
    """
    if cells < 1:
        raise ValueError("cells must be at least 1")
    f, q = exp.prior, exp.q
    exact = exp.kind in (MATCHING, NAM) and f.is_atomic
    if exact:
        lv = np.unique(np.r_[f.left, f.right])
        lv = lv[(lv > TOL) & (lv < 1 - TOL)]
        cuts = [lv / q, (lv - q) / (1 - q)]
        if exp.kind == NAM:
            cuts[1] = (1 - lv) / (1 - q)
        cuts = np.unique(np.clip(np.concatenate([[0.0, 1.0], *cuts]), 0.0, 1.0))
        keep = np.r_[True, np.diff(cuts) > 1e-12]
        cuts = cuts[keep]
        cuts[-1] = 1.0
    else:
        cuts = np.linspace(0.0, 1.0, cells + 1)
        cuts = np.unique(np.r_[cuts, exp.structural_levels()])
    entries = []
    for u0, u1 in zip(cuts[:-1], cuts[1:]):
        post = exp.posterior_at_level(0.5 * (u0 + u1))
        entries.append(Entry(post.label, float(u1 - u0), post.dist, (float(u0), float(u1))))
    fe = FiniteExperiment.create(f, entries, validate=exact)
    if not exact:
        log.info("discretized %s experiment on %d cells, Bayes residual %.3g",
                 exp.kind, len(entries), fe.residual)
    return fe


def _check_q(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
