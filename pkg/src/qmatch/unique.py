"""Perturbed matching experiments whose posteriors have a single quantile.

The target ``H`` is first replaced by ``H_n``, its interpolation linear in
the prior between dyadic partition points.  Each label ``x`` then receives
the matching pair for ``H_n(x)`` plus an extra ``e``-weighted atom at ``x``
itself, which pins the posterior quantile to ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import TOL, Cdf, InvariantError, from_points, mix
from .implement import (
    AtomMap,
    FiniteExperiment,
    ParametricExperiment,
    Selection,
    full_revelation_finite,
    is_implementable,
    NotImplementableError,
)

UNIQUE = "unique_impl"


@dataclass(frozen=True)
class DyadicRefinement:
    n: int
    partition: np.ndarray
    h_n: Cdf
    densities: np.ndarray  # dH_n/dF on each partition cell

    def density_at(self, x):
        """Cell density at ``x``; partition points take the cell to their right."""
        lo, hi = self.partition[0], self.partition[-1]
        cells = self.densities.size
        idx = np.floor((np.asarray(x, dtype=float) - lo) / (hi - lo) * cells).astype(int)
        return self.densities[np.clip(idx, 0, cells - 1)]


def _require_positive_density(f: Cdf) -> None:
    if not f.is_continuous or not f.is_strictly_increasing:
        raise InvariantError("the prior must be continuous and strictly increasing on its domain")


def dyadic_refine(h: Cdf, f: Cdf, n: int) -> DyadicRefinement:
    """Interpolate ``H`` linearly in ``F`` between the points ``lo + (hi - lo) i / 2**n``."""
    if n < 0:
        raise ValueError("level n must be nonnegative")
    _require_positive_density(f)
    dom = f.domain
    part = dom.lo + dom.width * np.arange(2**n + 1) / 2**n
    part[-1] = dom.hi
    f_part, h_part = f.eval(part), h.eval(part)
    h_part[0] = 0.0 if h_part[0] <= TOL else h_part[0]
    xs = np.unique(np.r_[part, f.x])
    cell = np.clip(np.searchsorted(part, xs, side="right") - 1, 0, 2**n - 1)
    fx = f.eval(xs)
    t = (fx - f_part[cell]) / (f_part[cell + 1] - f_part[cell])
    vals = h_part[cell] + t * (h_part[cell + 1] - h_part[cell])
    vals[-1] = 1.0
    h_n = from_points(dom, xs, vals) if h_part[0] == 0.0 else Cdf(dom, xs, np.r_[0.0, vals[1:]], vals)
    dens = np.diff(h_part) / np.diff(f_part)
    if np.any(dens < -TOL):
        raise InvariantError("negative refinement density")
    return DyadicRefinement(n, part, h_n, np.maximum(dens, 0.0))


class UniqueExperiment(ParametricExperiment):
    """Label ``x`` is drawn from ``(1 - e) H_n + e F``; its posterior pins the quantile at ``x``."""

    def __init__(self, target: Cdf, prior: Cdf, q: float, e: float, n: int):
        if not 0.0 < q < 1.0:
            raise ValueError(f"q must lie in (0, 1), got {q}")
        if not 0.0 < e <= 1.0:
            raise ValueError("e must lie in (0, 1]; at e = 0 quantile sets are not singletons")
        self.prior = prior
        self.q = float(q)
        self.kind = UNIQUE
        self.target = target
        self.e = float(e)
        self.n = int(n)
        self.refinement = dyadic_refine(target, prior, n)
        self.label_law = prior if self.e == 1.0 else mix([(1 - self.e, self.refinement.h_n), (self.e, prior)])

    def __repr__(self):
        return f"UniqueExperiment(q={self.q}, e={self.e}, n={self.n})"

    @property
    def label_range(self):
        return (self.domain.lo, self.domain.hi)

    def label_at(self, u):
        return self.label_law.gen_inverse(np.clip(np.asarray(u, dtype=float), 0.0, 1.0))

    def level_of(self, label):
        return self.label_law.eval(label)

    def structural_levels(self) -> np.ndarray:
        return np.unique(np.r_[0.0, self.label_law.eval(self.refinement.partition), 1.0])

    def atom_maps(self) -> list[AtomMap]:
        f, q, e, ref = self.prior, self.q, self.e, self.refinement

        def hn(u):
            return ref.h_n.eval(self.label_at(u))

        def weights(u):
            h = ref.density_at(self.label_at(u))
            return (1 - e) * h, (1 - e) * h + e

        return [
            AtomMap(lambda u: q * weights(u)[0] / weights(u)[1],
                    lambda u: f.gen_inverse(np.clip(q * hn(u), 0.0, 1.0)), True),
            AtomMap(lambda u: (1 - q) * weights(u)[0] / weights(u)[1],
                    lambda u: f.gen_inverse(np.clip(q + (1 - q) * hn(u), 0.0, 1.0)), True),
            AtomMap(lambda u: e / weights(u)[1], self.label_at, True),
        ]

    def interval_pieces(self):
        pieces = self.label_law.quantile_pieces()
        return pieces, pieces

    def identity_selection(self) -> Selection:
        return Selection(lambda x: np.asarray(x, dtype=float),
                         tuple(self.label_law.quantile_pieces()), True, "identity")

    def sample_labels(self, rng: np.random.Generator, n: int) -> np.ndarray:
        v = rng.random((2, n))
        from_target = v[0] < 1 - self.e
        return np.where(from_target, self.refinement.h_n.gen_inverse(v[1]), self.prior.gen_inverse(v[1]))

    def to_dict(self) -> dict:
        from .io import cdf_to_json

        return {"kind": UNIQUE, "prior": cdf_to_json(self.prior), "q": self.q,
                "target": cdf_to_json(self.target), "e": self.e, "n": self.n}


def unique_experiment(h: Cdf, f: Cdf, q: float, e: float, n: int) -> UniqueExperiment:
    """Experiment uniquely implementing ``(1 - e) H_n + e F``."""
    verdict = is_implementable(h, f, q)
    if not verdict:
        raise NotImplementableError(verdict)
    exp = UniqueExperiment(h, f, q, e, n)
    check = is_implementable(exp.refinement.h_n, f, q, tol=1e-9)
    if not check:
        raise InvariantError(f"refined target left the implementable set at x={check.x}")
    return exp


def full_revelation(f: Cdf, q: float = 0.5):
    """Experiment revealing the state: finite for atomic priors, parametric otherwise."""
    if f.is_atomic:
        return full_revelation_finite(f)
    return unique_experiment(f, f, q, 1.0, 0)


@dataclass(frozen=True)
class UniquenessVerdict:
    unique: bool
    max_width: float
    worst_label: float | None

    def __bool__(self):
        return self.unique


def verify_unique(exp, q: float, grid: int = 1024, tol: float = 1e-12) -> UniquenessVerdict:
    """Check that sampled (parametric) or all (finite) posteriors have one quantile."""
    if isinstance(exp, FiniteExperiment):
        widths = [(iv.width, e.label) for e, iv in zip(exp.entries, exp.intervals(q))]
    else:
        levels = exp.structural_levels()
        us = np.unique(np.r_[(np.arange(grid) + 0.5) / grid, 0.5 * (levels[:-1] + levels[1:])])
        widths = []
        for u in us:
            post = exp.posterior_at_level(u)
            widths.append((post.quantiles(q).width, post.label))
    width, label = max(widths, key=lambda t: t[0])
    return UniquenessVerdict(width < tol, float(width), float(label))
