"""Districting as the choice of a distribution of district medians.

A party wins a district when the district's median voter type exceeds the
aggregate shock ``rho ~ R``, so a plan with median distribution ``H`` wins
each district with median ``x`` with probability ``R(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import TOL, Cdf, Domain, InvariantError, stieltjes_integral
from .implement import ParametricExperiment, Selection, matching_experiment, matching_selection
from .objective import Objective
from .optimize import Optimum, optimize_quantile_dist

MEDIAN = 0.5
MODES = ("partisan", "bipartisan", "nonpartisan")


@dataclass(frozen=True)
class ElectoralModel:
    voters: Cdf
    shock: Cdf
    q: float = MEDIAN

    def __post_init__(self):
        if self.q != MEDIAN:
            raise ValueError("districts are decided by their median voter (q = 1/2)")
        if not self.shock.is_continuous:
            raise InvariantError("the shock distribution must be continuous")


def _shock_points(r: Cdf, domain: Domain) -> tuple[np.ndarray, np.ndarray]:
    xs = np.unique(np.r_[r.x, domain.lo, domain.hi])
    xs = xs[(xs >= domain.lo - TOL) & (xs <= domain.hi + TOL)]
    vals = (xs > r.domain.hi).astype(float)  # R is 0 below its domain and 1 above
    inside = (xs >= r.domain.lo) & (xs <= r.domain.hi)
    vals[inside] = r.eval(xs[inside])
    return xs, vals


def objective_from_mode(r: Cdf, mode: str, domain: Domain | None = None) -> Objective:
    """Seat objective on the voter domain.

    ``partisan`` is ``R``; ``bipartisan`` is ``max{R, 1 - R}`` (safe seats
    for both parties); ``nonpartisan`` is ``min{R, 1 - R}`` (competitive
    districts).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not r.is_continuous:
        raise InvariantError("the shock distribution must be continuous")
    domain = domain or r.domain
    xs, vals = _shock_points(r, domain)
    if mode != "partisan":
        # add the states where R crosses one half so max/min stay piecewise linear
        d = vals - 0.5
        cross = np.flatnonzero(d[:-1] * d[1:] < 0)
        xc = xs[cross] - d[cross] * (xs[cross + 1] - xs[cross]) / (d[cross + 1] - d[cross])
        xs = np.r_[xs, xc]
        vals = np.r_[vals, np.full(xc.size, 0.5)]
        order = np.argsort(xs)
        xs, vals = xs[order], vals[order]
        vals = np.maximum(vals, 1 - vals) if mode == "bipartisan" else np.minimum(vals, 1 - vals)
    obj = Objective.piecewise_linear(np.column_stack([xs, vals]))
    return Objective(obj.breaks, obj.coefs, obj.support, "piecewise_linear",
                     {**obj.params, "mode": mode})


@dataclass(frozen=True)
class DistrictPlan:
    mode: str
    objective: Objective
    H_star: Cdf
    expected_seat_share: float
    experiment: ParametricExperiment
    selection: Selection
    optimum: Optimum

    def to_dict(self) -> dict:
        from .io import cdf_to_json, objective_to_json

        return {
            "mode": self.mode,
            "objective": objective_to_json(self.objective),
            "H_star": cdf_to_json(self.H_star),
            "expected_seat_share": self.expected_seat_share,
            "objective_value": self.optimum.value,
            "unique": self.optimum.unique,
            "plan": {
                "experiment": self.experiment.to_dict(),
                "selection": {"kind": "inverse_cdf", "H": cdf_to_json(self.H_star)},
            },
        }


def district_plan(model: ElectoralModel, mode: str) -> DistrictPlan:
    """Optimal median distribution and the matching plan that realizes it."""
    dom = model.voters.domain
    v = objective_from_mode(model.shock, mode, dom)
    opt = optimize_quantile_dist(v, model.voters, model.q)
    seat = objective_from_mode(model.shock, "partisan", dom)
    share = stieltjes_integral(seat, opt.H_star)
    exp = matching_experiment(model.voters, model.q)
    sel = matching_selection(opt.H_star, model.voters, model.q)
    return DistrictPlan(mode, v, opt.H_star, float(share), exp, sel, opt)


def seat_share_curve(h: Cdf, grid: int = 101) -> np.ndarray:
    """Rows ``(rho, 1 - H(rho-))``: the share of districts whose median is at least ``rho``."""
    if grid < 2:
        raise ValueError("grid must have at least two points")
    rho = np.linspace(h.domain.lo, h.domain.hi, grid)
    return np.column_stack([rho, 1.0 - h.eval(rho, "left")])
