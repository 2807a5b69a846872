"""Monte Carlo witnesses, feasibility of targets on finite experiments, regret and probes."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dist import TOL, Cdf, InvariantError, atomic
from .implement import (
    FiniteExperiment,
    Selection,
    _check_q,
    discretize_experiment,
    matching_experiment,
)
from .objective import Objective, argmax_interval
from .optimize import hp_distribution, optimize_quantile_dist, sweep

CHUNK = 2**16
DEFAULT_CAP = 24
MASS_TOL = 1e-9


class ResourceError(RuntimeError):
    """A search would exceed its configured size limit."""


# -- simulation -----------------------------------------------------------------


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    # Philox is counter based: the chunk index lives in the top counter word
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, chunk]))


def simulate_states(exp, sel: Selection, n: int, seed: int, workers: int | None = None) -> np.ndarray:
    """Selected quantiles for ``n`` label draws, in a seed-determined order."""
    if n < 1:
        raise ValueError("N must be at least 1")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    sizes = [min(CHUNK, n - k * CHUNK) for k in range((n + CHUNK - 1) // CHUNK)]

    def run(k):
        labels = exp.sample_labels(_chunk_rng(seed, k), sizes[k])
        return np.asarray(sel(labels), dtype=float)

    workers = workers or 1
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, os.cpu_count() or 1)) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    return np.concatenate(parts)


def simulate(exp, sel: Selection, n: int, seed: int, workers: int | None = None) -> Cdf:
    """Empirical distribution of selected quantiles over ``n`` independent labels.

    Draws are split into chunks of ``2**16`` with their own counter-based
    stream, so the result depends only on ``(seed, n)``, never on
    ``workers``.
    """
    states = simulate_states(exp, sel, n, seed, workers)
    return atomic(states, np.full(states.size, 1.0 / states.size), exp.domain)


# -- feasibility ----------------------------------------------------------------


@dataclass(frozen=True)
class FeasibilityProblem:
    experiment: FiniteExperiment
    target: Cdf
    mode: str = "fractional"

    def __post_init__(self):
        if self.mode not in ("fractional", "deterministic"):
            raise ValueError(f"unknown feasibility mode {self.mode!r}")
        if not self.target.is_atomic:
            raise InvariantError("feasibility targets must be atomic")


@dataclass(frozen=True)
class HallCertificate:
    """Entries whose quantile sets lie in ``[lo, hi]`` outweigh the target mass there."""

    lo: float
    hi: float
    entry_weight: float
    target_mass: float
    entries: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"window": [self.lo, self.hi], "entry_weight": self.entry_weight,
                "target_mass": self.target_mass, "entries": list(self.entries)}


@dataclass(frozen=True)
class Verdict:
    feasible: bool
    mode: str
    assignment: tuple = ()  # (entry index, state, mass)
    certificate: HallCertificate | None = None
    note: str = ""

    def __bool__(self):
        return self.feasible

    def to_dict(self) -> dict:
        out = {"feasible": self.feasible, "mode": self.mode}
        if self.feasible:
            out["assignment"] = [[int(i), float(x), float(m)] for i, x, m in self.assignment]
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        if self.note:
            out["note"] = self.note
        return out


def _instance(prob: FeasibilityProblem, q: float):
    exp = prob.experiment
    ivs = exp.intervals(q)
    lo = np.array([iv.lo for iv in ivs])
    hi = np.array([iv.hi for iv in ivs])
    locs, masses = prob.target.atoms()
    return lo, hi, exp.weights.copy(), locs, masses


def _hall_certificate(lo, hi, w, locs, masses) -> HallCertificate | None:
    """Largest violation of ``weight(entries inside [a, b]) <= mass([a, b])``."""
    best = None
    for a in np.unique(lo):
        for b in np.unique(hi[hi >= a]):
            inside = (lo >= a - MASS_TOL) & (hi <= b + MASS_TOL)
            weight = float(w[inside].sum())
            mass = float(masses[(locs >= a - MASS_TOL) & (locs <= b + MASS_TOL)].sum())
            excess = weight - mass
            if excess > MASS_TOL and (best is None or excess > best[0]):
                best = (excess, HallCertificate(float(a), float(b), weight, mass,
                                                tuple(int(i) for i in np.flatnonzero(inside))))
    return None if best is None else best[1]


def _fractional(lo, hi, w, locs, masses):
    """Earliest-deadline greedy over target atoms in increasing order.

    For interval supplies against point demands this greedy finds a
    maximum transport, so failure certifies infeasibility.
    """
    remaining = w.copy()
    order = np.argsort(hi, kind="stable")
    assignment = []
    for j in np.argsort(locs, kind="stable"):
        x, need = locs[j], masses[j]
        for i in order:
            if need <= MASS_TOL:
                break
            if remaining[i] <= MASS_TOL or lo[i] > x + MASS_TOL or hi[i] < x - MASS_TOL:
                continue
            take = min(need, remaining[i])
            remaining[i] -= take
            need -= take
            assignment.append((int(i), float(x), float(take)))
        if need > MASS_TOL:
            return None
    if np.any(remaining > MASS_TOL):
        return None
    return tuple(assignment)


def _deterministic(lo, hi, w, locs, masses, cap):
    """Whole-entry assignments by depth-first search with memoization."""
    if w.size > cap:
        raise ResourceError(f"{w.size} entries exceed the deterministic search cap of {cap}")
    scale = 1e9
    slack = w.size + 1  # accumulated rounding, in units of 1 / scale

    @lru_cache(maxsize=None)
    def search(i, left):
        if i == w.size:
            return () if all(abs(v) <= slack for v in left) else None
        for j in range(locs.size):
            if lo[i] - MASS_TOL <= locs[j] <= hi[i] + MASS_TOL and left[j] >= round(w[i] * scale) - slack:
                nxt = list(left)
                nxt[j] -= round(w[i] * scale)
                rest = search(i + 1, tuple(nxt))
                if rest is not None:
                    return ((i, float(locs[j]), float(w[i])),) + rest
        return None

    return search(0, tuple(round(m * scale) for m in masses))


def feasibility_check(prob: FeasibilityProblem, q: float, cap: int = DEFAULT_CAP) -> Verdict:
    """Can a selection on the finite experiment induce the atomic target?

    Fractional mode lets an entry split its weight across states of its
    quantile set; deterministic mode sends each entry to a single state.
    """
    _check_q(q)
    lo, hi, w, locs, masses = _instance(prob, q)
    frac = _fractional(lo, hi, w, locs, masses)
    if frac is None:
        cert = _hall_certificate(lo, hi, w, locs, masses)
        note = "" if cert is not None else "target mass outside every quantile set"
        return Verdict(False, prob.mode, certificate=cert, note=note)
    if prob.mode == "fractional":
        return Verdict(True, prob.mode, frac)
    det = _deterministic(lo, hi, w, locs, masses, cap)
    if det is None:
        return Verdict(False, prob.mode, note="no whole-entry assignment exists")
    return Verdict(True, prob.mode, det)


def restrict_to_support(h: Cdf, support) -> Cdf:
    """Move each unit of ``H``'s mass to the nearest support point.

    Point ``s_j`` receives the mass of ``(m_{j-1}, m_j]`` with ``m`` the
    midpoints of consecutive support points, so an atomic ``H`` already on
    the support is returned unchanged.
    """
    s = np.unique(np.asarray(support, dtype=float))
    cum = np.r_[h.eval(0.5 * (s[1:] + s[:-1])), 1.0]
    masses = np.diff(np.r_[0.0, cum])
    masses = np.maximum(masses, 0.0)
    keep = masses > TOL
    return atomic(s[keep], masses[keep] / masses[keep].sum(), h.domain)


def brute_force_implementable(f: Cdf, q: float, h: Cdf) -> bool:
    """Decide implementability by transport on the discretized matching experiment."""
    if not f.is_atomic:
        raise InvariantError("brute force needs an atomic prior")
    locs, _ = f.atoms()
    if locs.size > 8:
        raise ResourceError("brute force is limited to priors with at most 8 atoms")
    hl, _ = h.atoms()
    if not h.is_atomic or not all(np.any(np.abs(locs - x) <= 1e-12) for x in hl):
        raise InvariantError("target must be supported on the prior's atoms")
    exp = discretize_experiment(matching_experiment(f, q))
    return bool(feasibility_check(FeasibilityProblem(exp, h, "fractional"), q))


# -- regret ---------------------------------------------------------------------


@dataclass(frozen=True)
class RegretReport:
    opt_value: float
    implemented_sup: float
    regret: float

    def __post_init__(self):
        if self.regret < -1e-9:
            raise InvariantError(f"negative regret {self.regret}")

    def to_dict(self) -> dict:
        return {"opt_value": self.opt_value, "implemented_sup": self.implemented_sup,
                "regret": self.regret}


def implemented_sup(exp, v: Objective, q: float | None = None) -> float:
    """Best ``integral V dH`` over distributions the experiment implements.

    Picking a maximizer of ``V`` on every quantile set attains the sup, so
    this is the label integral of per-posterior interval maxima.
    """
    if isinstance(exp, FiniteExperiment):
        if q is None:
            raise ValueError("finite experiments need q")
        return float(sum(e.weight * argmax_interval(v, iv.lo, iv.hi).max_value
                         for e, iv in zip(exp.entries, exp.intervals(q))))
    lower, upper = exp.interval_pieces()
    return sweep(lower, upper, v).value


def regret(exp, v: Objective, f: Cdf, q: float) -> RegretReport:
    opt = optimize_quantile_dist(v, f, q).value
    sup = implemented_sup(exp, v, q)
    return RegretReport(opt, sup, opt - sup)


# -- uniqueness probes ------------------------------------------------------------


@dataclass(frozen=True)
class ProbeResult:
    p: float
    verdict: Verdict
    target: Cdf = field(repr=False)


def _as_finite(exp) -> FiniteExperiment:
    return exp if isinstance(exp, FiniteExperiment) else discretize_experiment(exp)


def probe_verdicts(exp, f: Cdf, q: float, p_grid) -> list[ProbeResult]:
    """Feasibility of each ``H_p``, restricted to the posteriors' support, on ``exp``."""
    fe = _as_finite(exp)
    support = np.unique(np.concatenate([e.posterior.atoms()[0] for e in fe.entries]))
    out = []
    for p in p_grid:
        target = restrict_to_support(hp_distribution(float(p), f, q), support)
        out.append(ProbeResult(float(p), feasibility_check(FeasibilityProblem(fe, target), q), target))
    return out


def uniqueness_probe(exp, f: Cdf, q: float, p_grid) -> list[float]:
    """Levels ``p`` whose ``H_p`` the experiment cannot implement."""
    return [r.p for r in probe_verdicts(exp, f, q, p_grid) if not r.verdict]
