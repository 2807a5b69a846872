"""JSON and CSV formats for distributions, objectives and experiments."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import IO, Any, Mapping

import numpy as np

from .dist import Cdf, Domain, InvariantError, atomic, dirac, from_points, merged_knots, uniform
from .implement import (
    MATCHING,
    NAM,
    Entry,
    FiniteExperiment,
    ParametricExperiment,
)
from .objective import Objective

DEFAULT_DOMAIN = Domain(0.0, 1.0)


class SchemaError(ValueError):
    """Input does not match the expected JSON layout."""

    def __init__(self, path: str, field: str, problem: str):
        self.path = path
        self.field = field
        super().__init__(f"{path}: field {field!r}: {problem}")


# -- helpers --------------------------------------------------------------------


def _need(obj: Mapping, key: str, path: str):
    if not isinstance(obj, Mapping):
        raise SchemaError(path, key, "expected a JSON object")
    if key not in obj:
        raise SchemaError(path, key, "missing")
    return obj[key]


def _number(value, path: str, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, key, f"expected a number, got {value!r}")
    return float(value)


def _pairs(value, path: str, key: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(path, key, "expected a list of [x, y] pairs") from None
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise SchemaError(path, key, "expected a non-empty list of [x, y] pairs")
    return arr


def _domain(obj: Mapping, path: str, default: Domain | None) -> Domain:
    if "domain" not in obj:
        if default is None:
            raise SchemaError(path, "domain", "missing")
        return default
    d = obj["domain"]
    if not isinstance(d, (list, tuple)) or len(d) != 2:
        raise SchemaError(path, "domain", "expected [lo, hi]")
    try:
        return Domain(_number(d[0], path, "domain"), _number(d[1], path, "domain"))
    except InvariantError as exc:
        raise SchemaError(path, "domain", str(exc)) from None


def load_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(str(path), "<document>", f"malformed JSON ({exc})") from None


# -- distributions --------------------------------------------------------------


def cdf_to_json(d: Cdf) -> dict:
    return {
        "domain": [d.domain.lo, d.domain.hi],
        "knots": [{"x": x, "left": l, "right": r} for x, l, r in d.knots()],
    }


def cdf_from_json(obj: Any, path: str = "$", default_domain: Domain | None = DEFAULT_DOMAIN) -> Cdf:
    """Parse a distribution.

    Besides the full knot form, the shorthands ``uniform`` (with
    ``domain``), ``dirac`` (with ``at``), ``atoms`` (with ``atoms`` as
    ``[x, mass]`` pairs) and ``points`` (continuous, ``[x, F(x)]`` pairs)
    are accepted.  A missing domain falls back to ``default_domain``.
    """
    if not isinstance(obj, Mapping):
        raise SchemaError(path, "<root>", "expected a JSON object")
    kind = obj.get("kind", "knots")
    try:
        if kind == "uniform":
            dom = _domain(obj, path, default_domain)
            return uniform(dom.lo, dom.hi, dom)
        if kind == "dirac":
            at = _number(_need(obj, "at", path), path, "at")
            return dirac(at, _domain(obj, path, default_domain))
        if kind == "atoms":
            arr = _pairs(_need(obj, "atoms", path), path, "atoms")
            return atomic(arr[:, 0], arr[:, 1], _domain(obj, path, default_domain))
        if kind == "points":
            arr = _pairs(_need(obj, "points", path), path, "points")
            return from_points(_domain(obj, path, default_domain), arr[:, 0], arr[:, 1])
        if kind != "knots":
            raise SchemaError(path, "kind", f"unknown distribution kind {kind!r}")
        dom = _domain(obj, path, default_domain)
        knots = _need(obj, "knots", path)
        if not isinstance(knots, list) or not knots:
            raise SchemaError(path, "knots", "expected a non-empty list")
        xs, ls, rs = [], [], []
        for i, k in enumerate(knots):
            kp = f"{path}.knots[{i}]"
            xs.append(_number(_need(k, "x", kp), kp, "x"))
            rs.append(_number(_need(k, "right", kp), kp, "right"))
            ls.append(_number(k.get("left", rs[-1]), kp, "left"))
        return Cdf(dom, xs, ls, rs)
    except InvariantError as exc:
        raise SchemaError(path, "knots", str(exc)) from None


# -- objectives -----------------------------------------------------------------


def objective_to_json(v: Objective) -> dict:
    if v.kind == "quadratic":
        return {"kind": "quadratic", **v.params}
    if v.kind == "tent":
        return {"kind": "tent", "peak": v.params["peak"]}
    if v.kind == "affine":
        return {"kind": "affine", **v.params}
    lo, hi = v.support
    xs = np.r_[lo, v.breaks, hi] if np.isfinite(lo) and np.isfinite(hi) else v.breaks
    xs = np.unique(xs)
    return {"kind": "piecewise_linear", "points": [[float(x), float(v.eval(x))] for x in xs]}


def objective_from_json(obj: Any, path: str = "$") -> Objective:
    if not isinstance(obj, Mapping):
        raise SchemaError(path, "<root>", "expected a JSON object")
    kind = _need(obj, "kind", path)
    if kind == "piecewise_linear":
        pts = _pairs(_need(obj, "points", path), path, "points")
        try:
            return Objective.piecewise_linear(pts)
        except InvariantError as exc:
            raise SchemaError(path, "points", str(exc)) from None
    if kind == "quadratic":
        center = _number(_need(obj, "center", path), path, "center")
        return Objective.quadratic(center, _number(obj.get("scale", 1.0), path, "scale"))
    if kind == "tent":
        return Objective.tent(_number(_need(obj, "peak", path), path, "peak"))
    if kind == "affine":
        return Objective.affine(_number(_need(obj, "slope", path), path, "slope"),
                                _number(obj.get("intercept", 0.0), path, "intercept"))
    raise SchemaError(path, "kind", f"unknown objective kind {kind!r}")


# -- experiments ----------------------------------------------------------------


def experiment_to_json(exp) -> dict:
    return exp.to_dict()


def experiment_from_json(obj: Any, path: str = "$"):
    if not isinstance(obj, Mapping):
        raise SchemaError(path, "<root>", "expected a JSON object")
    prior = cdf_from_json(_need(obj, "prior", path), f"{path}.prior")
    if "entries" in obj:
        entries = []
        for i, e in enumerate(_need(obj, "entries", path)):
            ep = f"{path}.entries[{i}]"
            atoms = _pairs(_need(e, "atoms", ep), ep, "atoms")
            try:
                post = atomic(atoms[:, 0], atoms[:, 1], prior.domain)
            except InvariantError as exc:
                raise SchemaError(ep, "atoms", str(exc)) from None
            entries.append(Entry(_number(_need(e, "label", ep), ep, "label"),
                                 _number(_need(e, "weight", ep), ep, "weight"), post))
        try:
            return FiniteExperiment.create(prior, entries)
        except InvariantError as exc:
            raise SchemaError(path, "entries", str(exc)) from None
    kind = _need(obj, "kind", path)
    q = _number(_need(obj, "q", path), path, "q")
    if not 0.0 < q < 1.0:
        raise SchemaError(path, "q", "must lie in (0, 1)")
    if kind in (MATCHING, NAM):
        return ParametricExperiment(prior, q, kind)
    if kind == "unique_impl":
        from .unique import unique_experiment

        target = cdf_from_json(_need(obj, "target", path), f"{path}.target", prior.domain)
        e = _number(_need(obj, "e", path), path, "e")
        n = _need(obj, "n", path)
        if not isinstance(n, int) or isinstance(n, bool):
            raise SchemaError(path, "n", "expected an integer")
        return unique_experiment(target, prior, q, e, n)
    raise SchemaError(path, "kind", f"unknown experiment kind {kind!r}")


# -- CSV ------------------------------------------------------------------------


def _open_out(out: str | Path | IO[str]):
    if hasattr(out, "write"):
        return out, False
    return open(out, "w", newline="", encoding="utf-8"), True


def write_rows(out, header, rows) -> None:
    fh, close = _open_out(out)
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    finally:
        if close:
            fh.close()


def plot_rows(curves: Mapping[str, Cdf], grid: int | None = None) -> list[list[float]]:
    """Rows ``[x, D_1(x), ...]`` over merged knots (plus an optional grid).

    Where any curve jumps the state appears twice, left limits first.
    """
    dists = list(curves.values())
    if not dists:
        raise ValueError("no curves to emit")
    dom = dists[0].domain
    xs = merged_knots(*dists)
    if grid:
        xs = np.unique(np.r_[xs, np.linspace(dom.lo, dom.hi, grid)])
        xs = xs[np.r_[True, np.diff(xs) > 1e-12]]
    left = np.column_stack([d.eval(xs, "left") for d in dists])
    right = np.column_stack([d.eval(xs, "right") for d in dists])
    rows = []
    for i, x in enumerate(xs):
        if np.any(right[i] - left[i] > 1e-12):
            rows.append([x, *left[i]])
        rows.append([x, *right[i]])
    return rows


def emit_plot_data(curves: Mapping[str, Cdf], out, grid: int | None = None) -> None:
    write_rows(out, ["x", *curves.keys()], plot_rows(curves, grid))
