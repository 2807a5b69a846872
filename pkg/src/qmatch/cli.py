"""Command-line interface.

Exit status is 0 on success, 1 when the requested verdict is negative and
2 on input errors.  JSON goes to standard output; CSV goes to ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .dist import DomainError, InvariantError, ks_distance
from .gerrymander import MODES, ElectoralModel, district_plan, seat_share_curve
from .implement import (
    NotImplementableError,
    SelectionError,
    bayes_residual,
    identity_selection,
    is_implementable,
    matching_experiment,
    matching_selection,
    nam_experiment,
    pushforward,
    quantile_bounds,
)
from .io import (
    SchemaError,
    cdf_from_json,
    cdf_to_json,
    emit_plot_data,
    experiment_from_json,
    load_json,
    objective_from_json,
    write_rows,
)
from .optimize import ObjectiveShapeError, optimize_quantile_dist
from .unique import full_revelation, unique_experiment, verify_unique
from .verify import ResourceError, probe_verdicts, regret, simulate

log = logging.getLogger("qmatch")

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT = 0, 1, 2


def _q(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"q must lie in (0, 1), got {text}")
    return value


def _default_seed() -> int:
    raw = os.environ.get("QM_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise SchemaError("QM_SEED", "QM_SEED", f"expected an integer, got {raw!r}") from None


def _prior(args):
    return cdf_from_json(load_json(args.prior), str(args.prior))


def _cdf_arg(path, prior):
    return cdf_from_json(load_json(path), str(path), prior.domain)


def _experiment(spec: str, prior, q):
    """A kind name (``matching``, ``nam``, ``full``) or a path to experiment JSON."""
    if spec == "matching":
        return matching_experiment(prior, q)
    if spec == "nam":
        return nam_experiment(prior, q)
    if spec == "full":
        return full_revelation(prior, q)
    return experiment_from_json(load_json(spec), spec)


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(payload) -> None:
    json.dump(payload, sys.stdout, indent=2, default=_plain)
    sys.stdout.write("\n")


# -- subcommands ------------------------------------------------------------------


def cmd_bounds(args) -> int:
    f = _prior(args)
    lower, upper = quantile_bounds(f, args.q)
    _emit({"q": args.q, "H_lower": cdf_to_json(lower), "H_upper": cdf_to_json(upper)})
    if args.out:
        emit_plot_data({"F": f, "H_lower": lower, "H_upper": upper}, args.out, args.grid)
    return EXIT_OK


def cmd_figure1(args) -> int:
    f = _prior(args)
    lower, upper = quantile_bounds(f, args.q)
    out = args.out or sys.stdout
    emit_plot_data({"F": f, "H_lower": lower, "H_upper": upper}, out, args.grid or 101)
    return EXIT_OK


def cmd_check(args) -> int:
    f = _prior(args)
    verdict = is_implementable(_cdf_arg(args.target, f), f, args.q)
    _emit(verdict.to_dict())
    return EXIT_OK if verdict else EXIT_NEGATIVE


def cmd_matching(args) -> int:
    f = _prior(args)
    exp = matching_experiment(f, args.q)
    payload = {"experiment": exp.to_dict(), "bayes_residual": bayes_residual(exp)}
    if args.label is not None:
        post = exp.posterior_at(args.label)
        iv = post.quantiles(args.q)
        locs, masses = post.dist.atoms()
        payload["posterior"] = {"label": post.label, "atoms": [[float(a), float(m)] for a, m in zip(locs, masses)],
                                "quantile_interval": [iv.lo, iv.hi]}
    _emit(payload)
    return EXIT_OK


def cmd_optimize(args) -> int:
    f = _prior(args)
    v = objective_from_json(load_json(args.objective), str(args.objective))
    opt = optimize_quantile_dist(v, f, args.q)
    _emit(opt.to_dict())
    if args.out:
        emit_plot_data({"H_star": opt.H_star}, args.out, args.grid)
    return EXIT_OK


def cmd_implement(args) -> int:
    f = _prior(args)
    h = _cdf_arg(args.target, f)
    try:
        sel = matching_selection(h, f, args.q)
    except NotImplementableError as exc:
        _emit({"implementable": False, **exc.verdict.to_dict()})
        return EXIT_NEGATIVE
    exp = matching_experiment(f, args.q)
    induced = pushforward(exp, sel)
    _emit({"implementable": True, "experiment": exp.to_dict(),
           "selection": {"kind": "inverse_cdf", "H": cdf_to_json(h)},
           "pushforward_ks": ks_distance(induced, h)})
    if args.out:
        emit_plot_data({"H": h, "pushforward": induced}, args.out, args.grid)
    return EXIT_OK


def cmd_unique(args) -> int:
    f = _prior(args)
    h = _cdf_arg(args.target, f) if args.target else f
    try:
        exp = unique_experiment(h, f, args.q, args.e, args.n)
    except NotImplementableError as exc:
        _emit({"implementable": False, **exc.verdict.to_dict()})
        return EXIT_NEGATIVE
    induced = pushforward(exp, exp.identity_selection())
    verdict = verify_unique(exp, args.q, args.grid or 1024)
    _emit({"experiment": exp.to_dict(), "unique": verdict.unique, "max_width": verdict.max_width,
           "bayes_residual": bayes_residual(exp), "pushforward": cdf_to_json(induced),
           "H_n": cdf_to_json(exp.refinement.h_n)})
    if args.out:
        emit_plot_data({"H": h, "H_n": exp.refinement.h_n, "pushforward": induced}, args.out, args.grid)
    return EXIT_OK if verdict else EXIT_NEGATIVE


def cmd_regret(args) -> int:
    f = _prior(args)
    v = objective_from_json(load_json(args.objective), str(args.objective))
    report = regret(_experiment(args.experiment, f, args.q), v, f, args.q)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_probe(args) -> int:
    f = _prior(args)
    exp = _experiment(args.experiment, f, args.q)
    p_grid = args.p if args.p else list(np.linspace(0.0, 1.0, args.grid or 5))
    results = probe_verdicts(exp, f, args.q, p_grid)
    failing = [r.p for r in results if not r.verdict]
    _emit({"not_implemented": failing,
           "verdicts": [{"p": r.p, **r.verdict.to_dict()} for r in results]})
    return EXIT_OK if not failing else EXIT_NEGATIVE


def cmd_simulate(args) -> int:
    f = _prior(args)
    exp = _experiment(args.experiment, f, args.q)
    if hasattr(exp, "identity_selection"):
        sel = exp.identity_selection()
    elif getattr(exp, "kind", None) == "matching":
        h = _cdf_arg(args.target, f) if args.target else f
        sel = matching_selection(h, f, args.q)
    elif args.experiment == "full":
        sel = identity_selection()
    else:
        raise SchemaError(str(args.experiment), "experiment",
                          "simulation supports matching, full and unique_impl experiments")
    emp = simulate(exp, sel, args.N, args.seed, args.workers)
    exact = pushforward(exp, sel)
    ks = ks_distance(emp, exact)
    bound = 1.63 / np.sqrt(args.N)
    _emit({"N": args.N, "seed": args.seed, "ks": float(ks), "bound": float(bound), "within_bound": bool(ks < bound)})
    if args.out:
        emit_plot_data({"empirical": emp, "exact": exact}, args.out, args.grid)
    return EXIT_OK


def cmd_gerrymander(args) -> int:
    voters = cdf_from_json(load_json(args.voters), str(args.voters))
    shock = cdf_from_json(load_json(args.shock), str(args.shock), voters.domain)
    plan = district_plan(ElectoralModel(voters, shock), args.mode)
    _emit(plan.to_dict())
    if args.out:
        write_rows(args.out, ["rho", "share"], seat_share_curve(plan.H_star, args.grid or 101))
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmatch", description="Distributions of posterior quantiles.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, prior=True, q=True):
        p = sub.add_parser(name, help=help_)
        if prior:
            p.add_argument("--prior", required=True, type=Path, help="prior distribution JSON")
        if q:
            p.add_argument("-q", type=_q, default=0.5, help="quantile in (0, 1), default 0.5")
        p.add_argument("--grid", type=int, default=None, help="grid size for CSV output and checks")
        p.add_argument("--out", type=Path, default=None, help="CSV output path")
        p.set_defaults(func=fn)
        return p

    add("bounds", cmd_bounds, "lowest and highest implementable distributions")
    add("figure1", cmd_figure1, "CSV of F and both implementable bounds")
    p = add("check", cmd_check, "is a target implementable?")
    p.add_argument("--target", required=True, type=Path)
    p = add("matching", cmd_matching, "the matching experiment and one of its posteriors")
    p.add_argument("--label", type=float, default=None)
    p = add("optimize", cmd_optimize, "optimal implementable distribution for an objective")
    p.add_argument("--objective", required=True, type=Path)
    p = add("implement", cmd_implement, "matching selection that implements a target")
    p.add_argument("--target", required=True, type=Path)
    p = add("unique", cmd_unique, "experiment uniquely implementing a perturbed target")
    p.add_argument("--target", type=Path, default=None, help="defaults to the prior")
    p.add_argument("-e", type=float, default=0.5, help="perturbation weight in (0, 1]")
    p.add_argument("-n", type=int, default=3, help="dyadic refinement level")
    p = add("regret", cmd_regret, "regret of an experiment for an objective")
    p.add_argument("--objective", required=True, type=Path)
    p.add_argument("--experiment", default="matching", help="matching, nam, full, or a JSON path")
    p = add("probe", cmd_probe, "levels p whose H_p an experiment cannot implement")
    p.add_argument("--experiment", default="matching", help="matching, nam, full, or a JSON path")
    p.add_argument("--p", type=float, nargs="+", default=None, help="explicit levels")
    p = add("simulate", cmd_simulate, "Monte Carlo distribution of selected quantiles")
    p.add_argument("--experiment", default="matching", help="matching, full, or a JSON path")
    p.add_argument("--target", type=Path, default=None, help="distribution the matching selection implements")
    p.add_argument("-N", type=int, default=10**5)
    p.add_argument("--seed", type=int, default=None, help="defaults to $QM_SEED, else 0")
    p.add_argument("--workers", type=int, default=1)
    p = add("gerrymander", cmd_gerrymander, "optimal districting plan", prior=False, q=False)
    p.add_argument("--voters", required=True, type=Path)
    p.add_argument("--shock", required=True, type=Path)
    p.add_argument("--mode", required=True, choices=MODES)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        return args.func(args)
    except (SchemaError, InvariantError, DomainError, ObjectiveShapeError, SelectionError,
            ResourceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
