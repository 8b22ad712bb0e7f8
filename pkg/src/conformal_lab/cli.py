"""``conformal-lab`` command-line front end.

Exit codes: 0 success, 1 usage or input errors, 2 violated hypotheses,
3 exhausted budget.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from datetime import datetime, timezone

import numpy as np

from . import __version__, config
from .dimension import box_counting, entropy_dimension, lyapunov, shannon_entropy
from .errors import BudgetExceeded, ConformalLabError, HypothesisViolated
from .family import (
    PeriodicWord,
    common_fixed_point_brackets,
    load_family,
    zero_brackets,
)
from .ifs import load_ifs
from .lab import (
    doubling_check,
    entropy_increase_experiment,
    linearization_check,
    multiscale_decomposition_check,
    taylor_block_experiment,
    uniform_entropy_dimension_check,
)
from .measure import PolyMeasure, RealMeasure, discretize_self_conformal, dyadic_entropy
from .pressure import pressure_curve, similarity_dimension
from .separation import separation_profile

EXIT_OK, EXIT_ERROR, EXIT_HYPOTHESIS, EXIT_BUDGET = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # keep exit code 2 for violated hypotheses
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _clean(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


class Output:
    """A table or a JSON document plus the run header."""

    def __init__(self, command, params, seed, deterministic):
        self.header = {"command": command, "version": __version__, "seed": seed,
                       "parameters": params}
        if not deterministic:
            self.header["generated"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.columns = None
        self.rows = []
        self.document = None

    def render(self, fmt):
        if fmt == "json":
            body = self.document
            if body is None:
                body = [dict(zip(self.columns, r)) for r in self.rows]
            return json.dumps(_clean({"header": self.header, "result": body}), indent=2) + "\n"
        buf = io.StringIO()
        for key in ("command", "version", "seed", "generated"):
            if key in self.header:
                buf.write(f"# {key}: {self.header[key]}\n")
        buf.write(f"# parameters: {json.dumps(_clean(self.header['parameters']), sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        if self.columns is None:
            w.writerow(["key", "value"])
            for k, v in _flatten(self.document):
                w.writerow([k, _cell(v)])
        else:
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_cell(v) for v in r])
        return buf.getvalue()


def _cell(v):
    v = _clean(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v)
    return v


def _flatten(doc, prefix=""):
    for k, v in doc.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, name + ".")
        else:
            yield name, v


# --------------------------------------------------------------------------
# subcommands

def cmd_validate(args, out):
    ifs = load_ifs(args.ifs)
    out.document = {
        "maps": [str(m) for m in ifs.maps],
        "probs": [float(p) for p in ifs.probs],
        "rho_min": ifs.rho_min,
        "rho_max": ifs.rho_max,
        "derivative_bounds": [[d.lo, d.hi] for d in ifs.deriv_bounds],
        "range_bounds": [[r.lo, r.hi] for r in ifs.range_bounds],
        "disjoint_ranges": ifs.has_disjoint_ranges,
        "affine": ifs.is_affine,
        "c_bound": ifs.c_bound,
        "fixed_points": [float(fp) for fp in ifs.fixed_points],
        "common_fixed_point": ifs.common_fixed_point,
    }


def cmd_dim(args, out):
    ifs = load_ifs(args.ifs)
    out.header["parameters"].update({"nmax": args.nmax, "method": args.method})
    if args.method == "box":
        rep = box_counting(ifs, args.nmax)
    else:
        rep = entropy_dimension(ifs, args.nmax)
    out.columns = ["n", "value"]
    out.rows = [list(r) for r in rep.levels_used]
    doc = rep.to_json()
    doc["entropy_of_probs"] = shannon_entropy(ifs.probs)
    doc["lyapunov"] = lyapunov(ifs, args.nmax)
    doc["theorem_rhs"] = min(1.0, doc["entropy_of_probs"] / doc["lyapunov"])
    out.document = doc


def cmd_pressure(args, out):
    ifs = load_ifs(args.ifs)
    ts = np.linspace(args.tmin, args.tmax, args.steps).tolist()
    out.header["parameters"].update({"n": args.n, "tmin": args.tmin, "tmax": args.tmax,
                                     "steps": args.steps})
    curve = pressure_curve(ifs, ts, args.n)
    out.columns = ["t", "lower", "upper"]
    out.rows = [list(r) for r in curve.rows()]
    doc = curve.to_json()
    doc["similarity_dimension"] = similarity_dimension(ifs, args.tol, args.n)
    doc["distortion_gap_per_unit_t"] = math.log2(ifs.c_bound) / args.n
    out.document = doc


def cmd_separation(args, out):
    ifs = load_ifs(args.ifs)
    out.header["parameters"].update({"nmax": args.nmax, "tol": args.tol})
    prof = separation_profile(ifs, args.nmax, args.tol)
    table = prof.table()
    out.columns = ["n", "lo", "hi", "rate", "witness_u1", "witness_u2", "exact_overlap"]
    out.rows = [[r[c] for c in out.columns] for r in table]
    out.document = {"rows": table, "exact_overlap": prof.collided}


def cmd_entropy(args, out):
    ifs = load_ifs(args.ifs)
    res = args.resolution or args.n
    out.header["parameters"].update({"n": args.n, "resolution": res})
    mu = discretize_self_conformal(ifs, res)
    levels = list(range(0, args.n + 1))
    hs = config.ordered_map(lambda k: dyadic_entropy(mu, k), levels)
    out.columns = ["n", "entropy", "normalized"]
    out.rows = [[k, h, h / k if k else 0.0] for k, h in zip(levels, hs)]
    out.document = {"atoms": len(mu),
                    "levels": [dict(zip(out.columns, r)) for r in out.rows]}


def _param_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_params(items):
    params = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ValueError(f"--params entries look like key=value, got {item!r}")
        params[key.strip()] = _param_value(val.strip())
    return params


def _lattice(count, order=1):
    count = int(count)
    if count < 1:
        raise ValueError("nu_translates must be >= 1")
    base = [0.0] * (order + 1)
    base[1] = 1.0
    return PolyMeasure([[j / count] + base[1:] for j in range(count)], order=order)


def _needs_ifs(args):
    if not args.ifs:
        raise ValueError("this experiment needs --ifs")
    return load_ifs(args.ifs)


def _exp_entropy_increase(args, p):
    ifs = _needs_ifs(args)
    return entropy_increase_experiment(ifs, _lattice(p.get("nu_translates", 8)), p.get("psi"),
                                       int(p.get("n", 12)), float(p.get("eps", 0.1)),
                                       float(p.get("threshold", 0.02)))


def _exp_uniform(args, p):
    ifs = _needs_ifs(args)
    return uniform_entropy_dimension_check(ifs, p.get("psi"), int(p.get("m", 6)),
                                           int(p.get("n", 14)), float(p.get("eps", 0.15)),
                                           int(p.get("samples", 2000)), args.seed)


def _exp_doubling(args, p):
    ifs = _needs_ifs(args)
    thr = p.get("threshold")
    return doubling_check(ifs, p.get("psi"), float(p.get("delta", 3.0 ** -3)),
                          int(p.get("samples", 5000)), args.seed,
                          int(p.get("resolution", 20)), None if thr is None else float(thr))


def _exp_linearization(args, p):
    delta = float(p.get("delta", 2.0 ** -8))
    x = float(p.get("x", 0.5))
    poly = [float(c) for c in p.get("p", [0.1, 1.0, 0.3])]
    nu = PolyMeasure([poly, [poly[0] + delta / 2] + poly[1:]])
    theta = RealMeasure([x, x + delta / 2])
    return linearization_check(nu, theta, poly, x, int(p.get("m", 6)), delta,
                               float(p.get("threshold", 0.1)))


def _exp_multiscale(args, p):
    ifs = _needs_ifs(args)
    n = int(p.get("n", 12))
    theta = discretize_self_conformal(ifs, n)
    return multiscale_decomposition_check(_lattice(p.get("nu_translates", 8)), theta, n,
                                          int(p.get("m", 4)))


def _exp_taylor(args, p):
    ifs = _needs_ifs(args)
    return taylor_block_experiment(ifs, int(p.get("n", 6)), int(p.get("n_prime", 3)),
                                   int(p.get("k", 3)), int(p.get("per_block", 4)),
                                   int(p.get("inner", 8)), int(p.get("grid", 1000)), args.seed)


EXPERIMENTS = {
    "entropy_increase": _exp_entropy_increase,
    "uniform_entropy_dimension": _exp_uniform,
    "doubling": _exp_doubling,
    "linearization": _exp_linearization,
    "multiscale_decomposition": _exp_multiscale,
    "taylor_block": _exp_taylor,
}


def cmd_experiment(args, out):
    params = _parse_params(args.params)
    out.header["parameters"].update({"name": args.name, "params": params})
    report = EXPERIMENTS[args.name](args, params)
    out.document = report.to_json()
    if report.rows:
        out.columns = list(report.rows[0].keys())
        out.rows = [[r[c] for c in out.columns] for r in report.rows]
    if report.violations:
        return EXIT_HYPOTHESIS
    return EXIT_OK


def cmd_family_scan(args, out):
    fam = load_family(args.family)
    out.header["parameters"].update({"grid": args.grid, "tol": args.tol, "depth": args.depth,
                                     "omega": args.omega, "eta": args.eta})
    if (args.omega is None) != (args.eta is None):
        raise ValueError("give both --omega and --eta, or neither")
    if args.omega is not None:
        w, e = PeriodicWord.parse(args.omega), PeriodicWord.parse(args.eta)
        found = [(b, f"{args.omega}|{args.eta}")
                 for b in zero_brackets(fam, w, e, args.grid, args.tol, args.depth)]
    else:
        found = [(b, f"{i}|{j}")
                 for b, (i, j) in common_fixed_point_brackets(fam, args.grid, args.tol,
                                                              args.depth)]
    out.columns = ["t_zero_lo", "t_zero_hi", "pair"]
    out.rows = [[b.lo, b.hi, pair] for b, pair in found]
    out.document = {"zeros": [{"t_zero_lo": b.lo, "t_zero_hi": b.hi, "t": b.mid,
                               "touching": b.touching, "pair": pair} for b, pair in found]}


COMMANDS = {
    "validate": (cmd_validate, "json"),
    "dim": (cmd_dim, "json"),
    "pressure": (cmd_pressure, "csv"),
    "separation": (cmd_separation, "csv"),
    "entropy": (cmd_entropy, "csv"),
    "experiment": (cmd_experiment, "json"),
    "family-scan": (cmd_family_scan, "csv"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--budget", type=int, help="atom budget (default: $CONFORMAL_LAB_BUDGET "
                        f"or {config.DEFAULT_BUDGET})")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--deterministic", action="store_true",
                        help="omit the timestamp from the header")

    parser = _Parser(prog="conformal-lab",
                     description="Numerical laboratory for conformal iterated function systems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text)

    p = add("validate", "certify contraction and range bounds of an IFS")
    p.add_argument("--ifs", required=True)

    p = add("dim", "entropy (or box-counting) dimension")
    p.add_argument("--ifs", required=True)
    p.add_argument("--nmax", type=int, default=16)
    p.add_argument("--method", choices=("entropy", "box"), default="entropy")

    p = add("pressure", "pressure curve and similarity dimension")
    p.add_argument("--ifs", required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--tmin", type=float, default=0.0)
    p.add_argument("--tmax", type=float, default=2.0)
    p.add_argument("--steps", type=int, default=21)
    p.add_argument("--tol", type=float, default=1e-6)

    p = add("separation", "minimum pairwise sup-norm distance profile")
    p.add_argument("--ifs", required=True)
    p.add_argument("--nmax", type=int, default=6)
    p.add_argument("--tol", type=float, default=1e-9)

    p = add("entropy", "dyadic entropies of the discretized self-conformal measure")
    p.add_argument("--ifs", required=True)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--resolution", type=int)

    p = add("experiment", "run a named experiment")
    p.add_argument("--ifs")
    p.add_argument("--name", required=True, choices=sorted(EXPERIMENTS))
    p.add_argument("--params", nargs="*", default=[], metavar="KEY=VALUE")

    p = add("family-scan", "zeros of F and common fixed points of a family")
    p.add_argument("--family", required=True)
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--depth", type=int, default=64)
    p.add_argument("--omega")
    p.add_argument("--eta")
    return parser


def _resolved(args):
    skip = {"output", "format", "threads", "deterministic", "seed", "command", "func"}
    params = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    params["budget"] = config.resolve_budget(args.budget)
    return params


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if args.budget is not None and args.budget < 1:
        parser.error("--budget must be positive")
    func, default_fmt = COMMANDS[args.command]
    fmt = args.format or default_fmt
    out = Output(args.command, _resolved(args), args.seed, args.deterministic)
    try:
        with config.settings(budget=args.budget, threads=args.threads), \
                warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = func(args, out) or EXIT_OK
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except HypothesisViolated as exc:
        print(f"hypothesis violated: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConformalLabError, ValueError, OSError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR

    text = out.render(fmt)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
