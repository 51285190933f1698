"""Command-line interface.

Every command writes one table (CSV or JSON) to stdout or ``--out``.
CSV output starts with ``# key=value`` metadata lines, then a header row;
numbers carry 9 significant digits. Exit codes: 0 success, 2 invalid
parameters, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .car import CarSpec, build_precision, car_covariance_curve
from .errors import InvalidParameterError, NumericalError
from .fields import (
    empirical_lag_covariance,
    fit_kappa,
    run_ergodicity_experiment,
    sample_fields,
)
from .linkage import DISCREPANCY_WARN, besag_approx_a, compare_curves
from .matern import MaternParams, matern_curve

EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.9g}")
    return v


def render(meta: Dict[str, object], columns: Sequence[str], rows: List[Sequence], fmt: str) -> str:
    if fmt == "json":
        doc = {
            "meta": {k: _jsonable(v) for k, v in meta.items()},
            "columns": list(columns),
            "rows": [{c: _jsonable(v) for c, v in zip(columns, row)} for row in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={_fmt(v)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return value


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# --- commands -------------------------------------------------------------


def cmd_cov(args):
    params = MaternParams(args.kappa, args.alpha, args.variance_scale)
    method = "series" if args.series else ("closed" if args.closed else "auto")
    curve = matern_curve(params, args.n, method=method, tol=args.tol)
    meta = {"command": "cov", "alpha": args.alpha, "kappa": args.kappa, "n": args.n, "method": method}
    rows = [(k, k / args.n, v) for k, v in enumerate(curve.values)]
    return meta, ("lag", "theta", "value"), rows


def cmd_car(args):
    spec = CarSpec(args.n, args.order, args.a, args.sigma2)
    prec = build_precision(spec).first_row
    curve = car_covariance_curve(spec)
    meta = {"command": "car", "n": spec.n, "order": spec.order, "a": spec.a, "sigma2": spec.sigma2, "beta": spec.beta}
    if spec.order == 2:
        meta.update(a1=spec.a1, a2=spec.a2)
    meta["psd"] = curve.is_psd()
    rows = [(k, k / spec.n, prec[k], curve.values[k]) for k in range(spec.n)]
    return meta, ("lag", "theta", "precision", "covariance"), rows


def cmd_match(args):
    comp = compare_curves(args.kappa, args.alpha, args.n)
    meta = {
        "command": "match",
        "alpha": args.alpha,
        "kappa": args.kappa,
        "n": args.n,
        "order": comp.car.order,
        "a": comp.car.a,
        "sigma2": comp.car.sigma2,
        "discrepancy_factor": comp.discrepancy_factor,
        "max_corr_diff": comp.max_corr_diff,
    }
    if args.besag:
        besag = besag_approx_a(args.kappa, args.n)
        meta.update(besag_a=besag, besag_minus_exact=besag - comp.car.a)
    warning = None
    if comp.discrepancy_factor > DISCREPANCY_WARN:
        warning = f"discrepancy factor {comp.discrepancy_factor:.6f} exceeds {DISCREPANCY_WARN}; increase n relative to kappa"
        print(f"warning: {warning}", file=sys.stderr)
    meta["warning"] = warning or "none"
    rows = [
        (k, k / args.n, comp.matern_cov[k], comp.car_cov[k], comp.matern_corr[k], comp.car_corr[k], comp.abs_diff[k], comp.rel_diff[k])
        for k in range(args.n)
    ]
    cols = ("lag", "theta", "matern_cov", "car_cov", "matern_corr", "car_corr", "abs_diff", "rel_diff")
    return meta, cols, rows


def cmd_figure1(args):
    meta = {"command": "figure1", "alpha": 2, "kappa": args.kappa}
    rows = []
    for panel, n in (("left", args.n_left), ("right", args.n_right)):
        comp = compare_curves(args.kappa, 2, n)
        meta[f"{panel}_n"] = n
        meta[f"{panel}_max_corr_diff"] = comp.max_corr_diff
        meta[f"{panel}_discrepancy_factor"] = comp.discrepancy_factor
        rows += [(panel, n, k, k / n, comp.matern_corr[k], comp.car_corr[k], comp.abs_diff[k]) for k in range(n)]
    return meta, ("panel", "n", "lag", "theta", "matern_corr", "car_corr", "abs_diff"), rows


def _model_curve(args):
    if args.model == "matern":
        if args.kappa is None or args.alpha is None:
            raise InvalidParameterError("--kappa and --alpha are required for the matern model")
        return matern_curve(MaternParams(args.kappa, args.alpha, args.variance_scale), args.n), {
            "model": "matern",
            "kappa": args.kappa,
            "alpha": args.alpha,
        }
    if args.a is None:
        raise InvalidParameterError("--a is required for the car model")
    spec = CarSpec(args.n, args.order, args.a, args.sigma2)
    return car_covariance_curve(spec), {"model": "car", "order": spec.order, "a": spec.a, "sigma2": spec.sigma2}


def cmd_sample(args):
    if args.seed is None:
        raise InvalidParameterError("--seed is required")
    if args.replicates < 1:
        raise InvalidParameterError("--replicates must be >= 1")
    curve, model_meta = _model_curve(args)
    samples = sample_fields(curve, args.seed, args.replicates)
    meta = {"command": "sample", **model_meta, "n": args.n, "seed": args.seed, "replicates": args.replicates}
    if args.summary:
        lags = sorted({0, 1, args.n // 2})
        est, se = empirical_lag_covariance(samples, lags)
        rows = []
        for lag, e, s in zip(lags, est, se):
            theory = curve.values[lag]
            rows.append((lag, e, theory, s, (e - theory) / s if s > 0 else 0.0))
        return meta, ("lag", "empirical", "theory", "se", "z"), rows
    rows = [(r, i, samples[r, i]) for r in range(args.replicates) for i in range(args.n)]
    return meta, ("replicate", "index", "value"), rows


def read_fields(path: str) -> np.ndarray:
    """Load fields from a ``replicate,index,value`` CSV (comments allowed) or JSON table."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidParameterError(f"cannot read field file: {exc}")
    if text.lstrip().startswith("{"):
        records = json.loads(text)["rows"]
    else:
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        records = list(csv.DictReader(lines))
    if not records:
        raise InvalidParameterError(f"no field values in {path}")
    try:
        triples = [(int(r["replicate"]), int(r["index"]), float(r["value"])) for r in records]
    except (KeyError, ValueError) as exc:
        raise InvalidParameterError(f"malformed field file {path}: {exc}")
    reps = sorted({t[0] for t in triples})
    n = max(t[1] for t in triples) + 1
    out = np.full((len(reps), n), np.nan)
    pos = {r: i for i, r in enumerate(reps)}
    for r, i, v in triples:
        out[pos[r], i] = v
    if np.isnan(out).any():
        raise InvalidParameterError(f"field file {path} has missing lattice values")
    return out


def cmd_fit(args):
    fields = read_fields(args.input)
    fit = fit_kappa(fields, args.alpha, bracket=(args.kappa_min, args.kappa_max))
    meta = {"command": "fit", "alpha": args.alpha, "fields": fields.shape[0], "n": fields.shape[1]}
    row = (fit.kappa, fit.log_likelihood, fit.boundary or "none")
    return meta, ("kappa", "log_likelihood", "boundary"), [row]


def cmd_ergodicity(args):
    if args.seed is None:
        raise InvalidParameterError("--seed is required")
    if args.replicates < 2:
        raise InvalidParameterError("--replicates must be >= 2")
    params = MaternParams(args.kappa, args.alpha)
    rep = run_ergodicity_experiment(params, args.sizes, args.replicates, args.seed, args.extra_variance)
    meta = {
        "command": "ergodicity",
        "kappa": args.kappa,
        "alpha": args.alpha,
        "replicates": rep.replicates,
        "seed": args.seed,
        "extra_variance": rep.extra_variance,
        "floor": rep.floor,
    }
    rows = [
        (n, v, se, rep.expected, lat, z)
        for n, v, se, lat, z in zip(rep.grid_sizes, rep.variances, rep.standard_errors, rep.lattice_variances, rep.z_scores())
    ]
    return meta, ("n", "variance", "se", "expected", "lattice_variance", "z"), rows


# --- parser ---------------------------------------------------------------


def _common(p):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="write to this path instead of stdout")
    p.add_argument("--config", default=None, help="key=value file; flags win on conflict")


def build_parser():
    parser = _Parser(prog="circmatern", description="Circular Matern fields and CAR models on the circle")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("cov", help="circular Matern covariance at lattice lags")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--n", type=_int, required=True)
    p.add_argument("--variance-scale", type=float, default=1.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--closed", action="store_true")
    g.add_argument("--series", action="store_true")
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_cov)

    p = sub.add_parser("car", help="CAR precision row and covariance")
    p.add_argument("--n", type=_int, required=True)
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.set_defaults(func=cmd_car)

    p = sub.add_parser("match", help="match a CAR model to a circular Matern field")
    p.add_argument("--alpha", type=int, choices=(1, 2), required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--n", type=_int, required=True)
    p.add_argument("--besag", action="store_true")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("figure1", help="alpha=2 correlation curves, Matern vs matched CAR")
    p.add_argument("--kappa", type=float, default=10.0)
    p.add_argument("--n-left", type=_int, default=10)
    p.add_argument("--n-right", type=_int, default=50)
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("sample", help="draw lattice fields")
    p.add_argument("--model", choices=("matern", "car"), default="matern")
    p.add_argument("--n", type=_int, required=True)
    p.add_argument("--kappa", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--variance-scale", type=float, default=1.0)
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    p.add_argument("--a", type=float)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--summary", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="maximum-likelihood kappa from a field file")
    p.add_argument("--input", required=True)
    p.add_argument("--alpha", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--kappa-min", type=float, default=1e-3)
    p.add_argument("--kappa-max", type=float, default=1e3)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ergodicity", help="variance of the circle average under refinement")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--sizes", type=_int_list, default=[16, 64, 256])
    p.add_argument("--replicates", type=int, default=20000)
    p.add_argument("--seed", type=int)
    p.add_argument("--extra-variance", type=float, default=0.0)
    p.set_defaults(func=cmd_ergodicity)

    for p in sub.choices.values():
        _common(p)
    return parser, sub


def read_config(path: str) -> Dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _config_defaults(subparser: argparse.ArgumentParser, config: Dict[str, str]) -> Dict[str, object]:
    actions = {a.dest: a for a in subparser._actions}
    out = {}
    for key, raw in config.items():
        if key not in actions or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                value = action.type(raw)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key}: {exc}")
        else:
            value = raw
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key}: {value!r} not in {list(action.choices)}")
        out[key] = value
        action.required = False
    return out


def _parse(argv: Optional[Sequence[str]]):
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = _Parser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    parser, sub = build_parser()
    if known.config and known.command in sub.choices:
        try:
            config = read_config(known.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}")
        subparser = sub.choices[known.command]
        subparser.set_defaults(**_config_defaults(subparser, config))
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _parse(argv)
        meta, columns, rows = args.func(args)
        text = render(meta, columns, rows, args.format)
    except UsageError as exc:
        print(f"circmatern: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InvalidParameterError as exc:
        print(f"circmatern: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"circmatern: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
