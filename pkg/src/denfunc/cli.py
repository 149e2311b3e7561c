"""Command-line entry point: CSV samples in, one JSON document out.

Exit codes: 0 success (or citest fail-to-reject), 1 configuration error,
2 I/O error, 3 citest rejected conditional independence, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional

import numpy as np

from . import SCHEMA_VERSION, __version__, bounds
from .citest import MODES, conditional_independence_test
from .conditional import renyi_cmi
from .errors import ConfigError, NonFiniteIntegrand
from .functionals import BUILTINS, estimate, make_builtin
from .kde import MirroredKde, Sample
from .kernels import make_kernel
from .quadrature import default_grid, mc_grid, midpoint_grid
from .synth import TrigDensity, concentration_experiment, rate_experiment

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_REJECT, EXIT_NUMERIC = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc) -> str:
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def read_csv(path: str) -> Sample:
    """Headerless numeric CSV, one observation per row, every value in [0, 1].

    Unreadable or malformed files raise ``OSError``; values outside the unit
    cube raise ``ConfigError`` (they are never clamped).
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise OSError(f"{path}: no data rows")
    width = len(rows[0])
    try:
        arr = np.array([[float(c) for c in r] for r in rows if len(r) == width], dtype=float)
    except ValueError as exc:
        raise OSError(f"{path}: non-numeric entry ({exc})") from exc
    if len(arr) != len(rows):
        raise OSError(f"{path}: rows have differing numbers of columns")
    bad = np.argwhere(~np.isfinite(arr) | (arr < 0.0) | (arr > 1.0))
    if len(bad):
        r, c = bad[0]
        raise ConfigError(f"{path}: value {float(arr[r, c])!r} at row {r + 1}, column {c + 1} is outside [0, 1]")
    return Sample(arr)


def _write(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _validate_common(args) -> None:
    if getattr(args, "delta", None) is not None:
        _check(0.0 < args.delta < 1.0, f"--delta must lie in (0, 1), got {args.delta}")
    if getattr(args, "beta", None) is not None:
        _check(args.beta > 0 and math.isfinite(args.beta), f"--beta must be positive, got {args.beta}")
    if getattr(args, "bandwidth", None) is not None:
        _check(0.0 < args.bandwidth <= 1.0, f"--bandwidth must lie in (0, 1], got {args.bandwidth}")
    if getattr(args, "bandwidth_const", None) is not None:
        _check(args.bandwidth_const > 0, f"--bandwidth-const must be positive, got {args.bandwidth_const}")
    if getattr(args, "grid", None) is not None:
        _check(args.grid >= 1, f"--grid must be >= 1, got {args.grid}")
    if getattr(args, "mc", None) is not None:
        _check(args.mc >= 1, f"--mc must be >= 1, got {args.mc}")
    if getattr(args, "kernel_order", None) is not None:
        _check(args.kernel_order >= 0, f"--kernel-order must be >= 0, got {args.kernel_order}")
    if getattr(args, "C_B", None) is not None:
        _check(args.C_B > 0, f"--C-B must be positive, got {args.C_B}")
    kmin, kmax = getattr(args, "kappa_min", None), getattr(args, "kappa_max", None)
    if kmin is not None or kmax is not None:
        _check(kmin is not None, "--kappa-max given without --kappa-min")
        _check(kmax is not None, "--kappa-min given without --kappa-max")
        _check(0.0 < kmin <= kmax and math.isfinite(kmax),
               f"clip bounds must satisfy 0 < --kappa-min <= --kappa-max (got {kmin}, {kmax})")
    if getattr(args, "alpha", None) is not None:
        _check(args.alpha > 0 and args.alpha != 1.0, f"--alpha must lie in (0,1) or (1,inf), got {args.alpha}")


def _functional(args, dx=None):
    if args.functional not in BUILTINS:
        raise ConfigError(f"--functional must be one of {', '.join(BUILTINS)}")
    spec = make_builtin(args.functional, alpha=args.alpha, dx=dx)
    if spec.needs_box and args.kappa_min is None:
        raise ConfigError(f"--kappa-min (and --kappa-max) are required for {args.functional}: "
                          "its integrand is not Lipschitz without a clip box")
    if args.kappa_min is not None:
        spec = spec.with_box(args.kappa_min, args.kappa_max)
    return spec


def _kernel_order(args, d: int) -> int:
    if args.kernel_order is not None:
        return args.kernel_order
    return bounds.HolderParams(args.beta, d).ell


def _bandwidth(args, n: int, d: int) -> float:
    if args.bandwidth is not None:
        return args.bandwidth
    return bounds.bandwidth(n, args.beta, d, args.bandwidth_const if args.bandwidth_const is not None else 1.0)


def _grid(args, d: int):
    if args.mc is not None:
        return mc_grid(d, args.mc, args.seed)
    if args.grid is not None:
        return midpoint_grid(d, args.grid)
    return default_grid(d, args.seed)


def _config(args, **resolved) -> dict:
    out = {k: v for k, v in vars(args).items() if k not in ("func", "out", "csv")}
    out.update(resolved)
    return out


def _envelope(command: str, config: dict, result) -> dict:
    return {"command": command, "version": __version__, "schema_version": SCHEMA_VERSION,
            "config": config, "result": result}


# ---------------------------------------------------------------------------
# subcommands


def cmd_estimate(args):
    _validate_common(args)
    if args.functional == "shannon-mi":
        _check(args.dx is not None, "--dx is required for shannon-mi")
    spec = _functional(args, dx=args.dx)
    samples = [read_csv(p) for p in args.input]
    if spec.is_mi:
        _check(len(samples) == 1, "shannon-mi takes exactly one --input (the joint sample)")
    else:
        _check(len(samples) == spec.k, f"{spec.name} takes {spec.k} --input file(s), got {len(samples)}")
    d = samples[0].d
    n = min(s.n for s in samples) // (2 if spec.is_mi and args.split else 1)
    order = _kernel_order(args, d)
    h = _bandwidth(args, n, d)
    report = estimate(spec, samples, make_kernel(order), h, _grid(args, d), delta=args.delta, beta=args.beta,
                      C_B=args.C_B, split=args.split, seed=args.seed)
    return _envelope("estimate", _config(args, bandwidth_resolved=h, kernel_order_resolved=order),
                     report.to_dict()), EXIT_OK


def _cmi_common(args):
    _validate_common(args)
    _check(args.kappa_min is not None, "--kappa-min (and --kappa-max) are required: CMI needs a clip box")
    for flag in ("dx", "dy", "dz"):
        _check(getattr(args, flag) >= 1, f"--{flag} must be >= 1")
    data = read_csv(args.input)
    D = args.dx + args.dy + args.dz
    _check(data.d == D, f"{args.input} has {data.d} columns, expected --dx + --dy + --dz = {D}")
    order = _kernel_order(args, D)
    h = _bandwidth(args, data.n // 2, D)
    return data, order, h


def cmd_cmi(args):
    data, order, h = _cmi_common(args)
    report = renyi_cmi(data, args.alpha, args.kappa_min, args.kappa_max, args.dx, args.dy, args.dz,
                       kernel=make_kernel(order), h=h, beta=args.beta, grid_m=args.grid, delta=args.delta,
                       C_B=args.C_B, seed=args.seed, cmi_split=args.cmi_split)
    return _envelope("cmi", _config(args, bandwidth_resolved=h, kernel_order_resolved=order),
                     report.to_dict()), EXIT_OK


def cmd_citest(args):
    data, order, h = _cmi_common(args)
    res = conditional_independence_test(data, args.alpha, args.delta, args.kappa_min, args.kappa_max,
                                        beta=args.beta, mode=args.mode, dx=args.dx, dy=args.dy, dz=args.dz,
                                        C_B=args.C_B, kernel=make_kernel(order), h=h, grid_m=args.grid,
                                        seed=args.seed, cmi_split=args.cmi_split)
    code = EXIT_REJECT if res.rejected else EXIT_OK
    return _envelope("citest", _config(args, bandwidth_resolved=h, kernel_order_resolved=order),
                     res.to_dict()), code


def cmd_bounds(args):
    _validate_common(args)
    _check(args.n >= 1 and args.d >= 1 and args.k >= 1, "--n, --d and --k must be >= 1")
    _check(args.cf > 0, f"--cf must be positive, got {args.cf}")
    params = bounds.HolderParams(args.beta, args.d)
    order = args.kernel_order if args.kernel_order is not None else params.ell
    l1 = args.l1 if args.l1 is not None else make_kernel(order).l1_norm
    _check(l1 > 0, f"--l1 must be positive, got {l1}")
    h = _bandwidth(args, args.n, args.d)
    C_V = bounds.variance_constant(args.cf, [args.d], l1)
    eps = bounds.ci_halfwidth(args.delta, args.n, args.k, C_V)
    bias = bounds.bias_bound(h, params, args.n, args.C_B)
    table = {
        "beta": args.beta, "d": args.d, "n": args.n, "k": args.k, "ell": params.ell, "kernel_order": order,
        "l1_norm": l1, "C_f": args.cf, "C_V": C_V, "C_B": args.C_B, "bandwidth": h, "delta": args.delta,
        "ci_halfwidth": eps, "deviation_probability_at_halfwidth": bounds.deviation_probability(eps, args.n, args.k, C_V),
        "bias_bound": bias, "variance_bound": bounds.variance_bound(C_V, args.n),
        "mse_bound": bounds.mse_bound(C_V, args.C_B, h, params, args.n),
        "target_rate_exponent": -args.beta / (args.beta + args.d),
    }
    return _envelope("bounds", _config(args), table), EXIT_OK


def cmd_kde_check(args):
    _validate_common(args)
    sample = read_csv(args.input)
    order = _kernel_order(args, sample.d)
    h = _bandwidth(args, sample.n, sample.d)
    grid = _grid(args, sample.d)
    vals = MirroredKde(sample, make_kernel(order), h).evaluate_grid(grid)
    result = {"mass": float(grid.weight * np.sum(vals)), "min": float(np.min(vals)), "max": float(np.max(vals)),
              "n": sample.n, "d": sample.d, "bandwidth": h, "kernel_order": order, "grid": grid.describe()}
    return _envelope("kde-check", _config(args), result), EXIT_OK


def _synth_setup(args):
    _validate_common(args)
    _check(args.trials >= 1, "--trials must be >= 1")
    spec = _functional(args, dx=args.dx)
    p = TrigDensity(args.d, args.amplitude, args.boundary_order)
    q = None
    if spec.k == 2 and not spec.is_mi:
        q = TrigDensity(args.d, args.q_amplitude if args.q_amplitude is not None else args.amplitude,
                        args.boundary_order)
    return spec, p, q


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _parse_list(text: str, cast, flag: str):
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{flag}: {exc}") from exc


def cmd_rate(args):
    spec, p, q = _synth_setup(args)
    n_list = _parse_list(args.n_list, int, "--n-list")
    _check(len(n_list) >= 2, "--n-list needs at least two sizes")
    res = rate_experiment(p, spec, n_list, args.trials, args.seed, q=q, beta=args.beta,
                          c=args.bandwidth_const if args.bandwidth_const is not None else 1.0,
                          kernel_order=args.kernel_order, grid_m=args.grid, bootstrap=args.bootstrap)
    if args.csv:
        _write(_csv_text(["n", "mean_error", "slope"],
                         [(r["n"], r["mean_error"], res["slope"]) for r in res["rows"]]), args.csv)
    return _envelope("rate", _config(args), res), EXIT_OK


def cmd_tail(args):
    spec, p, q = _synth_setup(args)
    eps = _parse_list(args.eps, float, "--eps")
    _check(len(eps) >= 1 and all(e >= 0 for e in eps), "--eps needs non-negative values")
    res = concentration_experiment(p, spec, args.n, args.trials, eps, args.seed, q=q, beta=args.beta,
                                   c=args.bandwidth_const if args.bandwidth_const is not None else 1.0,
                                   kernel_order=args.kernel_order, grid_m=args.grid)
    if args.csv:
        _write(_csv_text(["eps", "empirical", "bound"],
                         [(r["eps"], r["empirical"], r["bound"]) for r in res["rows"]]), args.csv)
    return _envelope("tail", _config(args), res), EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_bandwidth(p, beta_default: Optional[float] = 2.0):
    p.add_argument("--beta", type=float, default=beta_default, help="Holder smoothness (default %(default)s)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--bandwidth", type=float, help="explicit bandwidth h in (0, 1]")
    g.add_argument("--bandwidth-const", type=float, help="c in h = c n^(-1/(beta+d)) (default 1)")
    p.add_argument("--kernel-order", type=int, help="kernel order (default ceil(beta) - 1)")


def _add_grid(p, mc: bool = True):
    if mc:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--grid", type=int, help="midpoint points per axis")
        g.add_argument("--mc", type=int, help="Monte-Carlo nodes (seeded by --seed)")
    else:
        p.add_argument("--grid", type=int, help="midpoint points per axis")


def _add_clip(p):
    p.add_argument("--kappa-min", type=float, help="lower clip bound for density estimates")
    p.add_argument("--kappa-max", type=float, help="upper clip bound for density estimates")


def _add_cmi_args(p):
    p.add_argument("--input", required=True, help="CSV with columns x..., y..., z...")
    for flag in ("dx", "dy", "dz"):
        p.add_argument(f"--{flag}", type=int, default=1)
    p.add_argument("--alpha", type=float, required=True)
    _add_clip(p)
    _add_bandwidth(p)
    _add_grid(p, mc=False)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--C-B", dest="C_B", type=float, default=1.0, help="bias constant (default 1)")
    p.add_argument("--seed", type=int, default=0, help="seed for the data split")
    p.add_argument("--cmi-split", choices=("shared", "separate"), default="shared",
                   help="joint KDEs share the joint half, or each gets its own third")
    p.add_argument("--out")


def _add_synth_args(p):
    p.add_argument("--functional", required=True, choices=BUILTINS)
    p.add_argument("--alpha", type=float)
    p.add_argument("--dx", type=int, help="X coordinates (shannon-mi)")
    p.add_argument("--d", type=int, default=1, help="dimension of the test density")
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--q-amplitude", type=float, help="amplitude of the second density (two-sample functionals)")
    p.add_argument("--boundary-order", type=int, default=1)
    _add_clip(p)
    _add_bandwidth(p, beta_default=None)
    _add_grid(p, mc=False)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="write the plot-ready CSV table here")
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="denfunc", description="Plug-in estimation of density functionals on [0,1]^d.")
    parser.add_argument("--version", action="version",
                        version=f"denfunc {__version__} (output schema {SCHEMA_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate a builtin functional from CSV samples")
    p.add_argument("--functional", required=True, choices=BUILTINS)
    p.add_argument("--alpha", type=float)
    p.add_argument("--input", action="append", required=True, help="CSV sample (repeat for two-sample functionals)")
    p.add_argument("--dx", type=int, help="number of leading X columns (shannon-mi)")
    p.add_argument("--split", action="store_true", help="shannon-mi: fit marginals on a disjoint half")
    _add_clip(p)
    _add_bandwidth(p)
    _add_grid(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--C-B", dest="C_B", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("cmi", help="Renyi-alpha conditional mutual information")
    _add_cmi_args(p)
    p.set_defaults(func=cmd_cmi)

    p = sub.add_parser("citest", help="conditional-independence test (exit 3 on rejection)")
    _add_cmi_args(p)
    p.add_argument("--mode", choices=sorted(MODES), default="conc")
    p.set_defaults(func=cmd_citest)

    p = sub.add_parser("bounds", help="print the finite-sample constant table")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--cf", type=float, required=True, help="Lipschitz constant C_f")
    p.add_argument("--l1", type=float, help="kernel 1-norm (default: that of the kernel order)")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--C-B", dest="C_B", type=float, default=1.0)
    _add_bandwidth(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("kde-check", help="mass, min and max of a mirrored KDE over a grid")
    p.add_argument("--input", required=True)
    _add_bandwidth(p)
    _add_grid(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_kde_check)

    p = sub.add_parser("rate", help="error-vs-n experiment on a synthetic density")
    _add_synth_args(p)
    p.add_argument("--n-list", default="500,1000,2000,4000,8000,16000,32000,64000")
    p.add_argument("--bootstrap", type=int, default=200)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("tail", help="empirical deviation tail vs the exponential bound")
    _add_synth_args(p)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--eps", default="0.01,0.02,0.03,0.05,0.08")
    p.set_defaults(func=cmd_tail, trials=200)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        doc, code = args.func(args)
        _write(dumps(doc), args.out)
        return code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"denfunc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteIntegrand as exc:
        detail = {"error": str(exc), "point": exc.point, "context": exc.context}
        print(f"denfunc: numeric failure: {json.dumps(_jsonable(detail), sort_keys=True)}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArithmeticError as exc:
        print(f"denfunc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"denfunc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
