"""Command-line interface: ``sphcov <command> [options]``.

Commands follow the analysis order: ``preprocess`` (impute, remove the
spherical-harmonic mean, taper), ``fit``, ``loglik``, ``diagnose``, plus
``simulate``, ``mean-fit`` and ``model-info``.

Exit status: 0 success, 2 usage, 3 input format, 4 parameter or constraint,
5 optimizer did not converge (report still written), 6 numerical failure,
1 anything else.  Failures print one line ``error[<Class>]: <message>``.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .covmodel import PUBLISHED_COUNTS, count_discrepancy, param_count
from .diagnostics import (DIRECTIONS, PROFILE_KINDS, dir_variogram_table, empirical_profile,
                          fitted_profile)
from .errors import ConvergenceError, FormatError, IndefiniteBlockError, ParameterError
from .fitting import fit_mle
from .io import (format_model, parse_grid, parse_model, read_field, read_kv, read_params,
                 write_field, write_fit_report, write_kv, write_params)
from .meanfield import RankDeficiencyError, fit_mean, sh_columns
from .prep import impute_missing, taper_field
from .spectral import MissingDataError, loglik_dense, loglik_fft, simulate_grid

THREADS_ENV = "SPHCOV_THREADS"

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_FORMAT, EXIT_PARAM, EXIT_CONVERGENCE, EXIT_NUMERIC = \
    0, 1, 2, 3, 4, 5, 6


class UsageError(Exception):
    pass


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, (FormatError, MissingDataError, OSError)):
        return EXIT_FORMAT
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, (IndefiniteBlockError, RankDeficiencyError, np.linalg.LinAlgError,
                        ArithmeticError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ParameterError, ValueError)):
        return EXIT_PARAM
    return EXIT_ERROR


def _model_arg(value: str):
    try:
        return parse_model(value)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _names_arg(value: str) -> list[str]:
    return [s.strip() for s in value.split(",") if s.strip()]


def _write_table(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    def cell(v):
        if isinstance(v, float):
            return "NA" if not np.isfinite(v) else "%.17g" % v
        return str(v)
    text = "\t".join(header) + "\n" + "".join("\t".join(cell(v) for v in r) + "\n" for r in rows)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    spec, params = read_params(args.params, args.model)
    fields = simulate_grid(spec, params, args.grid, args.seed, args.reps)
    out = Path(args.out)
    if args.reps == 1:
        write_field(out, fields[0])
    else:
        width = len(str(args.reps - 1))
        for k, f in enumerate(fields):
            write_field(out.with_name(f"{out.stem}_{k:0{width}d}{out.suffix}"), f)
    return EXIT_OK


def _load_fit_params(args):
    source = args.params or args.fit
    if source is None:
        raise UsageError("need --params or --fit")
    return read_params(source, args.model)


def cmd_loglik(args) -> int:
    spec, params = _load_fit_params(args)
    field = read_field(args.data)
    fn = loglik_dense if args.dense else loglik_fft
    print("%.17g" % fn(field, spec, params))
    return EXIT_OK


def cmd_fit(args) -> int:
    field = read_field(args.data)
    spec = args.model
    if args.init == "auto":
        init = None
        fixed = args.fixed or []
        if fixed:
            raise UsageError("--fixed needs explicit starting values (--init FILE)")
    else:
        spec, init = read_params(args.init, spec)
        fixed = sorted(set(init.fixed) | set(args.fixed or []))
    if spec is None:
        raise UsageError("--model is required with --init auto")
    result = fit_mle(field, spec, init, fixed=fixed, restarts=args.restarts, seed=args.seed)
    write_fit_report(args.out, result)
    if not result.converged:
        raise ConvergenceError(f"optimizer stopped after {result.iterations} iterations "
                               f"without meeting the tolerance; report written to {args.out}")
    return EXIT_OK


def cmd_mean_fit(args) -> int:
    field = read_field(args.data)
    model, fitted, residual = fit_mean(field, args.degree, area_weighted=args.area_weighted)
    if args.residual:
        write_field(args.residual, residual)
    if args.fitted:
        write_field(args.fitted, fitted)
    if args.coeffs:
        items: dict[str, object] = {"degree": model.degree, "convention": model.convention}
        for (n, m, part), c in zip(sh_columns(model.degree), model.coeffs):
            items[f"{part}_{n}_{m}"] = float(c)
        write_kv(args.coeffs, items)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    field = read_field(args.data)
    if not args.no_impute:
        if not field.complete:
            field = impute_missing(field)
    if args.degree >= 0:
        _, _, field = fit_mean(field, args.degree, area_weighted=args.area_weighted)
    if args.taper > 0:
        field = taper_field(field, args.taper)
    write_field(args.out, field)
    return EXIT_OK


def _fit_models(paths):
    models = {}
    for item in paths or []:
        label, _, path = item.rpartition("=")
        spec, params = read_params(path)
        models[label or format_model(spec)] = (spec, params)
    return models


def cmd_diagnose(args) -> int:
    field = read_field(args.data)
    models = _fit_models(args.fit)
    labels = list(models)
    if args.which == "dirvario":
        if args.lat_index is None:
            raise UsageError("--which dirvario needs --lat-index")
        rows = dir_variogram_table(field, models, args.lat_index)
        table = [[r.direction, r.latitude, r.empirical] + [r.fitted[l] for l in labels]
                 for r in rows]
        _write_table(args.out, ["direction", "latitude", "empirical"] + labels, table)
        return EXIT_OK
    emp = empirical_profile(field, args.which)
    fitted = [] if args.which == "var_by_lon" else \
        [fitted_profile(s, p, field.grid, args.which).fitted for s, p in models.values()]
    axis_name = "longitude" if args.which == "var_by_lon" else "latitude"
    header = [axis_name, "empirical"] + ([] if args.which == "var_by_lon" else labels)
    table = [[float(a), float(e)] + [float(f[k]) for f in fitted]
             for k, (a, e) in enumerate(zip(emp.axis, emp.empirical))]
    _write_table(args.out, header, table)
    return EXIT_OK


def cmd_model_info(args) -> int:
    spec = args.model
    m, n1, n2, n3 = spec.orders
    fmt = lambda v: "-" if v is None else str(v)
    print(f"model\t{format_model(spec)}")
    print(f"orders\tm={m} n1={fmt(n1)} n2={fmt(n2)} n3={fmt(n3)}")
    print(f"param_count\t{param_count(spec)}")
    print(f"parameters\t{','.join(spec.param_names())}")
    if spec.letter in PUBLISHED_COUNTS:
        print(f"published_count\t{PUBLISHED_COUNTS[spec.letter]}")
    note = count_discrepancy(spec)
    print(f"count_flag\t{'mismatch' if note else 'ok'}")
    if note:
        print(f"note\t{note}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sphcov", description="Nonstationary covariance models on the sphere.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--threads", type=int, default=None,
                   help=f"cap on numerical threads (default: ${THREADS_ENV} or library default)")
    p.add_argument("--config", default=None, help="name = value file of option defaults")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="draw exact Gaussian fields on a grid")
    s.add_argument("--model", type=_model_arg)
    s.add_argument("--params", required=True)
    s.add_argument("--grid", type=parse_grid, required=True, help="MxN:lat_min:lat_max")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="maximum likelihood fit")
    s.add_argument("--model", type=_model_arg)
    s.add_argument("--data", required=True)
    s.add_argument("--init", default="auto", help="'auto' or a parameter file")
    s.add_argument("--fixed", type=_names_arg, default=None)
    s.add_argument("--restarts", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("loglik", help="evaluate the exact log-likelihood")
    s.add_argument("--model", type=_model_arg)
    s.add_argument("--data", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--params")
    g.add_argument("--fit")
    s.add_argument("--dense", action="store_true", help="use the explicit covariance matrix")
    s.set_defaults(func=cmd_loglik)

    s = sub.add_parser("mean-fit", help="spherical-harmonic regression of the mean")
    s.add_argument("--data", required=True)
    s.add_argument("--degree", type=int, default=12)
    s.add_argument("--area-weighted", action="store_true")
    s.add_argument("--residual")
    s.add_argument("--fitted")
    s.add_argument("--coeffs")
    s.set_defaults(func=cmd_mean_fit)

    s = sub.add_parser("preprocess", help="impute, remove the mean and taper")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--no-impute", action="store_true")
    s.add_argument("--degree", type=int, default=12, help="mean degree; negative skips removal")
    s.add_argument("--area-weighted", action="store_true")
    s.add_argument("--taper", type=float, default=0.05, help="per-end taper fraction")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("diagnose", help="empirical and fitted summary tables")
    s.add_argument("--data", required=True)
    s.add_argument("--fit", action="append", help="[label=]fit report; repeatable")
    s.add_argument("--which", required=True, choices=list(PROFILE_KINDS) + ["dirvario"])
    s.add_argument("--lat-index", type=int)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("model-info", help="orders and parameter count of a model")
    s.add_argument("--model", type=_model_arg, required=True)
    s.set_defaults(func=cmd_model_info)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    kv = read_kv(known.config)
    command = next((a for a in rest if not a.startswith("-")), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub = subparsers.choices.get(command)
    if sub is None:
        raise UsageError("--config needs a command")
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "func")}
    defaults = {}
    for key, raw in kv.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            raise UsageError(f"config key {key!r} is not an option of {command!r}")
        act = actions[dest]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[dest] = raw.strip().lower() in ("1", "true", "yes", "on")
        elif act.type is not None:
            try:
                defaults[dest] = act.type(raw)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
        else:
            defaults[dest] = raw
        act.required = False
    sub.set_defaults(**defaults)


def _thread_limit(requested: int | None):
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise UsageError(f"${THREADS_ENV} must be an integer") from None
    if requested is None:
        return None
    if requested < 1:
        raise UsageError("--threads must be >= 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=requested)


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Run one command; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        limiter = _thread_limit(args.threads)
        try:
            return args.func(args)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - every failure maps to an exit status
        msg = " ".join(str(exc).split()) or exc.__class__.__name__
        print(f"error[{exc.__class__.__name__}]: {msg}", file=sys.stderr)
        return _exit_code(exc)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
