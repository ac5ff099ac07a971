"""Command-line interface: ``cureinv <command> [options]``.

Commands
--------
fit         estimate the incidence parameter and write a JSON report
curves      phi, censoring and latency survival on an x-grid (CSV)
quantiles   latency quantiles on an x-grid (CSV)
bootstrap   fit plus naive-bootstrap variance and percentile intervals (JSON)
simulate    draw a sample from the simulation design (CSV)
mc-table    Monte-Carlo bias/MSE table (CSV, optional JSON with draws)

Exit codes: 0 success, 1 input error, 2 non-convergence, 3 internal error.
"""

import argparse
import io
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import design, load_csv, simulate, write_csv
from .exceptions import (
    BootstrapUnstable,
    CsvFormatError,
    EmptyNeighborhood,
    NewtonDivergence,
    NoFeasibleBandwidth,
    SeparationError,
)
from .inversion import censoring_survival, latency_quantile, latency_survival
from .kernels import estimate_subdistributions
from .likelihood import LOGISTIC, ParamBox, fit
from .resampling import BandwidthRule, McCell, bootstrap, run_mc

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGENCE, EXIT_INTERNAL = 0, 1, 2, 3
SCHEMA_ID = "cureinv-report"
SCHEMA_VERSION = "1.0"

log = logging.getLogger("cureinv")


class InputError(Exception):
    """Bad command-line input (maps to exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which here means non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _grid(text):
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got {text!r}") from None
    if not step > 0 or b < a:
        raise argparse.ArgumentTypeError("x-grid needs step > 0 and a <= b")
    count = int(np.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(count), 12)


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _box(text):
    vals = _floats(text)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise argparse.ArgumentTypeError("--box expects 'lo,hi' with lo < hi")
    return ParamBox((vals[0], vals[0]), (vals[1], vals[1]))


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="output file (default: standard output)")
    common.add_argument("--seed", type=_seed, help="64-bit random seed")
    common.add_argument("--box", type=_box, default=ParamBox(), help="parameter box 'lo,hi' (default -10,10)")
    common.add_argument("--restarts", type=int, default=3, help="perturbed Nelder-Mead restarts")
    common.add_argument("--threads", type=int, default=1, help="worker processes for resampling")
    common.add_argument("--verbose", "-v", action="store_true")
    bw = common.add_mutually_exclusive_group()
    bw.add_argument("--bandwidth-c", type=float, help="bandwidth constant c in h = c n^(-2/7) (default 3)")
    bw.add_argument("--bandwidth", type=float, help="explicit bandwidth h")
    bw.add_argument("--cv", action="store_true", help="cross-validated bandwidth")

    inp = argparse.ArgumentParser(add_help=False)
    inp.add_argument("--input", "-i", required=True, help="CSV with columns time,status,x")

    parser = _Parser(prog="cureinv", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("fit", parents=[common, inp], help="fit the model (JSON report)")

    p = sub.add_parser("curves", parents=[common, inp], help="fitted curves on an x-grid (CSV)")
    p.add_argument("--x-grid", type=_grid, default=_grid("-0.75:0.75:0.25"))
    p.add_argument("--fit-report", help="reuse beta_hat from a previous fit JSON report")

    p = sub.add_parser("quantiles", parents=[common, inp], help="latency quantiles (CSV)")
    p.add_argument("--x-grid", type=_grid, default=_grid("0.25:0.25:1"))
    p.add_argument("--quantiles", type=_floats, default=[0.25, 0.5, 0.75])
    p.add_argument("--fit-report", help="reuse beta_hat from a previous fit JSON report")

    p = sub.add_parser("bootstrap", parents=[common, inp], help="bootstrap variance (JSON)")
    p.add_argument("--boot-b", type=int, default=250, help="number of resamples")
    p.add_argument("--alpha", type=float, default=0.05, help="percentile interval level")

    p = sub.add_parser("simulate", parents=[common], help="simulate a dataset (CSV)")
    p.add_argument("--n", type=int, default=150)
    p.add_argument("--cure-rate", type=float, choices=(0.2, 0.3), default=0.2)
    p.add_argument("--gamma2", type=float, default=0.0)
    p.add_argument("--truncation", choices=("atom", "cure"), default="atom")

    p = sub.add_parser("mc-table", parents=[common], help="Monte-Carlo bias/MSE table (CSV)")
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--n", type=_floats, default=[150.0], help="sample sizes, comma-separated")
    p.add_argument("--gamma2", type=_floats, default=[0.0], help="gamma2 values, comma-separated")
    p.add_argument("--cure-rate", type=float, choices=(0.2, 0.3), default=0.2)
    p.add_argument("--json-output", help="also write the JSON report with replicate draws")
    return parser


def _rule(args):
    if args.cv:
        return BandwidthRule("cv")
    if args.bandwidth is not None:
        if not args.bandwidth > 0:
            raise InputError("--bandwidth must be positive")
        return BandwidthRule("h", args.bandwidth)
    c = 3.0 if args.bandwidth_c is None else args.bandwidth_c
    if not c > 0:
        raise InputError("--bandwidth-c must be positive")
    return BandwidthRule("c", c)


def _require_seed(args):
    if args.seed is None:
        raise InputError(f"--seed is required for {args.command}")


def _timestamp():
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def _report(command, **body):
    out = {
        "schema": SCHEMA_ID,
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "version": __version__,
        "timestamp": _timestamp(),
    }
    out.update(body)
    return out


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def _emit_json(obj, path):
    _emit(json.dumps(obj, indent=2) + "\n", path)


def _csv_text(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if not np.isfinite(v) else format(float(v), ".12g")
    return str(v)


def _bandwidth_block(rule, spec):
    return {"rule": rule.kind, "value": None if rule.kind == "cv" else rule.value,
            "h": spec.bandwidth, "kernel": spec.family}


def _fit_data(args, data):
    rule = _rule(args)
    spec = rule.resolve(data)
    res = fit(data, spec, LOGISTIC, args.box, restarts=args.restarts, seed=args.seed or 0)
    return rule, spec, res


def _beta_from_report(path):
    try:
        report = json.loads(Path(path).read_text(encoding="utf-8"))
        beta = np.asarray(report["beta_hat"], dtype=float)
    except FileNotFoundError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a fit report with beta_hat ({exc})") from None
    if beta.shape != (2,):
        raise InputError(f"{path}: beta_hat must have two entries")
    return beta


def cmd_fit(args):
    data = load_csv(args.input)
    rule, spec, res = _fit_data(args, data)
    body = res.to_dict()
    body.pop("bandwidth")
    report = _report(
        "fit",
        input=str(args.input),
        n=data.n,
        events=int(data.status.sum()),
        bandwidth=_bandwidth_block(rule, spec),
        box={"lower": list(args.box.lower), "upper": list(args.box.upper)},
        **body,
    )
    _emit_json(report, args.output)
    if not res.converged:
        print("warning: Nelder-Mead did not converge", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _beta_for(args, data):
    if getattr(args, "fit_report", None):
        rule = _rule(args)
        return _beta_from_report(args.fit_report), rule.resolve(data), True
    _, spec, res = _fit_data(args, data)
    return res.beta_hat, spec, res.converged


def cmd_curves(args):
    data = load_csv(args.input)
    beta, spec, converged = _beta_for(args, data)
    times = np.unique(data.time)
    rows = []
    for x in args.x_grid:
        phi = float(LOGISTIC(x, beta))
        try:
            H0, H1 = estimate_subdistributions(data, x, spec)
        except EmptyNeighborhood:
            rows.append((x, np.nan, phi, np.nan, np.nan, "empty_neighborhood"))
            continue
        fc = censoring_survival(H0, H1, times)
        ft = latency_survival(H0, H1, phi, times)
        rows.extend((x, t, phi, c, f, "ok") for t, c, f in zip(times, fc, ft))
    header = ("x", "t", "phi_hat", "F_C_tail", "F_T0_tail", "status")
    _emit(_csv_text(header, rows), args.output)
    return EXIT_OK if converged else EXIT_NONCONVERGENCE


def cmd_quantiles(args):
    data = load_csv(args.input)
    for p in args.quantiles:
        if not 0.0 < p < 1.0:
            raise InputError(f"quantile levels must lie in (0, 1), got {p}")
    beta, spec, converged = _beta_for(args, data)
    rows = []
    for x in args.x_grid:
        phi = float(LOGISTIC(x, beta))
        try:
            H0, H1 = estimate_subdistributions(data, x, spec)
        except EmptyNeighborhood:
            rows.extend((x, p, phi, np.nan, 1, "empty_neighborhood") for p in args.quantiles)
            continue
        for p in args.quantiles:
            q = latency_quantile(H0, H1, phi, p)
            rows.append((x, p, phi, q.value, q.defective, "ok"))
    header = ("x", "p", "phi_hat", "quantile", "defective", "status")
    _emit(_csv_text(header, rows), args.output)
    return EXIT_OK if converged else EXIT_NONCONVERGENCE


def cmd_bootstrap(args):
    _require_seed(args)
    if args.boot_b < 2:
        raise InputError("--boot-b must be at least 2")
    data = load_csv(args.input)
    rule, spec, res = _fit_data(args, data)
    boot = bootstrap(
        data, spec, LOGISTIC, args.box, B=args.boot_b, seed=args.seed,
        rule=rule if rule.kind == "cv" else None, alpha=args.alpha,
        n_jobs=args.threads, restarts=args.restarts,
    )
    report = _report(
        "bootstrap",
        input=str(args.input),
        n=data.n,
        seed=args.seed,
        bandwidth=_bandwidth_block(rule, spec),
        beta_hat=[float(b) for b in res.beta_hat],
        loglik=float(res.loglik),
        converged=bool(res.converged),
        bootstrap=boot.to_dict(),
    )
    _emit_json(report, args.output)
    return EXIT_OK if res.converged else EXIT_NONCONVERGENCE


def cmd_simulate(args):
    _require_seed(args)
    if args.n < 2:
        raise InputError("--n must be at least 2")
    cfg = design(args.cure_rate, args.gamma2, args.n, args.seed, args.truncation)
    data = simulate(cfg)
    buf = io.StringIO()
    write_csv(data, buf)
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_mc_table(args):
    _require_seed(args)
    if args.reps < 1:
        raise InputError("--reps must be at least 1")
    rule = _rule(args)
    grid = [McCell(args.cure_rate, g, int(n), rule) for n in args.n for g in args.gamma2]
    report = run_mc(grid, args.reps, seed=args.seed, box=args.box,
                    n_jobs=args.threads, restarts=args.restarts)
    buf = io.StringIO()
    report.to_csv(buf)
    _emit(buf.getvalue(), args.output)
    if args.json_output:
        _emit_json(_report("mc-table", **report.to_dict()), args.json_output)
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "curves": cmd_curves,
    "quantiles": cmd_quantiles,
    "bootstrap": cmd_bootstrap,
    "simulate": cmd_simulate,
    "mc-table": cmd_mc_table,
}

INPUT_ERRORS = (
    InputError,
    FileNotFoundError,
    CsvFormatError,
    EmptyNeighborhood,
    NoFeasibleBandwidth,
    SeparationError,
)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BootstrapUnstable, NewtonDivergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit 3
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
