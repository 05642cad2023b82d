"""Command-line entry point: ``verify``, ``ladder`` and ``exponents``.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .config import RunConfig
from .errors import GridFormatError, InvalidArgument

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

WINDOW_NOTE = (
    "Only the adapted window t = -x1/(2R) +- c_win R^(-3/2) inside (0, 1/R] is scanned at "
    "each point, not the whole interval; every reported maximal value is therefore a lower "
    "bound for the true supremum."
)


def _prepare_out(path):
    """Create ``path`` and prove it is writable before any computation."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    with open(probe, "w", encoding="utf-8") as fh:
        fh.write("")
    probe.unlink()
    return out


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_ladder(config, plot=True, log=None):
    """Run the ladder and write results.csv, fits.json and plot.svg; returns an exit code.

    On a per-R failure the finished rows are still written before the error
    propagates as ``LadderError``.
    """
    from . import report
    from .scaling import LadderError, LadderResult, ladder_exponent_predictions, run_ladder, \
        slope_checks, as_rational

    config.validate()
    out = _prepare_out(config.out)
    cfg = config.to_dict()
    try:
        result = run_ladder(config)
    except LadderError as exc:
        pred = ladder_exponent_predictions(config.n, config.m, as_rational(config.p))
        partial = LadderResult(exc.records, {"amplitude": None, "measure": None, "lp": None}, pred)
        _write(out / "results.csv", report.results_csv(partial, cfg))
        raise

    _write(out / "results.csv", report.results_csv(result, cfg))
    doc = report.fits_document(result, cfg, config.n, config.m)
    _write(out / "fits.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if plot:
        report.plot_ladder(result, out / "plot.svg", cfg)
    checks = slope_checks(result.fits, result.predictions)
    if log:
        for rec in result.records:
            log(f"R={rec.R:g}  peak={rec.peak:.6g}  |E|={rec.measure:.6g}  Lp={rec.lp:.6g}")
        for key, fit in result.fits.items():
            pred = float(getattr(result.predictions, key))
            if fit is None:
                log(f"{key:>9}: insufficient points for a fit")
            else:
                flag = "ok" if checks[key] else "OUT OF TOLERANCE"
                log(f"{key:>9}: slope {fit.slope:+.4f}  predicted {pred:+.4f}  {flag}")
        names = ["results.csv", "fits.json"] + (["plot.svg"] if plot else [])
        log("wrote " + ", ".join(str(out / name) for name in names))
    return EXIT_FAIL if any(v is False for v in checks.values()) else EXIT_OK


def cmd_exponents(n_max, out_dir, p_grid=None):
    from . import report

    if n_max < 3:
        raise InvalidArgument(f"--n-max must be >= 3, got {n_max}")
    out = _prepare_out(out_dir)
    p_grid = tuple(p_grid) if p_grid else report.DEFAULT_P_GRID
    cfg = {"n_max": n_max, "p_grid": list(p_grid), "out": str(out_dir)}
    _write(out / "exponents.csv",
           report.table_csv("exponents", report.EXPONENT_COLUMNS, report.exponent_rows(n_max), cfg))
    _write(out / "theorem_exponents.csv",
           report.table_csv("theorem-exponents", report.THEOREM_COLUMNS,
                            report.theorem_rows(n_max, p_grid), cfg))
    return EXIT_OK


def cmd_verify(out_dir=None, ids=None, fault=None, log=print):
    """Run the acceptance checks; exit 0 iff all pass. Writes verify_report.json."""
    from . import verify
    from .propagator import perturbed_rule

    out = _prepare_out(out_dir) if out_dir else None
    start = time.perf_counter()
    if fault == "chirp":
        with perturbed_rule():
            results = verify.run_checks(ids, log=log)
    else:
        results = verify.run_checks(ids, log=log)
    doc = verify.report(results, time.perf_counter() - start, fault)
    if out is not None:
        _write(out / "verify_report.json", json.dumps(doc, indent=2) + "\n")
    failed = [r.id for r in results if not r.passed]
    if log:
        log(f"{len(results) - len(failed)}/{len(results)} checks passed"
            + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_FAIL if failed else EXIT_OK


def _parse_R(text):
    vals = []
    for tok in text.replace(",", " ").split():
        if "^" in tok:
            base, exp = tok.split("^", 1)
            vals.append(float(base) ** float(exp))
        else:
            vals.append(float(tok))
    return vals


def build_parser():
    parser = argparse.ArgumentParser(
        prog="schromax",
        description="Lower-bound experiments for the Schrodinger maximal function.",
        epilog=WINDOW_NOTE,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-R progress")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run acceptance checks A1-A9", epilog=WINDOW_NOTE)
    v.add_argument("--out", default="verify_out", help="directory for verify_report.json")
    v.add_argument("--only", help="comma-separated check ids, e.g. A1,A7")
    v.add_argument("--inject-fault", choices=["chirp"], help=argparse.SUPPRESS)

    lad = sub.add_parser("ladder", help="run an R-ladder and fit growth exponents",
                         description=WINDOW_NOTE)
    lad.add_argument("--config", help="JSON RunConfig file; flags override its values")
    lad.add_argument("--n", type=int)
    lad.add_argument("--m", type=int)
    lad.add_argument("--p", help='Lebesgue exponent as a rational, e.g. "2" or "5/2"')
    lad.add_argument("--R", dest="ladder", type=_parse_R,
                     help='ladder of scales, e.g. "256,1024" or "2^8,2^10"')
    lad.add_argument("--seed", type=int)
    lad.add_argument("--out")
    lad.add_argument("--fhat", help="GridExample JSON for f0 ({R} is replaced per scale)")
    lad.add_argument("--mc-points", dest="mc_points", type=int)
    lad.add_argument("--c-win", dest="c_win", type=float)
    lad.add_argument("--n-t", dest="n_t", type=int)
    lad.add_argument("--no-plot", action="store_true")

    ex = sub.add_parser("exponents", help="exact exponent tables")
    ex.add_argument("--n-max", dest="n_max", type=int, required=True)
    ex.add_argument("--out", default="exponents_out")
    ex.add_argument("--p-grid", help='comma-separated rationals, e.g. "2,5/2,3"')
    return parser


_OVERRIDES = ("n", "m", "p", "ladder", "seed", "out", "fhat", "mc_points", "c_win", "n_t")


def config_from_args(args):
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise InvalidArgument("config file must hold a JSON object")
    config = RunConfig.from_dict(data)
    for name in _OVERRIDES:
        val = getattr(args, name)
        if val is not None:
            setattr(config, name, val)
    return config.validate()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return _dispatch(args)
    except Exception as exc:  # unwrap ladder failures so bad input keeps its exit code
        cause = getattr(exc, "cause", None)
        code = _exit_code(cause) if cause is not None else None
        if code is None:
            code = _exit_code(exc)
        if code is None:
            raise
        kind = {EXIT_USAGE: "error: ", EXIT_IO: "I/O error: "}.get(code, "")
        print(f"schromax: {kind}{exc}", file=sys.stderr)
        return code


def _exit_code(exc):
    if isinstance(exc, (InvalidArgument, GridFormatError, json.JSONDecodeError)):
        return EXIT_USAGE
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, RuntimeError):
        return EXIT_FAIL
    return None


def _dispatch(args):
    if args.command == "verify":
        ids = set(args.only.split(",")) if args.only else None
        return cmd_verify(args.out, ids=ids, fault=args.inject_fault)
    if args.command == "ladder":
        config = config_from_args(args)
        return cmd_ladder(config, plot=not args.no_plot, log=print)
    grid = args.p_grid.split(",") if args.p_grid else None
    return cmd_exponents(args.n_max, args.out, grid)


if __name__ == "__main__":
    sys.exit(main())
