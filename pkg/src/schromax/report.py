"""Result files: delimited tables, fit summaries, and log-log figures."""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__  # noqa: E402
from .scaling import (  # noqa: E402
    TOLERANCES,
    critical_p,
    gamma_conjectured,
    measure_ratio_spread,
    p0,
    p1,
    slope_checks,
    theorem_exponent,
)

RESULT_COLUMNS = [
    "R", "n", "m", "p", "seed",
    "peak", "measure", "lp", "lp_tube", "lp_complement",
    "count", "tube_points", "threshold",
    "pred_amplitude", "pred_amplitude_decimal",
    "pred_measure", "pred_measure_decimal",
    "pred_lp", "pred_lp_decimal",
    "amplitude_ok", "measure_ok", "lp_ok",
]

EXPONENT_COLUMNS = [
    "n", "p0", "p0_decimal", "p1", "p1_decimal", "p1_argmax_m",
    "critical_p", "critical_p_decimal", "ordering",
]

THEOREM_COLUMNS = [
    "n", "m", "p", "p_decimal", "theorem_exponent", "theorem_exponent_decimal",
    "gamma_conjectured", "gamma_conjectured_decimal", "exceeds_conjectured",
]

DEFAULT_P_GRID = ("2", "12/5", "5/2", "8/3", "3", "10/3", "4")


def frac_str(x):
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def dec_str(x):
    return f"{float(x):.15g}"


def num_str(x):
    """Shortest round-trip rendering; stable across runs."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def _flag(v):
    return "" if v is None else ("true" if v else "false")


def header_lines(kind, config_dict):
    lines = [f"# schromax {__version__} {kind}"]
    if "seed" in config_dict:
        lines.append(f"# seed: {config_dict['seed']}")
    lines.append(f"# config: {json.dumps(config_dict, sort_keys=True)}")
    return lines


def results_csv(result, config_dict):
    """results.csv text: reproducibility header, then one row per R."""
    checks = slope_checks(result.fits, result.predictions)
    pred = result.predictions
    buf = io.StringIO()
    for line in header_lines("ladder", config_dict):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in result.records:
        w.writerow([
            num_str(r.R), r.n, r.m, frac_str(r.p), r.seed,
            num_str(r.peak), num_str(r.measure), num_str(r.lp),
            num_str(r.lp_tube), num_str(r.lp_complement),
            r.count, r.tube_points, num_str(r.threshold),
            frac_str(pred.amplitude), dec_str(pred.amplitude),
            frac_str(pred.measure), dec_str(pred.measure),
            frac_str(pred.lp), dec_str(pred.lp),
            _flag(checks["amplitude"]), _flag(checks["measure"]), _flag(checks["lp"]),
        ])
    return buf.getvalue()


def fits_document(result, config_dict, n, m):
    checks = slope_checks(result.fits, result.predictions)
    fits = {}
    for key, fit in result.fits.items():
        pred = getattr(result.predictions, key)
        entry = {
            "predicted": frac_str(pred),
            "predicted_decimal": float(pred),
            "tolerance": TOLERANCES[key],
            "one_sided": key == "lp",
        }
        if fit is None:
            entry.update(status="insufficient points", count=len(result.records), passed=None)
        else:
            entry.update(
                status="ok",
                slope=fit.slope,
                intercept=fit.intercept,
                max_residual=fit.max_residual,
                count=fit.count,
                passed=bool(checks[key]),
            )
        fits[key] = entry
    spread = measure_ratio_spread(result.records, n, m)
    return {
        "config": config_dict,
        "seed": config_dict.get("seed"),
        "fits": fits,
        "measure_ratio_spread": None if math.isnan(spread) else spread,
        "wall_time_seconds": {num_str(r.R): r.wall_time for r in result.records},
    }


def plot_ladder(result, path, config_dict):
    """Three log-log panels (peak, |E|, Lp) with fitted and predicted slopes."""
    panels = [
        ("amplitude", "peak", "peak on E / ||f||"),
        ("measure", "measure", "|E|"),
        ("lp", "lp", "Lp norm / ||f||"),
    ]
    Rs = [r.R for r in result.records]
    with plt.rc_context({"svg.hashsalt": "schromax", "svg.fonttype": "path"}):
        fig, axes = plt.subplots(1, 3, figsize=(12, 3.8))
        for ax, (key, attr, label) in zip(axes, panels):
            vals = [getattr(r, attr) for r in result.records]
            ax.loglog(Rs, vals, "o", color="k", label="measured")
            fit = result.fits.get(key)
            pred = float(getattr(result.predictions, key))
            if fit is not None:
                line = [math.exp(fit.intercept) * R ** fit.slope for R in Rs]
                ax.loglog(Rs, line, "-", color="C0", label=f"fit slope {fit.slope:.3f}")
                anchor = math.exp(fit.intercept) * Rs[0] ** fit.slope
                ref = [anchor * (R / Rs[0]) ** pred for R in Rs]
                ax.loglog(Rs, ref, "--", color="C3", label=f"predicted {pred:.3f}")
            ax.set_xlabel("R")
            ax.set_title(label)
            ax.legend(fontsize=8, frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg",
                    metadata={"Date": None, "Description": json.dumps(config_dict, sort_keys=True)})
        plt.close(fig)


def exponent_rows(n_max):
    rows = []
    for n in range(3, n_max + 1):
        a = p0(n)
        b, arg = p1(n)
        c = critical_p(n)
        rows.append([n, frac_str(a), dec_str(a), frac_str(b), dec_str(b), arg,
                     frac_str(c), dec_str(c), "true" if a < c < b else "false"])
    return rows


def theorem_rows(n_max, p_grid=DEFAULT_P_GRID):
    rows = []
    for n in range(3, n_max + 1):
        for ps in p_grid:
            p = Fraction(ps)
            g = gamma_conjectured(n, p)
            for m in range(1, n + 1):
                e = theorem_exponent(n, m, p)
                rows.append([n, m, frac_str(p), dec_str(p), frac_str(e), dec_str(e),
                             frac_str(g), dec_str(g), "true" if e > g else "false"])
    return rows


def table_csv(kind, columns, rows, config_dict):
    buf = io.StringIO()
    for line in header_lines(kind, config_dict):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()
