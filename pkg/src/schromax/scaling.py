"""Exact exponent calculators, the R-ladder experiment, and log-log fits.

Exponent arithmetic uses ``fractions.Fraction`` throughout: numerators and
denominators are Python integers, so nothing rounds or wraps.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidArgument
from .examples import ExampleParams, build_f1, load_grid_example, m1_example, norm, tensor
from .maximal import (
    SamplerSpec,
    TubeGrid,
    exceptional_set,
    lp_norm_maximal,
    scan_tube,
    threshold_for,
)

log = logging.getLogger(__name__)

Rational = Fraction

HALF = Fraction(1, 2)


def as_rational(p):
    """Accept Fraction, int, or strings such as "5/2" or "2.5"."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        raise InvalidArgument("pass exponents as exact strings or integers, not floats")
    try:
        return Fraction(p)
    except (ValueError, ZeroDivisionError, TypeError):
        raise InvalidArgument(f"cannot read {p!r} as a rational number") from None


def _check_nmp(n, m, p):
    if not 1 <= m <= n:
        raise InvalidArgument(f"need 1 <= m <= n, got m={m}, n={n}")
    if p < 1:
        raise InvalidArgument(f"need p >= 1, got {p}")


def theorem_exponent(n, m, p):
    """(n + m)/2 (1/p - 1/2) + m / (2(m + 1)), exactly."""
    p = as_rational(p)
    _check_nmp(n, m, p)
    return Fraction(n + m, 2) * (1 / p - HALF) + Fraction(m, 2 * (m + 1))


@dataclass(frozen=True)
class LadderPredictions:
    amplitude: Fraction
    measure: Fraction
    lp: Fraction


def ladder_exponent_predictions(n, m, p):
    """Exponents of R for the peak amplitude, |E|, and the Lp norm on B^n(0,1)."""
    p = as_rational(p)
    _check_nmp(n, m, p)
    base = Fraction(m, 2 * (m + 1))
    return LadderPredictions(
        amplitude=base + Fraction(n - m, 4),
        measure=Fraction(-(n - m), 2),
        lp=Fraction(m - n, 2) * (1 / p - HALF) + base,
    )


def gamma_conjectured(n, p):
    """max{n (1/p - n/(2(n+1))), 0}, exactly."""
    p = as_rational(p)
    if n < 1 or p < 1:
        raise InvalidArgument("need n >= 1 and p >= 1")
    return max(n * (1 / p - Fraction(n, 2 * (n + 1))), Fraction(0))


def p0(n):
    """2 + 4 / ((n - 1)(n + 2))."""
    if n < 2:
        raise InvalidArgument(f"p0 needs n >= 2, got {n}")
    return 2 + Fraction(4, (n - 1) * (n + 2))


def p1(n):
    """max over 1 <= m <= n of 2 + 4 / (n - 1 + m + n/m); ties go to the smallest m."""
    if n < 1:
        raise InvalidArgument(f"p1 needs n >= 1, got {n}")
    best, arg = None, None
    for m in range(1, n + 1):
        val = 2 + 4 / (n - 1 + m + Fraction(n, m))
        if best is None or val > best:
            best, arg = val, m
    return best, arg


def critical_p(n):
    return Fraction(2 * (n + 1), n)


# --- regression -------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    max_residual: float
    count: int


def fit_exponent(points):
    """Least-squares line through (log R, log value); natural logs."""
    points = list(points)
    if len(points) < 2:
        raise InvalidArgument(f"fit needs at least 2 points, got {len(points)}")
    Rs = [float(r) for r, _ in points]
    if len(set(Rs)) != len(Rs):
        raise InvalidArgument("R values must be distinct")
    for r, v in points:
        if not v > 0:
            raise InvalidArgument(f"value at R={r} must be positive, got {v}")
    x = np.log(np.array(Rs))
    y = np.log(np.array([float(v) for _, v in points]))
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return FitResult(float(slope), float(intercept), float(np.max(np.abs(resid))), len(points))


# --- ladder -----------------------------------------------------------------

@dataclass(frozen=True)
class LadderRecord:
    R: float
    peak: float
    measure: float
    lp: float
    p: Fraction
    n: int
    m: int
    seed: int
    wall_time: float
    count: int = 0
    threshold: float = 0.0
    lp_tube: float = 0.0
    lp_complement: float = 0.0
    tube_points: int = 0


@dataclass
class LadderResult:
    records: list
    fits: dict
    predictions: LadderPredictions


class LadderError(RuntimeError):
    """A ladder step failed; ``records`` holds everything finished before it."""

    def __init__(self, R, cause, records):
        self.R = R
        self.cause = cause
        self.records = records
        super().__init__(f"ladder step R={R} failed: {cause}")


# Slope tolerances: amplitude two-sided, measure two-sided, Lp one-sided (lower bound).
TOLERANCES = {"amplitude": 0.05, "measure": 0.1, "lp": 0.1}


def build_example(config, R):
    if config.fhat is None:
        if config.m != 1:
            raise InvalidArgument("built-in examples exist only for m = 1; pass an fhat file")
        return m1_example(config.n, R)
    path = config.fhat.format(R=_format_R(R))
    f0 = load_grid_example(path)
    if f0.n != config.m:
        raise InvalidArgument(f"fhat file {path} has n={f0.n}, expected m={config.m}")
    f1 = None if config.m == config.n else build_f1(ExampleParams(config.n, config.m, R))
    return tensor(f0, f1)


def _format_R(R):
    return str(int(R)) if float(R).is_integer() else repr(float(R))


def measure_one(config, R):
    """All ladder observables at a single R."""
    start = time.perf_counter()
    ex = build_example(config, R)
    e0 = config.e0 or getattr(getattr(ex, "f0", ex), "e0", None)
    if e0 is None:
        if config.m != 1:
            raise InvalidArgument("lattice examples must declare e0 (in the file or config)")
        e0 = TubeGrid().e0
    grid = TubeGrid(e0=tuple(map(tuple, e0)), x_step=config.x_step, u_fraction=config.u_fraction)
    field = scan_tube(ex, R, grid=grid, c_win=config.c_win, n_t=config.n_t)
    size = norm(ex)
    thr = threshold_for(config.n, config.m, R, config.threshold_factor) * size
    rep = exceptional_set(field, thr)
    p = as_rational(config.p)
    lp = lp_norm_maximal(ex, R, float(p), SamplerSpec(config.mc_points, config.seed),
                         c_win=config.c_win, n_t=config.n_t, tube_field=field)
    return LadderRecord(
        R=float(R),
        peak=rep.peak / size,
        measure=rep.measure,
        lp=lp.value / size,
        p=p,
        n=config.n,
        m=config.m,
        seed=config.seed,
        wall_time=time.perf_counter() - start,
        count=rep.count,
        threshold=thr / size,
        lp_tube=lp.tube_part / size,
        lp_complement=lp.complement_part / size,
        tube_points=int(field.values.size),
    )


def _safe_fit(records, attr):
    pts = [(r.R, getattr(r, attr)) for r in records]
    if len(pts) < 2 or any(v <= 0 for _, v in pts):
        return None
    return fit_exponent(pts)


def slope_checks(fits, pred):
    """Pass/fail per observable; None where no fit exists."""
    out = {}
    for key, fit in fits.items():
        if fit is None:
            out[key] = None
            continue
        target = float(getattr(pred, key))
        if key == "lp":
            out[key] = fit.slope >= target - TOLERANCES[key]
        else:
            out[key] = abs(fit.slope - target) <= TOLERANCES[key]
    return out


def run_ladder(config, workers=1, on_record=None):
    """Measure every R of ``config.ladder`` and fit the three growth exponents.

    Per-R jobs are independent; with ``workers > 1`` they run in a process
    pool and are merged in R order. ``on_record`` sees each finished record.
    """
    config.validate()
    Rs = [float(r) for r in config.ladder]
    records = []
    if workers > 1 and len(Rs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(measure_one, config, R) for R in Rs]
            for R, fut in zip(Rs, futures):
                try:
                    rec = fut.result()
                except Exception as exc:
                    raise LadderError(R, exc, records) from exc
                records.append(rec)
                if on_record:
                    on_record(rec)
    else:
        for R in Rs:
            try:
                rec = measure_one(config, R)
            except Exception as exc:
                raise LadderError(R, exc, records) from exc
            log.info("R=%g peak=%.6g |E|=%.6g Lp=%.6g (%.1fs)",
                     R, rec.peak, rec.measure, rec.lp, rec.wall_time)
            records.append(rec)
            if on_record:
                on_record(rec)

    fits = {
        "amplitude": _safe_fit(records, "peak"),
        "measure": _safe_fit(records, "measure"),
        "lp": _safe_fit(records, "lp"),
    }
    pred = ladder_exponent_predictions(config.n, config.m, as_rational(config.p))
    return LadderResult(records, fits, pred)


def measure_ratio_spread(records, n, m):
    """max/min of |E| R^((n-m)/2) over a ladder (constancy of the implied constant)."""
    vals = [r.measure * r.R ** ((n - m) / 2) for r in records if r.measure > 0]
    if len(vals) < 2:
        return math.nan
    return max(vals) / min(vals)
