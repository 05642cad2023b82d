"""Maximal amplitudes over the adapted time window, exceptional sets, and Lp norms.

Only the window t = -x1/(2R) +- c_win R^(-3/2) (clipped to (0, T]) is
scanned at each point, never the whole interval. Restricting t can only
lower the measured supremum, so every number produced here is a lower bound
for the true maximal function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, InvalidArgument
from .examples import GridExample, GridTensor, modulus
from .propagator import SeparableExample

DEFAULT_C_WIN = 0.5
DEFAULT_N_T = 33
MAX_GRID_POINTS = 10_000_000
# Rows of points evaluated together (each row carries n_t times).
_POINT_BLOCK = 4096


# --- time windows -----------------------------------------------------------

@dataclass(frozen=True)
class TimeWindow:
    center: float
    half_width: float
    T: float

    @property
    def lo(self):
        return max(self.center - self.half_width, 0.0)

    @property
    def hi(self):
        return min(self.center + self.half_width, self.T)

    @property
    def empty(self):
        return self.hi <= 0.0 or self.hi < self.lo

    def times(self, n_t):
        t, ok = _window_times(np.array([self.center]), self.half_width, self.T, n_t)
        return t[0] if ok[0] else np.empty(0)


def adapted_window(x1, R, c_win=DEFAULT_C_WIN, T=None):
    """Window centred on -x1/(2R) with half-width c_win R^(-3/2), clipped to (0, T].

    The default horizon is T = 1/R. Check ``.empty`` before use.
    """
    if not R > 1:
        raise InvalidArgument(f"R must be > 1, got {R}")
    if not c_win > 0:
        raise InvalidArgument(f"c_win must be positive, got {c_win}")
    T = 1.0 / R if T is None else T
    if not T > 0:
        raise InvalidArgument(f"T must be positive, got {T}")
    return TimeWindow(-x1 / (2.0 * R), c_win * R ** -1.5, T)


def _window_times(centers, half_width, T, n_t):
    """Sample times (N, n_t) and a validity mask for windows around ``centers``.

    Equispaced with both endpoints when the window is unclipped at 0; when the
    left edge is clipped to the open end 0, samples are hi*k/n_t, k = 1..n_t.
    A zero half-width yields n_t copies of the centre.
    """
    if n_t < 2 and half_width > 0:
        raise InvalidArgument("n_t must be >= 2")
    lo_raw = centers - half_width
    lo = np.maximum(lo_raw, 0.0)
    hi = np.minimum(centers + half_width, T)
    ok = (hi > 0.0) & (hi >= lo)
    if half_width == 0:
        return np.repeat(centers[:, None], max(n_t, 1), axis=1), ok
    k = np.arange(n_t)
    inner = lo[:, None] + (hi - lo)[:, None] * (k / (n_t - 1))
    clipped = hi[:, None] * ((k + 1) / n_t)
    times = np.where((lo_raw <= 0.0)[:, None], clipped, inner)
    return times, ok


@dataclass(frozen=True)
class SupResult:
    value: float
    skipped: bool


def sup_over_time(ex, point, window, n_t=DEFAULT_N_T, kernel="quadrature"):
    """max |u(point, t)| over ``n_t`` equispaced times in ``window``."""
    if window.empty:
        return SupResult(0.0, True)
    times = window.times(n_t)
    vals = modulus(ex, np.asarray(point, dtype=float)[None, :], times[None, :], kernel=kernel)
    return SupResult(float(np.max(vals)), False)


def maximal_values(ex, points, R, c_win=DEFAULT_C_WIN, n_t=DEFAULT_N_T, T=None,
                   kernel="quadrature"):
    """Windowed maximal function at rows of ``points``; returns (values, skipped)."""
    pts = np.asarray(points, dtype=float)
    T = 1.0 / R if T is None else T
    half = c_win * R ** -1.5
    values = np.zeros(pts.shape[0])
    skipped = np.ones(pts.shape[0], dtype=bool)
    for lo in range(0, pts.shape[0], _POINT_BLOCK):
        block = pts[lo:lo + _POINT_BLOCK]
        times, ok = _window_times(-block[:, 0] / (2.0 * R), half, T, n_t)
        if ok.any():
            mods = modulus(ex, block[ok], times[ok], kernel=kernel)
            v = np.zeros(block.shape[0])
            v[ok] = mods.max(axis=1)
            values[lo:lo + _POINT_BLOCK] = v
        skipped[lo:lo + _POINT_BLOCK] = ~ok
    return values, skipped


# --- tube lattice -----------------------------------------------------------

@dataclass(frozen=True)
class TubeGrid:
    """Lattice for the tube around the diagonal x_j = x_1 (j > m).

    ``e0`` gives [lo, hi] for each of the first m coordinates (step ``x_step``);
    the transverse offsets u_j = x_j - x_1 run over [-R^(-1/2)/2, R^(-1/2)/2]
    with spacing ``u_fraction`` * R^(-1/2).
    """

    e0: tuple = ((-0.9, -0.1),)
    x_step: float = 1.0 / 64
    u_fraction: float = 1.0 / 8

    def __post_init__(self):
        object.__setattr__(self, "e0", tuple(tuple(map(float, iv)) for iv in self.e0))
        if not self.x_step > 0 or not self.u_fraction > 0:
            raise InvalidArgument("tube grid steps must be positive")
        if any(not lo < hi for lo, hi in self.e0):
            raise InvalidArgument("e0 intervals need lo < hi")


@dataclass(frozen=True)
class TubeGeometry:
    """Region covered by the tube lattice cells, used to keep strata disjoint."""

    box: tuple
    u_reach: float
    m: int

    def contains(self, points):
        pts = np.asarray(points, dtype=float)
        inside = np.ones(pts.shape[0], dtype=bool)
        for j, (lo, hi) in enumerate(self.box):
            inside &= (pts[:, j] >= lo) & (pts[:, j] <= hi)
        for j in range(self.m, pts.shape[1]):
            inside &= np.abs(pts[:, j] - pts[:, 0]) <= self.u_reach
        return inside


@dataclass
class MaximalField:
    points: np.ndarray
    values: np.ndarray
    cell_volume: np.ndarray
    spacings: tuple
    extents: tuple
    skipped: np.ndarray = None
    mode: str = "lattice"
    geometry: TubeGeometry = None
    shape: tuple = field(default=None)

    def __post_init__(self):
        if self.skipped is None:
            self.skipped = np.zeros(self.values.shape, dtype=bool)

    @property
    def sampled_volume(self):
        return float(np.sum(self.cell_volume))


def _axis_lattice(lo, hi, step):
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def tube_lattice(n, m, R, grid=TubeGrid()):
    """Tube sample points inside the open unit ball, plus geometry and spacings."""
    if len(grid.e0) != m:
        raise InvalidArgument(f"e0 must give {m} interval(s) for m={m}, got {len(grid.e0)}")
    u_half = 0.5 * R ** -0.5
    h = grid.u_fraction * R ** -0.5
    per_u = int(round(u_half / h))
    u_axis = h * np.arange(-per_u, per_u + 1)
    lead = [_axis_lattice(lo, hi, grid.x_step) for lo, hi in grid.e0]
    axes = lead + [u_axis] * (n - m)
    counts = [a.size for a in axes]
    total = int(np.prod(counts, dtype=np.int64))
    if total > MAX_GRID_POINTS:
        raise CapacityError(
            f"tube lattice would hold {total} points (> {MAX_GRID_POINTS}); "
            "increase x_step or u_fraction")
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.ravel() for g in mesh], axis=-1)
    pts = coords.copy()
    pts[:, m:] += coords[:, :1]
    keep = np.sum(pts * pts, axis=1) < 1.0
    geometry = TubeGeometry(
        box=tuple((lo - grid.x_step / 2, hi_axis[-1] + grid.x_step / 2)
                  for (lo, _), hi_axis in zip(grid.e0, lead)),
        u_reach=u_half + h / 2,
        m=m,
    )
    spacings = (grid.x_step,) * m + (h,) * (n - m)
    extents = tuple((float(a[0]), float(a[-1])) for a in axes)
    return pts[keep], geometry, spacings, extents, tuple(counts)


def _default_grid(ex):
    if isinstance(ex, SeparableExample):
        if ex.m != 1:
            raise InvalidArgument("built-in tube scans need m = 1; supply e0 for other splits")
        return TubeGrid()
    f0 = ex.f0 if isinstance(ex, GridTensor) else ex
    if f0.e0 is None:
        raise InvalidArgument("lattice examples must declare e0 to be scanned")
    return TubeGrid(e0=f0.e0)


def scan_tube(ex, R, grid=None, c_win=DEFAULT_C_WIN, n_t=DEFAULT_N_T):
    """Windowed maximal function on the tube lattice (points outside B^n(0,1) dropped)."""
    if not isinstance(ex, (SeparableExample, GridExample, GridTensor)):
        raise InvalidArgument(f"unsupported example type {type(ex).__name__}")
    grid = _default_grid(ex) if grid is None else grid
    pts, geometry, spacings, extents, counts = tube_lattice(ex.n, ex.m, R, grid)
    values, skipped = maximal_values(ex, pts, R, c_win=c_win, n_t=n_t)
    vol = float(np.prod(spacings))
    return MaximalField(
        points=pts,
        values=values,
        cell_volume=np.full(pts.shape[0], vol),
        spacings=spacings,
        extents=extents,
        skipped=skipped,
        mode="lattice",
        geometry=geometry,
        shape=counts,
    )


# --- exceptional set --------------------------------------------------------

@dataclass(frozen=True)
class ExceptionalSetReport:
    threshold: float
    measure: float
    peak: float
    count: int


def exceptional_set(field, threshold):
    """Cells with value >= threshold: total volume, peak value and count."""
    if not threshold > 0:
        raise InvalidArgument(f"threshold must be positive, got {threshold}")
    hit = field.values >= threshold
    count = int(np.count_nonzero(hit))
    measure = float(np.sum(field.cell_volume[hit]))
    peak = float(np.max(field.values[hit])) if count else 0.0
    return ExceptionalSetReport(float(threshold), measure, peak, count)


def m1_threshold(n, R, factor=0.5):
    """factor^n (2pi)^(-n/2) R^(n/4): per-axis lower bound with margin, m = 1."""
    return factor ** n * (2.0 * math.pi) ** (-n / 2) * R ** (n / 4)


def threshold_for(n, m, R, factor=0.5):
    return factor ** n * (2.0 * math.pi) ** (-n / 2) * R ** (m / (2 * (m + 1)) + (n - m) / 4)


# --- Lp norms ---------------------------------------------------------------

def splitmix64(seed, count, start=0):
    """``count`` outputs of the splitmix64 stream for ``seed``, from index ``start``."""
    if not 0 <= seed < 2 ** 64:
        raise InvalidArgument("seed must lie in [0, 2^64)")
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + idx * np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def uniform01(seed, count, start=0):
    """Doubles in [0, 1) from the top 53 bits of splitmix64."""
    return (splitmix64(seed, count, start) >> np.uint64(11)).astype(float) * 2.0 ** -53


def sample_ball(n, count, seed):
    """``count`` uniform points in the open unit ball by rejection from [-1, 1)^n."""
    out = []
    have = 0
    cursor = 0
    batch = max(1024, 2 * count)
    while have < count:
        u = uniform01(seed, batch * n, start=cursor).reshape(batch, n)
        cursor += batch * n
        x = 2.0 * u - 1.0
        x = x[np.sum(x * x, axis=1) < 1.0]
        out.append(x)
        have += x.shape[0]
    return np.concatenate(out)[:count]


def ball_volume(n):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class SamplerSpec:
    mc_points: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.mc_points < 1:
            raise InvalidArgument("Monte Carlo budget must be at least 1 point")


@dataclass(frozen=True)
class LpEstimate:
    p: float
    value: float
    tube_integral: float
    complement_integral: float
    complement_stderr: float
    mc_points: int
    seed: int

    @property
    def tube_part(self):
        return self.tube_integral ** (1.0 / self.p)

    @property
    def complement_part(self):
        return self.complement_integral ** (1.0 / self.p)


def lp_norm_from_field(field, p):
    """(sum v^p * cell volume)^(1/p) over a sampled field."""
    if not p >= 1:
        raise InvalidArgument(f"p must be >= 1, got {p}")
    return float(np.sum(field.values ** p * field.cell_volume)) ** (1.0 / p)


def lp_norm_maximal(ex, R, p, sampler=SamplerSpec(), grid=None, c_win=DEFAULT_C_WIN,
                    n_t=DEFAULT_N_T, tube_field=None, complement_kernel="fresnel"):
    """Stratified estimate of ||sup_t |u| ||_{L^p(B^n(0,1))}.

    Tube stratum: lattice sum over ``scan_tube``. Complement stratum: seeded
    uniform Monte Carlo over the ball with tube-covered points removed. Brick
    axes in the complement use the Fresnel closed form by default.
    """
    p = float(p)
    if not p >= 1:
        raise InvalidArgument(f"p must be >= 1, got {p}")
    if not isinstance(sampler, SamplerSpec):
        sampler = SamplerSpec(*sampler)
    if tube_field is None:
        tube_field = scan_tube(ex, R, grid=grid, c_win=c_win, n_t=n_t)
    tube_int = float(np.sum(tube_field.values ** p * tube_field.cell_volume))

    pts = sample_ball(ex.n, sampler.mc_points, sampler.seed)
    outside = ~tube_field.geometry.contains(pts)
    vals = np.zeros(pts.shape[0])
    if outside.any():
        vals[outside], _ = maximal_values(ex, pts[outside], R, c_win=c_win, n_t=n_t,
                                          kernel=complement_kernel)
    vol = ball_volume(ex.n)
    powered = vals ** p
    comp_int = vol * float(np.mean(powered))
    stderr = vol * float(np.std(powered)) / math.sqrt(powered.size)
    return LpEstimate(
        p=p,
        value=(tube_int + comp_int) ** (1.0 / p),
        tube_integral=tube_int,
        complement_integral=comp_int,
        complement_stderr=stderr,
        mc_points=sampler.mc_points,
        seed=sampler.seed,
    )
