"""Extremizing data: brick factors, their tensor products, rescaling, and lattice plug-ins."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import GridFormatError, InvalidArgument
from .propagator import Brick1D, SeparableExample, evolve_separable, l2_norm, separable_modulus


@dataclass(frozen=True)
class ExampleParams:
    n: int
    m: int
    R: float

    def __post_init__(self):
        if int(self.n) != self.n or int(self.m) != self.m:
            raise InvalidArgument("n and m must be integers")
        if not 1 <= self.m <= self.n:
            raise InvalidArgument(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if not (math.isfinite(self.R) and self.R > 1):
            raise InvalidArgument(f"R must be > 1, got {self.R}")


def scale_brick(R):
    """The R-scale atom: weight R^(-1/4), centre R, width R^(1/2); unit L2 norm."""
    return Brick1D(R ** -0.25, float(R), math.sqrt(R))


def build_f1(params):
    """The (n - m)-axis factor with every axis a scale brick."""
    if params.m == params.n:
        raise InvalidArgument("f1 is empty when m = n; use f0 directly")
    k = params.n - params.m
    return SeparableExample((scale_brick(params.R),) * k, m=k)


def build_f0_dk(R):
    """One-dimensional f0 for m = 1: a single scale brick."""
    if not (math.isfinite(R) and R > 1):
        raise InvalidArgument(f"R must be > 1, got {R}")
    return SeparableExample((scale_brick(R),), m=1)


def tensor(f0, f1):
    """f0(x) f1(x'); ``f1=None`` is the m = n case and returns f0 unchanged."""
    if f1 is None:
        return f0
    if isinstance(f0, GridExample):
        return GridTensor(f0, f1)
    return SeparableExample(f0.axes + f1.axes, m=f0.n)


def rescale(f, R):
    """g with ghat(xi) = R^(n/2) fhat(R xi); per axis (w, c, s) -> (w sqrt(R), c/R, s/R)."""
    if not (math.isfinite(R) and R > 0):
        raise InvalidArgument(f"rescaling factor must be positive, got {R}")
    root = math.sqrt(R)
    axes = tuple(Brick1D(b.weight * root, b.center / R, b.width / R) for b in f.axes)
    return SeparableExample(axes, m=f.m)


def m1_example(n, R):
    """Built-in m = 1 example in dimension n."""
    f0 = build_f0_dk(R)
    if n == 1:
        return f0
    return tensor(f0, build_f1(ExampleParams(n, 1, R)))


# --- lattice data -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridExample:
    """Frequency-side lattice data.

    ``origin`` is the low corner of the lattice; cell k is centred at
    origin + (k + 1/2) * spacing. ``e0`` optionally declares the box (one
    [lo, hi] pair per axis) on which the example is expected to be large.
    """

    origin: np.ndarray
    spacing: np.ndarray
    cells: tuple
    amplitudes: np.ndarray
    e0: tuple = None

    def __post_init__(self):
        n = len(self.cells)
        if n < 1 or len(self.origin) != n or len(self.spacing) != n:
            raise InvalidArgument("origin, spacing and cells must have the same length")
        if np.any(np.asarray(self.spacing) <= 0):
            raise InvalidArgument("lattice spacings must be positive")
        if any(c < 1 for c in self.cells):
            raise InvalidArgument("cell counts must be >= 1")
        if self.amplitudes.size != int(np.prod(self.cells)):
            raise InvalidArgument("amplitude count must equal the product of cell counts")
        if not np.all(np.isfinite(self.amplitudes)):
            raise InvalidArgument("amplitudes must be finite")
        if not self.norm() > 0:
            raise InvalidArgument("lattice data must have positive L2 norm")

    @property
    def n(self):
        return len(self.cells)

    @property
    def m(self):
        return self.n

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def norm(self):
        """Discrete L2 norm sqrt(sum |a_k|^2 * cell volume)."""
        return math.sqrt(float(np.sum(np.abs(self.amplitudes) ** 2)) * self.cell_volume)

    def centers(self):
        """Cell centres, shape (prod(cells), n), row-major."""
        axes = [self.origin[j] + self.spacing[j] * (np.arange(self.cells[j]) + 0.5)
                for j in range(self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)


@dataclass(frozen=True, eq=False)
class GridTensor:
    """Lattice f0 on the first m axes times brick f1 on the rest."""

    f0: GridExample
    f1: SeparableExample

    @property
    def n(self):
        return self.f0.n + self.f1.n

    @property
    def m(self):
        return self.f0.n


_GRID_KEYS = {"n", "origin", "spacing", "cells", "amplitudes"}
_GRID_OPTIONAL = {"e0"}


def _line_of(text, key):
    needle = f'"{key}"'
    pos = text.find(needle)
    return None if pos < 0 else text.count("\n", 0, pos) + 1


def _real_list(doc, text, key, length):
    val = doc[key]
    line = _line_of(text, key)
    if not isinstance(val, list) or len(val) != length:
        raise GridFormatError(f"expected an array of {length} numbers", key, line)
    for i, v in enumerate(val):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise GridFormatError(f"entry {i} is not a finite number: {v!r}", key, line)
    return np.array(val, dtype=float)


def parse_grid_example(text):
    """Parse the JSON lattice format; raises GridFormatError with line/field context."""
    try:
        doc = json.loads(text, parse_constant=lambda c: _reject_constant(c))
    except json.JSONDecodeError as exc:
        raise GridFormatError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise GridFormatError("top level must be a JSON object", line=1)
    missing = _GRID_KEYS - doc.keys()
    if missing:
        raise GridFormatError(f"missing fields: {sorted(missing)}")
    extra = doc.keys() - _GRID_KEYS - _GRID_OPTIONAL
    if extra:
        raise GridFormatError(f"unknown fields: {sorted(extra)}")

    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise GridFormatError("n must be a positive integer", "n", _line_of(text, "n"))
    origin = _real_list(doc, text, "origin", n)
    spacing = _real_list(doc, text, "spacing", n)
    if np.any(spacing <= 0):
        raise InvalidArgument(f"spacing must be positive, got {spacing.tolist()}")

    cells = doc["cells"]
    line = _line_of(text, "cells")
    if (not isinstance(cells, list) or len(cells) != n
            or any(isinstance(c, bool) or not isinstance(c, int) for c in cells)):
        raise GridFormatError(f"expected an array of {n} integers", "cells", line)
    if any(c < 1 for c in cells):
        raise InvalidArgument(f"cell counts must be >= 1, got {cells}")

    amps = doc["amplitudes"]
    line = _line_of(text, "amplitudes")
    if not isinstance(amps, list) or not amps:
        raise InvalidArgument("amplitudes must be a non-empty array of [re, im] pairs")
    total = int(np.prod(cells))
    if len(amps) != total:
        raise GridFormatError(f"expected {total} amplitudes, got {len(amps)}", "amplitudes", line)
    values = np.empty(total, dtype=complex)
    for i, pair in enumerate(amps):
        if (not isinstance(pair, list) or len(pair) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in pair)):
            raise GridFormatError(f"entry {i} is not a [re, im] pair: {pair!r}", "amplitudes", line)
        values[i] = complex(pair[0], pair[1])

    e0 = None
    if "e0" in doc:
        raw = doc["e0"]
        line = _line_of(text, "e0")
        if not isinstance(raw, list) or not raw or len(raw) > n:
            raise GridFormatError("e0 must list [lo, hi] for the leading axes", "e0", line)
        try:
            e0 = tuple((float(lo), float(hi)) for lo, hi in raw)
        except (TypeError, ValueError):
            raise GridFormatError("e0 entries must be [lo, hi] pairs", "e0", line) from None
        if any(not lo < hi for lo, hi in e0):
            raise GridFormatError("e0 intervals need lo < hi", "e0", line)

    return GridExample(origin, spacing, tuple(cells), values.reshape(cells), e0)


def _reject_constant(name):
    raise GridFormatError(f"non-finite constant {name} not allowed")


def load_grid_example(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_grid_example(text)


def grid_to_json(ex):
    doc = {
        "n": ex.n,
        "origin": [float(v) for v in ex.origin],
        "spacing": [float(v) for v in ex.spacing],
        "cells": list(ex.cells),
        "amplitudes": [[float(z.real), float(z.imag)] for z in ex.amplitudes.ravel()],
    }
    if ex.e0 is not None:
        doc["e0"] = [list(iv) for iv in ex.e0]
    return json.dumps(doc, indent=1)


def evolve_grid(ex, points, times):
    """Riemann sum (2pi)^(-n/2) sum_k a_k e^{i(x.xi_k + t|xi_k|^2)} |cell|.

    ``times`` is a scalar, shape (N,) or (N, K) against N rows of ``points``;
    the result has the broadcast shape of ``times``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[1] != ex.n:
        raise InvalidArgument(f"points must have {ex.n} coordinates")
    times = np.asarray(times, dtype=float)
    if times.ndim == 0:
        times = np.full(pts.shape[0], float(times))
    shape = times.shape
    flat_t = times.reshape(pts.shape[0], -1)
    xi = ex.centers()
    amp = ex.amplitudes.ravel() * ex.cell_volume
    sq = np.sum(xi * xi, axis=1)
    out = np.empty(flat_t.shape, dtype=complex)
    step = max(1, (1 << 20) // (xi.shape[0] * flat_t.shape[1]))
    for lo in range(0, pts.shape[0], step):
        space = (pts[lo:lo + step] @ xi.T)[:, None, :]
        phase = space + flat_t[lo:lo + step, :, None] * sq
        out[lo:lo + step] = (np.exp(1j * phase) * amp).sum(axis=-1)
    return out.reshape(shape) * (2.0 * math.pi) ** (-ex.n / 2)


def evolve(ex, points, times):
    """Dispatch u(points, times) for any supported example type."""
    if isinstance(ex, SeparableExample):
        return evolve_separable(ex, points, times)
    if isinstance(ex, GridExample):
        return evolve_grid(ex, points, times)
    if isinstance(ex, GridTensor):
        pts = np.asarray(points, dtype=float)
        k = ex.f0.n
        return evolve_grid(ex.f0, pts[:, :k], times) * evolve_separable(ex.f1, pts[:, k:], times)
    raise InvalidArgument(f"unsupported example type {type(ex).__name__}")


def modulus(ex, points, times, kernel="quadrature"):
    """|u| at rows of ``points``; ``kernel`` picks the chirp evaluator for brick axes."""
    if isinstance(ex, SeparableExample):
        return separable_modulus(ex, points, times, kernel=kernel)
    if isinstance(ex, GridTensor):
        pts = np.asarray(points, dtype=float)
        k = ex.f0.n
        return (np.abs(evolve_grid(ex.f0, pts[:, :k], times))
                * separable_modulus(ex.f1, pts[:, k:], times, kernel=kernel))
    return np.abs(evolve(ex, points, times))


def norm(ex):
    """L2 norm of any supported example (Plancherel on the frequency side)."""
    if isinstance(ex, SeparableExample):
        return l2_norm(ex)
    if isinstance(ex, GridTensor):
        return ex.f0.norm() * l2_norm(ex.f1)
    return ex.norm()
