"""Free Schrodinger evolution of frequency-brick data.

The solution operator is taken literally from its defining integral,

    u(x, t) = (2 pi)^(-n/2) * integral exp(i (x . xi + t |xi|^2)) fhat(xi) dxi,

so positive times move a brick centred at frequency c towards x = -2 c t.
For a brick fhat(xi) = w * chi((xi - c) / s) the substitution xi = c + s*eta
reduces every axis to the chirp integral

    I(a, b) = integral_{-1/2}^{1/2} exp(i (a eta + b eta^2)) d eta,

which is evaluated by composite Gauss-Legendre quadrature.  Separable data
factorises over axes because |xi|^2 splits into a sum of squares.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

from .errors import CapacityError, InvalidArgument

GL_ORDER = 16
MIN_PANELS = 8
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Bound on (rows x nodes) per vectorised block; keeps temporaries ~ tens of MB.
_BLOCK = 1 << 20
# Below this |b| the Fresnel closed form loses digits; quadrature takes over.
_FRESNEL_MIN_B = 1e-6

_gl_nodes, _gl_weights = leggauss(GL_ORDER)


@dataclass(frozen=True)
class Brick1D:
    """One-axis frequency profile w * chi((xi - c) / s), chi = 1 on [-1/2, 1/2]."""

    weight: float
    center: float
    width: float

    def __post_init__(self):
        for name in ("weight", "center", "width"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgument(f"brick {name} must be finite")
        if self.width <= 0:
            raise InvalidArgument(f"brick width must be positive, got {self.width}")
        if self.weight < 0:
            raise InvalidArgument(f"brick weight must be non-negative, got {self.weight}")

    @property
    def support(self):
        return (self.center - self.width / 2, self.center + self.width / 2)

    def norm(self):
        return self.weight * math.sqrt(self.width)


@dataclass(frozen=True)
class SeparableExample:
    """Tensor product of bricks; the first ``m`` axes form the f0 factor."""

    axes: tuple
    m: int

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise InvalidArgument("a separable example needs at least one axis")
        if not all(isinstance(b, Brick1D) for b in self.axes):
            raise InvalidArgument("axes must be Brick1D records")
        if not 1 <= self.m <= len(self.axes):
            raise InvalidArgument(f"split index m={self.m} outside [1, {len(self.axes)}]")

    @property
    def n(self):
        return len(self.axes)


@dataclass(frozen=True)
class ChirpResult:
    value: complex
    error: float


def l2_norm(ex):
    """Exact L2 norm: product over axes of w * sqrt(s)."""
    out = 1.0
    for b in ex.axes:
        out *= b.norm()
    return out


# --- chirp kernel -----------------------------------------------------------

def panel_count(a, b):
    """Panels for I(a, b): at most pi radians of phase per 16-node panel."""
    spread = np.abs(np.asarray(a, dtype=float)) + np.abs(np.asarray(b, dtype=float))
    return np.maximum(MIN_PANELS, np.ceil(spread / np.pi)).astype(np.int64)


@lru_cache(maxsize=256)
def _composite_rule(panels):
    h = 1.0 / panels
    centers = -0.5 + h * (np.arange(panels) + 0.5)
    eta = (centers[:, None] + 0.5 * h * _gl_nodes[None, :]).ravel()
    w = np.tile(0.5 * h * _gl_weights, panels)
    for arr in (eta, w):
        arr.setflags(write=False)
    return eta, eta * eta, w


def _gl_sum(a, b, panels):
    eta, eta2, w = _composite_rule(int(panels))
    out = np.empty(a.shape[0], dtype=complex)
    step = max(1, _BLOCK // eta.size)
    for lo in range(0, a.shape[0], step):
        hi = lo + step
        phase = a[lo:hi, None] * eta + b[lo:hi, None] * eta2
        out.real[lo:hi] = (np.cos(phase) * w).sum(axis=1)
        out.imag[lo:hi] = (np.sin(phase) * w).sum(axis=1)
    return out


@contextmanager
def perturbed_rule(scale=1.001):
    """Fault-injection hook: scale every Gauss-Legendre weight while active."""
    global _gl_weights
    saved = _gl_weights
    _gl_weights = saved * scale
    _composite_rule.cache_clear()
    try:
        yield
    finally:
        _gl_weights = saved
        _composite_rule.cache_clear()


def _check_finite(a, b):
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidArgument("chirp arguments must be finite")


def _by_panels(a, b, multiple):
    out = np.empty(a.shape, dtype=complex)
    base = panel_count(a, b)
    for p in np.unique(base):
        sel = base == p
        out[sel] = _gl_sum(a[sel], b[sel], multiple * p)
    return out


def chirp_values(a, b):
    """Vectorised I(a, b) at the refined panel count (2P); any broadcastable shapes."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    _check_finite(a, b)
    shape = a.shape
    return _by_panels(a.ravel(), b.ravel(), 2).reshape(shape)


def chirp_integral(a, b):
    """I(a, b) with a node-doubling error estimate |I_P - I_2P|; returns the I_2P value."""
    a = float(a)
    b = float(b)
    _check_finite(a, b)
    av = np.array([a])
    bv = np.array([b])
    p = int(panel_count(a, b))
    coarse = _gl_sum(av, bv, p)[0]
    fine = _gl_sum(av, bv, 2 * p)[0]
    return ChirpResult(complex(fine), float(abs(fine - coarse)))


def chirp_with_error(a, b):
    """Vectorised ``chirp_integral``: (I_2P values, |I_P - I_2P| estimates)."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    _check_finite(a, b)
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    coarse = _by_panels(a, b, 1)
    fine = _by_panels(a, b, 2)
    return fine.reshape(shape), np.abs(fine - coarse).reshape(shape)


def chirp_values_fresnel(a, b):
    """Closed-form I(a, b) through Fresnel integrals.

    Used where thousands of far-field chirps are needed per point (the Monte
    Carlo complement). Completing the square gives

        I = exp(-i a^2 / 4b) sqrt(pi / 2b) [C(v) + i S(v)] from v1 to v2,
        v = sqrt(2b / pi) (eta + a / 2b),

    valid for b > 0; b < 0 uses I(a, b) = conj(I(-a, -b)). Tiny |b| falls
    back to quadrature.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    _check_finite(a, b)
    shape = a.shape
    a = a.ravel().copy()
    b = b.ravel().copy()
    out = np.empty(a.shape, dtype=complex)

    small = np.abs(b) < _FRESNEL_MIN_B
    if small.any():
        out[small] = _by_panels(a[small], b[small], 2)
    big = ~small
    if big.any():
        neg = b < 0
        a[neg] = -a[neg]
        b[neg] = -b[neg]
        ab, bb = a[big], b[big]
        scale = np.sqrt(2.0 * bb / np.pi)
        shift = ab / (2.0 * bb)
        s2, c2 = special.fresnel(scale * (0.5 + shift))
        s1, c1 = special.fresnel(scale * (-0.5 + shift))
        val = np.sqrt(np.pi / (2.0 * bb)) * ((c2 - c1) + 1j * (s2 - s1))
        val *= np.exp(-1j * ab * ab / (4.0 * bb))
        val[neg[big]] = np.conj(val[neg[big]])
        out[big] = val
    return out.reshape(shape)


_KERNELS = {"quadrature": chirp_values, "fresnel": chirp_values_fresnel}


def _kernel(name):
    try:
        return _KERNELS[name]
    except KeyError:
        raise InvalidArgument(f"unknown chirp kernel {name!r}") from None


# --- evolution --------------------------------------------------------------

def _chirp_args(brick, x, t):
    s, c = brick.width, brick.center
    return s * (x + 2.0 * c * t), t * s * s


def axis_factor(brick, x, t, kernel="quadrature"):
    """One-axis evolution (2pi)^(-1/2) w s e^{i(xc + tc^2)} I(s(x + 2ct), t s^2).

    ``x`` and ``t`` broadcast; scalars give a Python complex.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    a, b = _chirp_args(brick, x, t)
    c = brick.center
    theta0 = x * c + t * c * c
    out = INV_SQRT_2PI * brick.weight * brick.width * np.exp(1j * theta0) * _kernel(kernel)(a, b)
    return complex(out) if out.ndim == 0 else out


def axis_modulus(brick, x, t, kernel="quadrature"):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    a, b = _chirp_args(brick, x, t)
    return INV_SQRT_2PI * brick.weight * brick.width * np.abs(_kernel(kernel)(a, b))


def _as_points(ex, points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != ex.n:
        raise InvalidArgument(f"points must have {ex.n} coordinates, got shape {np.shape(points)}")
    return pts


def evaluate_separable(ex, point, t):
    """u(point, t) for separable brick data, as a product of axis factors."""
    pts = _as_points(ex, point)
    if pts.shape[0] != 1:
        raise InvalidArgument("evaluate_separable takes a single point; use evolve_separable")
    if not math.isfinite(float(t)):
        raise InvalidArgument("time must be finite")
    out = 1.0 + 0.0j
    for j, brick in enumerate(ex.axes):
        out *= axis_factor(brick, pts[0, j], float(t))
    return complex(out)


def evolve_separable(ex, points, times):
    """Vectorised u at rows of ``points`` (N, n) and ``times`` broadcast to (N, ...)."""
    pts = _as_points(ex, points)
    times = np.asarray(times, dtype=float)
    out = None
    for j, brick in enumerate(ex.axes):
        x = pts[:, j].reshape((-1,) + (1,) * max(times.ndim - 1, 0))
        f = axis_factor(brick, x, times)
        out = f if out is None else out * f
    return out


def separable_modulus(ex, points, times, kernel="quadrature"):
    """|u| at rows of ``points`` and ``times``; product of axis moduli."""
    pts = _as_points(ex, points)
    times = np.asarray(times, dtype=float)
    out = None
    for j, brick in enumerate(ex.axes):
        x = pts[:, j].reshape((-1,) + (1,) * max(times.ndim - 1, 0))
        f = axis_modulus(brick, x, times, kernel=kernel)
        out = f if out is None else out * f
    return out


# --- independent oracle -----------------------------------------------------

ORACLE_MAX_DIM = 3
ORACLE_MAX_NODES = 4096
_ORACLE_ORDER = 8


def _oracle_axis_rule(brick, nodes):
    panels = nodes // _ORACLE_ORDER
    x, w = leggauss(_ORACLE_ORDER)
    lo, hi = brick.support
    h = (hi - lo) / panels
    centers = lo + h * (np.arange(panels) + 0.5)
    xi = (centers[:, None] + 0.5 * h * x[None, :]).ravel()
    return xi, np.tile(0.5 * h * w, panels)


def frequency_profile(ex, xi):
    """fhat at frequency points ``xi`` of shape (..., n)."""
    xi = np.asarray(xi, dtype=float)
    out = np.ones(xi.shape[:-1])
    for j, b in enumerate(ex.axes):
        inside = np.abs((xi[..., j] - b.center) / b.width) <= 0.5
        out = out * np.where(inside, b.weight, 0.0)
    return out


def direct_oracle(ex, point, t, nodes_per_axis=256):
    """Full n-dimensional tensor-grid quadrature of the defining integral.

    The phase x.xi + t|xi|^2 and the profile are formed on the whole grid, so
    nothing here relies on the axis factorisation used by ``evaluate_separable``.
    Uses 8-point Gauss-Legendre panels in frequency units over the support box.
    """
    if ex.n > ORACLE_MAX_DIM:
        raise CapacityError(f"direct oracle limited to n <= {ORACLE_MAX_DIM}, got n={ex.n}")
    if nodes_per_axis > ORACLE_MAX_NODES:
        raise CapacityError(f"direct oracle limited to {ORACLE_MAX_NODES} nodes per axis")
    if nodes_per_axis < _ORACLE_ORDER or nodes_per_axis % _ORACLE_ORDER:
        raise InvalidArgument(f"nodes_per_axis must be a positive multiple of {_ORACLE_ORDER}")
    x = _as_points(ex, point)[0]
    t = float(t)

    rules = [_oracle_axis_rule(b, nodes_per_axis) for b in ex.axes]
    rest = np.meshgrid(*[r[0] for r in rules[1:]], indexing="ij") if ex.n > 1 else []
    rest_w = np.ones(1)
    for r in rules[1:]:
        rest_w = np.multiply.outer(rest_w, r[1])
    rest_w = rest_w.reshape(-1)
    rest_xi = np.stack([g.ravel() for g in rest], axis=-1) if rest else np.zeros((1, 0))

    total = 0.0 + 0.0j
    xi0, w0 = rules[0]
    for k in range(xi0.size):
        xi = np.concatenate([np.full((rest_xi.shape[0], 1), xi0[k]), rest_xi], axis=1)
        phase = xi @ x + t * np.sum(xi * xi, axis=1)
        amp = frequency_profile(ex, xi)
        total += w0[k] * np.sum(rest_w * amp * np.exp(1j * phase))
    return complex(total * (2.0 * math.pi) ** (-ex.n / 2))
