"""The map family on the infinite cylinder.

The maps f(z) = ell*z + c - (ell-1)*log(c) - e^z commute with translation by
2*pi*i (ell is an integer), so they descend to self-maps of the cylinder
C/2*pi*i*Z.  Everything here works with the canonical strip representative
Im(z) in (-pi, pi].
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import defaults

TWO_PI = 2.0 * math.pi


def canonical(z):
    """Canonical strip representative (Im in (-pi, pi]) of a point or array."""
    arr = np.asarray(z, dtype=np.complex128)
    with np.errstate(invalid="ignore"):
        shift = np.ceil((arr.imag - math.pi) / TWO_PI)
        shift = np.where(np.isfinite(shift), shift, 0.0)
        out = arr - (TWO_PI * 1j) * shift
    if out.ndim == 0:
        return complex(out)
    return out


def cylinder_distance(z, w):
    """min over integers k of |z - w + 2*pi*i*k|; the metric of the cylinder."""
    d = np.asarray(z, dtype=np.complex128) - np.asarray(w, dtype=np.complex128)
    im = d.imag - TWO_PI * np.round(d.imag / TWO_PI)
    out = np.hypot(d.real, im)
    if out.ndim == 0:
        return float(out)
    return out


def _val(z):
    """Complex value(s) of a CylinderPoint, scalar or array."""
    if isinstance(z, CylinderPoint):
        return z.z
    if isinstance(z, np.ndarray):
        return z.astype(np.complex128, copy=False)
    return complex(z)


@dataclass(frozen=True)
class CylinderPoint:
    """A point of the cylinder in canonical coordinates, Im in (-pi, pi]."""

    re: float
    im: float

    def __post_init__(self):
        object.__setattr__(self, "re", float(self.re))
        im = float(self.im)
        im -= TWO_PI * math.ceil((im - math.pi) / TWO_PI)
        object.__setattr__(self, "im", im)

    @classmethod
    def from_complex(cls, z):
        z = complex(z)
        return cls(z.real, z.imag)

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)

    def __complex__(self) -> complex:
        return self.z

    def distance(self, other) -> float:
        return cylinder_distance(self.z, _val(other))


@dataclass(frozen=True)
class MapParams:
    """The pair (ell, c) selecting one member of the family.

    Requires ell >= 2 and c in the open unit disk around ell, which keeps
    Re(c) > 0 so the principal logarithm of c is safe everywhere below.
    """

    ell: int
    c: complex

    def __post_init__(self):
        ell = self.ell
        if int(ell) != ell or ell < 2:
            raise ValueError(f"ell must be an integer >= 2, got {ell!r}")
        object.__setattr__(self, "ell", int(ell))
        c = complex(self.c)
        object.__setattr__(self, "c", c)
        if abs(c - self.ell) >= 1.0:
            raise ValueError(f"c={c} must lie in the open disk D({self.ell}, 1)")

    @property
    def log_c(self) -> complex:
        return cmath.log(self.c)

    @property
    def attracting_fixed_point(self) -> complex:
        """log(c), fixed with multiplier ell - c."""
        return self.log_c

    @property
    def multiplier(self) -> complex:
        return self.ell - self.c

    @property
    def critical_point(self) -> float:
        return math.log(self.ell)

    @property
    def affine_term(self) -> complex:
        """A in f(z) = ell*z + A - e^z."""
        return self.c - (self.ell - 1) * self.log_c

    @property
    def escape_threshold(self) -> float:
        return max(50.0, 10.0 * self.ell)

    def conjugate(self) -> "MapParams":
        return MapParams(self.ell, self.c.conjugate())


def evaluate(params: MapParams, z):
    """One step of the cylinder map, returned in canonical coordinates."""
    v = _val(z)
    with np.errstate(over="ignore", invalid="ignore"):
        out = canonical(params.ell * v + params.affine_term - np.exp(v))
    return out


def derivative(params: MapParams, z):
    """Phase derivative ell - e^z; well defined on the cylinder."""
    return params.ell - np.exp(_val(z))


def param_derivative(params: MapParams, z=None):
    """Derivative of the map in the parameter c: 1 - (ell-1)/c.

    Independent of z; the argument is accepted for signature symmetry with
    the phase derivative.
    """
    return 1.0 - (params.ell - 1) / params.c


def orbit_derivative_parts(params: MapParams, z, n: int):
    """(unit phase, log magnitude) of the n-step orbit derivative at z."""
    if n < 1:
        raise ValueError("n must be >= 1")
    w = canonical(_val(z))
    log_mag = 0.0
    phase = 1.0 + 0.0j
    for _ in range(n):
        d = complex(derivative(params, w))
        a = abs(d)
        if a == 0.0:
            return 0.0j, -math.inf
        log_mag += math.log(a)
        phase *= d / a
        w = evaluate(params, w)
    return phase, log_mag


def orbit_derivative(params: MapParams, z, n: int) -> complex:
    """Chain-rule product of derivatives along the first n orbit points."""
    phase, log_mag = orbit_derivative_parts(params, z, n)
    if log_mag == -math.inf:
        return 0.0j
    if log_mag > 700.0:  # would overflow; return directed infinity
        return phase * math.inf
    return phase * math.exp(log_mag)


class OrbitTag(IntEnum):
    ATTRACTED_TO_LOG_C = 0
    BAKER_ESCAPE = 1
    ESCAPE_PLUS_INFINITY = 2
    UNRESOLVED = 3


@dataclass(frozen=True)
class OrbitClass:
    tag: OrbitTag
    iterations_used: int


def classify_orbit(params: MapParams, z, max_iter: int = defaults.MAX_ITER,
                   radius_eps: float = defaults.RADIUS_EPS) -> OrbitClass:
    """Fatou-trichotomy tag of a single orbit.

    Attracted once the orbit enters the radius_eps neighbourhood of log(c);
    Baker escape once Re < -2*ell (that half plane lies in the invariant
    Baker domain); escape to +infinity once Re exceeds the escape threshold
    and keeps growing for a confirmation window.  Unresolved otherwise.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if radius_eps <= 0:
        raise ValueError("radius_eps must be positive")
    target = canonical(params.log_c)
    thresh = params.escape_threshold
    baker = -2.0 * params.ell
    w = canonical(_val(z))
    streak = 0
    prev_re = -math.inf
    for it in range(max_iter + 1):
        re = w.real
        if math.isnan(re) or math.isnan(w.imag):
            return OrbitClass(OrbitTag.UNRESOLVED, it)
        if re < baker:
            return OrbitClass(OrbitTag.BAKER_ESCAPE, it)
        if math.isfinite(re) and math.isfinite(w.imag) \
                and cylinder_distance(w, target) < radius_eps:
            return OrbitClass(OrbitTag.ATTRACTED_TO_LOG_C, it)
        if re > thresh and re > prev_re:
            streak += 1
            if streak >= defaults.ESCAPE_CONFIRM:
                return OrbitClass(OrbitTag.ESCAPE_PLUS_INFINITY, it)
        else:
            streak = 0
        prev_re = re
        if it < max_iter:
            w = evaluate(params, w)
    return OrbitClass(OrbitTag.UNRESOLVED, max_iter)


def classify_window(params: MapParams, re_min: float, re_max: float,
                    nx: int, ny: int, max_iter: int = defaults.MAX_ITER,
                    radius_eps: float = defaults.RADIUS_EPS):
    """Vectorised classifier over a window (re_min, re_max) x full strip.

    Returns an int8 array of OrbitTag values, shape (ny, nx); rows run from
    Im = +pi down to -pi (image orientation).  Cell centres are sampled.
    Decision rules match classify_orbit exactly.
    """
    if nx < 1 or ny < 1:
        raise ValueError("resolution must be positive")
    res = np.linspace(re_min, re_max, nx, endpoint=False) + (re_max - re_min) / (2 * nx)
    ims = math.pi - (np.arange(ny) + 0.5) * TWO_PI / ny
    z = res[None, :] + 1j * ims[:, None]
    z = z.astype(np.complex128)

    tags = np.full(z.shape, int(OrbitTag.UNRESOLVED), dtype=np.int8)
    active = np.ones(z.shape, dtype=bool)
    streak = np.zeros(z.shape, dtype=np.int16)
    prev_re = np.full(z.shape, -np.inf)

    target = canonical(params.log_c)
    thresh = params.escape_threshold
    baker = -2.0 * params.ell

    with np.errstate(all="ignore"):
        for it in range(max_iter + 1):
            if not active.any():
                break
            re = z.real
            nan_mask = active & (np.isnan(re) | np.isnan(z.imag))
            if nan_mask.any():
                active &= ~nan_mask  # stays UNRESOLVED
            baker_mask = active & (re < baker)
            tags[baker_mask] = int(OrbitTag.BAKER_ESCAPE)
            active &= ~baker_mask
            att_mask = active & (cylinder_distance(z, target) < radius_eps)
            tags[att_mask] = int(OrbitTag.ATTRACTED_TO_LOG_C)
            active &= ~att_mask
            grow = active & (re > thresh) & (re > prev_re)
            streak[grow] += 1
            streak[active & ~grow] = 0
            esc_mask = active & (streak >= defaults.ESCAPE_CONFIRM)
            tags[esc_mask] = int(OrbitTag.ESCAPE_PLUS_INFINITY)
            active &= ~esc_mask
            prev_re = re.copy()
            if it < max_iter and active.any():
                z[active] = evaluate(params, z[active])
    return tags


@dataclass(frozen=True)
class PeriodicPoint:
    """A validated periodic point with its recomputable multiplier."""

    point: CylinderPoint
    period: int
    multiplier: complex
    branch_word: tuple = ()

    @property
    def is_repelling(self) -> bool:
        return abs(self.multiplier) > 1.0
