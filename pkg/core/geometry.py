"""Coordinate operators of the higher-order shearlet construction.

Points are pairs of doubles; every function accepts a single point or an
array whose last axis has length two and returns a new ndarray of the same
shape. Parameter objects are frozen so one instance can serve concurrent
sweeps.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from utils.config import Config
from utils.errors import ConfigurationError, DomainError


def _as_points(x):
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != 2:
        raise DomainError(f"points must have a trailing axis of length 2, got shape {pts.shape}")
    return pts


def _stack(x1, x2):
    return np.stack([x1, x2], axis=-1)


@dataclass(frozen=True)
class AlphaScale:
    """The anisotropic dilation diag(a, a^alpha)."""

    a: float
    alpha: float

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigurationError(f"scale a must be positive, got {self.a}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def factors(self):
        return self.a, self.a ** self.alpha

    @property
    def matrix(self):
        return np.diag(self.factors)

    @property
    def det(self):
        return self.a ** (1.0 + self.alpha)

    def compose(self, other):
        if other.alpha != self.alpha:
            raise ConfigurationError("cannot compose scalings with different alpha")
        return AlphaScale(self.a * other.a, self.alpha)

    def inverse_apply(self, x):
        pts = _as_points(x)
        f1, f2 = self.factors
        return _stack(pts[..., 0] / f1, pts[..., 1] / f2)


@dataclass(frozen=True)
class ShearParams:
    """l-th order shear S_r: x1 -> x1 + sum_m r_m x2^m."""

    r: tuple

    def __post_init__(self):
        coeffs = tuple(float(v) for v in np.atleast_1d(np.asarray(self.r, dtype=float)))
        object.__setattr__(self, 'r', coeffs)
        if len(coeffs) < 1:
            raise ConfigurationError("shear order must be at least 1")
        max_order = Config().get('geometry', 'max_shear_order', 4)
        if len(coeffs) > max_order:
            raise ConfigurationError(
                f"shear order {len(coeffs)} exceeds geometry.max_shear_order={max_order}")

    @property
    def order(self):
        return len(self.r)

    def negated(self):
        return ShearParams(tuple(-v for v in self.r))

    def offset(self, y):
        """sum_m r_m y^m, evaluated with Horner's rule."""
        y = np.asarray(y, dtype=float)
        acc = np.zeros_like(y)
        for coeff in reversed(self.r):
            acc = (acc + coeff) * y
        return acc

    def offset_range(self, lo, hi):
        """Exact min/max of the offset polynomial on [lo, hi]."""
        poly = np.polynomial.Polynomial((0.0,) + self.r)
        candidates = [lo, hi]
        for root in poly.deriv().roots():
            if abs(root.imag) < 1e-12 and lo < root.real < hi:
                candidates.append(root.real)
        values = poly(np.asarray(candidates))
        return float(values.min()), float(values.max())


@dataclass(frozen=True)
class HigherOrderParams:
    """A point (a, r, t) of the l-th order alpha-shearlet parameter set."""

    a: float
    alpha: float
    r: tuple
    t: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, 't', (float(self.t[0]), float(self.t[1])))
        object.__setattr__(self, 'r', ShearParams(self.r).r)
        AlphaScale(self.a, self.alpha)

    @property
    def scale(self):
        return AlphaScale(self.a, self.alpha)

    @property
    def shear(self):
        return ShearParams(self.r)

    @property
    def order(self):
        return len(self.r)

    @classmethod
    def from_bendlet(cls, params, alpha):
        return cls(a=params.a, alpha=alpha, r=(params.s, params.b), t=params.t)


@dataclass(frozen=True)
class BendletParams:
    """Cone-adapted bendlet parameters (a, s, b, t, iota)."""

    a: float
    s: float
    b: float
    t: tuple = (0.0, 0.0)
    iota: int = 1
    check_ranges: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 't', (float(self.t[0]), float(self.t[1])))
        if self.iota not in (-1, 1):
            raise DomainError(f"cone index must be -1 or +1, got {self.iota}")
        if self.check_ranges:
            if not 0.0 < self.a < 1.0:
                raise DomainError(f"cone-adapted scale must lie in (0, 1), got {self.a}")
            if not -1.0 <= self.s <= 1.0:
                raise DomainError(f"cone-adapted shear must lie in [-1, 1], got {self.s}")

    def as_higher_order(self, alpha):
        """Parameters of the horizontal-cone atom; for iota=-1 the translation is swapped."""
        t = self.t if self.iota == 1 else (self.t[1], self.t[0])
        return HigherOrderParams(a=self.a, alpha=alpha, r=(self.s, self.b), t=t)


def apply_alpha_scale(sc, x):
    pts = _as_points(x)
    f1, f2 = sc.factors
    return _stack(f1 * pts[..., 0], f2 * pts[..., 1])


def apply_shear(sh, x):
    pts = _as_points(x)
    return _stack(pts[..., 0] + sh.offset(pts[..., 1]), pts[..., 1].copy())


def apply_inverse_shear(sh, x):
    return apply_shear(sh.negated(), x)


def apply_cone_shear(sh, x):
    """Transposed shear of the vertical cone: x2 -> x2 + sum_m r_m x1^m."""
    return cone_swap(apply_shear(sh, cone_swap(x)))


def compose_first_order_shears(first, second):
    if first.order != 1 or second.order != 1:
        raise ConfigurationError("only first-order shears form a group")
    return ShearParams((first.r[0] + second.r[0],))


def representation_arg(p, x):
    """A^{-1} S_{-r} (x - t): signal coordinates -> generator coordinates."""
    pts = _as_points(x)
    shifted = _stack(pts[..., 0] - p.t[0], pts[..., 1] - p.t[1])
    return p.scale.inverse_apply(apply_inverse_shear(p.shear, shifted))


def representation_inverse(p, u):
    """t + S_r(A u): generator coordinates -> signal coordinates."""
    mapped = apply_shear(p.shear, apply_alpha_scale(p.scale, u))
    return _stack(mapped[..., 0] + p.t[0], mapped[..., 1] + p.t[1])


def cone_swap(x):
    pts = _as_points(x)
    return pts[..., ::-1].copy()


def jacobian_det(p):
    """|det| of u -> t + S_r(A u); shears preserve area."""
    return p.scale.det


def l2_normalization(p):
    return math.pow(p.a, -(1.0 + p.alpha) / 2.0)
