"""Piecewise-constant test signals with analytically known boundaries.

Every analytic region carries a level function that is >= 0 exactly on the
closed region; the quadrature engines locate boundary crossings through it.
Rasters are looked up by nearest pixel so they stay piecewise constant.
"""

import math
from dataclasses import dataclass

import numpy as np

from utils.errors import ConfigurationError, DomainError
from utils.logger import Logger

logger = Logger().get_logger('signals')

DEFAULT_DOMAIN = (-1.0, 1.0, -1.0, 1.0)
BOUNDARY_TOLERANCE = 1e-9
CORNER_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PointType:
    """Local graph expansion of a boundary point: slope s, half second derivative b, cone iota."""

    s: float
    b: float
    iota: int
    corner: bool = False

    def to_dict(self):
        return {"s": self.s, "b": self.b, "iota": self.iota, "corner": self.corner}


def _retype(s, b, iota):
    """Express x_i = g(x_j) in the cone where |slope| <= 1."""
    if abs(s) > 1.0 + CORNER_TOLERANCE:
        return PointType(1.0 / s, -b / s ** 3, -iota, corner=False)
    return PointType(s, b, iota, corner=abs(abs(s) - 1.0) <= CORNER_TOLERANCE)


class Signal:
    """Base class. Membership is evaluated on coordinate arrays of equal shape."""

    has_level = False
    is_constant = False
    inside_value = 1.0
    pixel_size = None

    def membership_xy(self, x1, x2):
        raise NotImplementedError

    def membership(self, x):
        pts = np.asarray(x, dtype=float)
        values = self.membership_xy(pts[..., 0], pts[..., 1])
        return float(values) if np.ndim(values) == 0 else values

    def level_xy(self, x1, x2):
        raise ConfigurationError(f"{type(self).__name__} has no level function")

    def constant_on(self, x1, x2, h1, h2):
        """True where the signal is provably constant on the box [x1 +- h1] x [x2 +- h2]."""
        return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2), np.asarray(h1), np.asarray(h2)).shape, bool)

    def boundary_type(self, p):
        raise ConfigurationError(f"{type(self).__name__} has no analytic boundary")

    def contains_box(self, box):
        return True

    @property
    def sup_norm(self):
        return abs(self.inside_value)

    def descriptor(self):
        raise NotImplementedError


class AnalyticRegion(Signal):
    """Indicator function of a region {level >= 0}."""

    has_level = True

    def membership_xy(self, x1, x2):
        return np.where(self.level_xy(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)) >= 0.0, 1.0, 0.0)

    def level_variation(self, x1, x2, rho):
        """Upper bound of |level(y) - level(x)| over |y - x| <= rho."""
        return np.full(np.broadcast(np.asarray(x1), np.asarray(x2)).shape, np.inf)

    def constant_on(self, x1, x2, h1, h2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        rho = np.hypot(h1, h2)
        return np.abs(self.level_xy(x1, x2)) > self.level_variation(x1, x2, rho)

    def _check_on_boundary(self, p):
        p = np.asarray(p, dtype=float)
        value = float(self.level_xy(p[0], p[1]))
        if abs(value) > BOUNDARY_TOLERANCE:
            raise DomainError(f"point {tuple(p)} is not on the boundary of {self!r} (level {value:.3e})")
        return p


class HalfPlane(AnalyticRegion):
    """{x1 <= o1 + s'(x2 - o2)} for iota=+1, {x2 <= o2 + s'(x1 - o1)} for iota=-1."""

    def __init__(self, normal_shear=0.0, offset=(0.0, 0.0), iota=1):
        if iota not in (-1, 1):
            raise ConfigurationError(f"half-plane orientation must be -1 or +1, got {iota}")
        self.normal_shear = float(normal_shear)
        self.offset = (float(offset[0]), float(offset[1]))
        self.iota = iota

    def level_xy(self, x1, x2):
        o1, o2 = self.offset
        if self.iota == 1:
            return o1 + self.normal_shear * (x2 - o2) - x1
        return o2 + self.normal_shear * (x1 - o1) - x2

    def level_variation(self, x1, x2, rho):
        return math.hypot(1.0, self.normal_shear) * np.asarray(rho, dtype=float) + 0.0 * np.asarray(x1)

    def boundary_type(self, p):
        self._check_on_boundary(p)
        return _retype(self.normal_shear, 0.0, self.iota)

    def descriptor(self):
        return {"type": "half_plane", "normal_shear": self.normal_shear,
                "offset": list(self.offset), "iota": self.iota}

    def __repr__(self):
        return f"HalfPlane(s'={self.normal_shear}, offset={self.offset}, iota={self.iota})"


class Disk(AnalyticRegion):
    def __init__(self, center=(0.0, 0.0), radius=1.0):
        if not radius > 0:
            raise ConfigurationError(f"disk radius must be positive, got {radius}")
        self.center = (float(center[0]), float(center[1]))
        self.radius = float(radius)

    def level_xy(self, x1, x2):
        d1 = x1 - self.center[0]
        d2 = x2 - self.center[1]
        return self.radius * self.radius - (d1 * d1 + d2 * d2)

    def level_variation(self, x1, x2, rho):
        distance = np.hypot(x1 - self.center[0], x2 - self.center[1])
        return (2.0 * distance + rho) * rho

    def boundary_type(self, p):
        p = self._check_on_boundary(p)
        d1 = p[0] - self.center[0]
        d2 = p[1] - self.center[1]
        r = self.radius
        if abs(d1) >= abs(d2):
            # x1 = c1 + sign * sqrt(r^2 - (x2 - c2)^2)
            sign = 1.0 if d1 >= 0 else -1.0
            u, w = d2, abs(d1)
            s, b, iota = -sign * u / w, -sign * r * r / (2.0 * w ** 3), 1
        else:
            sign = 1.0 if d2 >= 0 else -1.0
            u, w = d1, abs(d2)
            s, b, iota = -sign * u / w, -sign * r * r / (2.0 * w ** 3), -1
        return _retype(s, b, iota)

    def descriptor(self):
        return {"type": "disk", "center": list(self.center), "radius": self.radius}

    def __repr__(self):
        return f"Disk(center={self.center}, r={self.radius})"


class GraphRegion(AnalyticRegion):
    """{x1 <= g(x2 - p2)} (iota=+1) or {x2 <= g(x1 - p1)} (iota=-1).

    g(z) = p_iota + s'z + b'z^2 + sum_k h_k z^(k+3), with p_iota the coordinate
    of p along the graph's dependent axis.
    """

    def __init__(self, p=(0.0, 0.0), s=0.0, b=0.0, higher_order=(), iota=1):
        if iota not in (-1, 1):
            raise ConfigurationError(f"graph orientation must be -1 or +1, got {iota}")
        self.p = (float(p[0]), float(p[1]))
        self.s = float(s)
        self.b = float(b)
        self.higher_order = tuple(float(h) for h in higher_order)
        self.iota = iota
        base = self.p[0] if iota == 1 else self.p[1]
        self._poly = np.polynomial.Polynomial((base, self.s, self.b) + self.higher_order)

    def graph(self, z):
        return self._poly(np.asarray(z, dtype=float))

    def level_xy(self, x1, x2):
        if self.iota == 1:
            return self._poly(x2 - self.p[1]) - x1
        return self._poly(x1 - self.p[0]) - x2

    def level_variation(self, x1, x2, rho):
        z = np.abs(x2 - self.p[1] if self.iota == 1 else x1 - self.p[0])
        reach = z + rho
        slope = np.zeros_like(reach)
        for k, c in enumerate(self._poly.coef[1:], start=1):
            slope = slope + k * abs(c) * reach ** (k - 1)
        return rho * (1.0 + slope)

    def boundary_type(self, q):
        q = self._check_on_boundary(q)
        z = q[1] - self.p[1] if self.iota == 1 else q[0] - self.p[0]
        slope = float(self._poly.deriv(1)(z))
        bend = 0.5 * float(self._poly.deriv(2)(z))
        return _retype(slope, bend, self.iota)

    def descriptor(self):
        return {"type": "graph", "p": list(self.p), "s": self.s, "b": self.b,
                "higher_order": list(self.higher_order), "iota": self.iota}

    def __repr__(self):
        return f"GraphRegion(p={self.p}, s'={self.s}, b'={self.b}, H={self.higher_order}, iota={self.iota})"


class Complement(AnalyticRegion):
    def __init__(self, inner):
        if not isinstance(inner, AnalyticRegion):
            raise ConfigurationError("complement needs an analytic region")
        self.inner = inner

    def level_xy(self, x1, x2):
        return -self.inner.level_xy(x1, x2)

    def level_variation(self, x1, x2, rho):
        return self.inner.level_variation(x1, x2, rho)

    def membership_xy(self, x1, x2):
        return 1.0 - self.inner.membership_xy(x1, x2)

    def boundary_type(self, p):
        return self.inner.boundary_type(p)

    def descriptor(self):
        return {"type": "complement", "inner": self.inner.descriptor()}

    def __repr__(self):
        return f"Complement({self.inner!r})"


class Constant(Signal):
    is_constant = True

    def __init__(self, value=1.0):
        self.value = float(value)

    @property
    def inside_value(self):
        return self.value

    def membership_xy(self, x1, x2):
        return np.full(np.broadcast(np.asarray(x1), np.asarray(x2)).shape, self.value)

    def constant_on(self, x1, x2, h1, h2):
        return ~super().constant_on(x1, x2, h1, h2)

    def descriptor(self):
        return {"type": "constant", "value": self.value}

    def __repr__(self):
        return f"Constant({self.value})"


class Scaled(Signal):
    """c * signal."""

    def __init__(self, inner, factor):
        self.inner = inner
        self.factor = float(factor)

    @property
    def has_level(self):
        return self.inner.has_level

    @property
    def is_constant(self):
        return self.inner.is_constant

    @property
    def inside_value(self):
        return self.factor * self.inner.inside_value

    @property
    def pixel_size(self):
        return self.inner.pixel_size

    def contains_box(self, box):
        return self.inner.contains_box(box)

    def membership_xy(self, x1, x2):
        return self.factor * self.inner.membership_xy(x1, x2)

    def level_xy(self, x1, x2):
        return self.inner.level_xy(x1, x2)

    def constant_on(self, x1, x2, h1, h2):
        return self.inner.constant_on(x1, x2, h1, h2)

    def boundary_type(self, p):
        return self.inner.boundary_type(p)

    @property
    def sup_norm(self):
        return abs(self.factor) * self.inner.sup_norm

    def descriptor(self):
        return {"type": "scaled", "factor": self.factor, "inner": self.inner.descriptor()}

    def __repr__(self):
        return f"Scaled({self.inner!r}, {self.factor})"


class Swapped(Signal):
    """f(x2, x1); used to evaluate vertical-cone atoms through horizontal-cone ones."""

    def __init__(self, inner):
        self.inner = inner

    @property
    def has_level(self):
        return self.inner.has_level

    @property
    def is_constant(self):
        return self.inner.is_constant

    @property
    def inside_value(self):
        return self.inner.inside_value

    @property
    def pixel_size(self):
        size = self.inner.pixel_size
        return None if size is None else (size[1], size[0])

    @property
    def sup_norm(self):
        return self.inner.sup_norm

    def contains_box(self, box):
        x1lo, x1hi, x2lo, x2hi = box
        return self.inner.contains_box((x2lo, x2hi, x1lo, x1hi))

    def membership_xy(self, x1, x2):
        return self.inner.membership_xy(x2, x1)

    def level_xy(self, x1, x2):
        return self.inner.level_xy(x2, x1)

    def constant_on(self, x1, x2, h1, h2):
        return self.inner.constant_on(x2, x1, h2, h1)

    def boundary_type(self, p):
        inner = self.inner.boundary_type((p[1], p[0]))
        return PointType(inner.s, inner.b, -inner.iota, inner.corner)

    def descriptor(self):
        return {"type": "swapped", "inner": self.inner.descriptor()}

    def __repr__(self):
        return f"Swapped({self.inner!r})"


def _summed_area(indicator):
    return np.pad(indicator.astype(np.int64).cumsum(axis=0).cumsum(axis=1), ((1, 0), (1, 0)))


def _window_sum(table, r0, r1, c0, c1):
    """Sum over rows r0..r1 and columns c0..c1 inclusive; zero when r1 = r0 - 1 or c1 = c0 - 1."""
    return table[r1 + 1, c1 + 1] - table[r0, c1 + 1] - table[r1 + 1, c0] + table[r0, c0]


class RasterSignal(Signal):
    """Pixel image over a domain rectangle; row 0 is the top (largest x2)."""

    def __init__(self, values, domain=DEFAULT_DOMAIN, path=None):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.size == 0:
            raise ConfigurationError(f"raster values must be a non-empty 2D array, got shape {values.shape}")
        x1min, x1max, x2min, x2max = (float(v) for v in domain)
        if not (x1max > x1min and x2max > x2min):
            raise ConfigurationError(f"degenerate raster domain {domain}")
        self.values = values
        self.values.setflags(write=False)
        self.height, self.width = values.shape
        self.domain = (x1min, x1max, x2min, x2max)
        self.path = path

        # jumps between neighbouring pixels, with the zero outside the domain as a border
        padded = np.pad(values, 1)
        self._row_jumps = _summed_area(padded[:, 1:] != padded[:, :-1])
        self._column_jumps = _summed_area(padded[1:, :] != padded[:-1, :])

    @property
    def pixel_size(self):
        x1min, x1max, x2min, x2max = self.domain
        return (x1max - x1min) / self.width, (x2max - x2min) / self.height

    @property
    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def pixel_centers(self):
        x1min, x1max, x2min, x2max = self.domain
        dx, dy = self.pixel_size
        x1 = x1min + (np.arange(self.width) + 0.5) * dx
        x2 = x2max - (np.arange(self.height) + 0.5) * dy
        return x1, x2

    def contains_box(self, box):
        x1lo, x1hi, x2lo, x2hi = box
        x1min, x1max, x2min, x2max = self.domain
        return x1lo >= x1min and x1hi <= x1max and x2lo >= x2min and x2hi <= x2max

    def membership_xy(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        x1min, x1max, x2min, x2max = self.domain
        dx, dy = self.pixel_size
        col = np.floor((x1 - x1min) / dx).astype(np.int64)
        row = np.floor((x2max - x2) / dy).astype(np.int64)
        inside = (x1 >= x1min) & (x1 <= x1max) & (x2 >= x2min) & (x2 <= x2max)
        col = np.clip(col, 0, self.width - 1)
        row = np.clip(row, 0, self.height - 1)
        return np.where(inside, self.values[row, col], 0.0)

    def _padded_index(self, offset, step, count):
        return np.clip(np.floor(offset / step).astype(np.int64) + 1, 0, count + 1)

    def constant_on(self, x1, x2, h1, h2):
        x1, x2, h1, h2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, h1, h2)))
        x1min, _, _, x2max = self.domain
        dx, dy = self.pixel_size
        c0 = self._padded_index(x1 - h1 - x1min, dx, self.width)
        c1 = self._padded_index(x1 + h1 - x1min, dx, self.width)
        r0 = self._padded_index(x2max - (x2 + h2), dy, self.height)
        r1 = self._padded_index(x2max - (x2 - h2), dy, self.height)
        across = _window_sum(self._row_jumps, r0, r1, c0, c1 - 1)
        down = _window_sum(self._column_jumps, r0, r1 - 1, c0, c1)
        return (across == 0) & (down == 0)

    def descriptor(self):
        if self.path is None:
            raise ConfigurationError("only rasters loaded from a file have a descriptor")
        return {"type": "raster", "path": str(self.path), "domain": list(self.domain)}

    def __repr__(self):
        return f"RasterSignal({self.width}x{self.height}, domain={self.domain})"


def membership(sig, x):
    return sig.membership(x)


def boundary_type(sig, p):
    return sig.boundary_type(p)


def rasterize(sig, n, domain=DEFAULT_DOMAIN, supersample=False):
    """Sample sig at the centres of an n x n pixel grid (4 x 4 average when supersampling)."""
    if int(n) < 2:
        raise ConfigurationError(f"raster resolution must be at least 2, got {n}")
    n = int(n)
    x1min, x1max, x2min, x2max = (float(v) for v in domain)
    dx = (x1max - x1min) / n
    dy = (x2max - x2min) / n
    offsets = (np.arange(4) + 0.5) / 4.0 if supersample else np.array([0.5])

    values = np.zeros((n, n))
    for ox in offsets:
        x1 = x1min + (np.arange(n) + ox) * dx
        for oy in offsets:
            x2 = x2max - (np.arange(n) + oy) * dy
            values += sig.membership_xy(x1[None, :], x2[:, None])
    values /= offsets.size ** 2
    logger.debug(f"Rasterized {sig!r} at {n}x{n} (supersample={supersample})")
    return RasterSignal(values, (x1min, x1max, x2min, x2max))


def region_from_descriptor(descriptor):
    """Build a signal from its JSON descriptor."""
    try:
        kind = descriptor["type"]
        if kind == "disk":
            return Disk(descriptor.get("center", (0.0, 0.0)), descriptor["radius"])
        if kind == "half_plane":
            return HalfPlane(descriptor.get("normal_shear", 0.0), descriptor.get("offset", (0.0, 0.0)),
                             int(descriptor.get("iota", 1)))
        if kind == "graph":
            return GraphRegion(descriptor.get("p", (0.0, 0.0)), descriptor.get("s", 0.0), descriptor.get("b", 0.0),
                               descriptor.get("higher_order", ()), int(descriptor.get("iota", 1)))
        if kind == "complement":
            return Complement(region_from_descriptor(descriptor["inner"]))
        if kind == "constant":
            return Constant(descriptor.get("value", 1.0))
        if kind == "scaled":
            return Scaled(region_from_descriptor(descriptor["inner"]), descriptor["factor"])
        if kind == "swapped":
            return Swapped(region_from_descriptor(descriptor["inner"]))
        if kind == "raster":
            from core.raster_io import load_raster
            return load_raster(descriptor["path"], descriptor.get("domain", DEFAULT_DOMAIN))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid signal descriptor {descriptor!r}: {e}") from e
    raise ConfigurationError(f"unknown signal type {descriptor.get('type')!r}")


def figure_radii():
    return tuple(round(0.10 + 0.05 * k, 2) for k in range(8))


def disk_boundary_point(radius, angle=0.0, center=(0.0, 0.0)):
    return (center[0] + radius * math.cos(angle), center[1] + radius * math.sin(angle))
