"""Separable compactly supported generators psi = psi1 (x) phi1.

psi1 is a Daubechies wavelet sampled by the cascade algorithm and evaluated
by linear interpolation; phi1 is a centered cardinal B-spline. The pair is
normalized to a unit-width box so that the continuous scale a measures the
width of an atom on the image domain.
"""

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
import pywt
from scipy.interpolate import BSpline, make_interp_spline

from utils.config import Config
from utils.errors import ConfigurationError
from utils.logger import Logger
from utils.performance import PerformanceLogger

logger = Logger().get_logger('generators')
perf = PerformanceLogger()

MAX_VANISHING_MOMENTS = 10
MOMENT_TOLERANCE = 1e-6
CONDITION_TOLERANCE = 1e-8


def _legendre_basis(x, lo, hi, degree):
    z = (2.0 * np.asarray(x, dtype=float) - (lo + hi)) / (hi - lo)
    return np.polynomial.legendre.legvander(z, degree)


def project_out_moments(values, weights, nodes, count, lo, hi, pin_ends=False):
    """Smallest change of ``values`` making sum(w * v * p(x)) vanish for deg p < count.

    With ``pin_ends`` the first and last entries are left untouched.
    """
    values = np.asarray(values, dtype=float)
    if count <= 0:
        return values.copy()
    basis = _legendre_basis(nodes, lo, hi, count - 1).T * weights
    free = basis.copy()
    if pin_ends:
        free[:, [0, -1]] = 0.0
    residual = basis @ values
    correction, *_ = np.linalg.lstsq(basis @ free.T, residual, rcond=None)
    return values - free.T @ correction


class Wavelet1D:
    """Sampled one-dimensional wavelet with M vanishing moments."""

    def __init__(self, grid, samples, vanishing_moments, name="wavelet"):
        self.grid = np.asarray(grid, dtype=float)
        self.samples = np.asarray(samples, dtype=float)
        if self.grid.shape != self.samples.shape or self.grid.size < 2:
            raise ConfigurationError("wavelet grid and samples must be equal-length arrays")
        self.name = name
        self.vanishing_moments = int(vanishing_moments)
        self.lo = float(self.grid[0])
        self.hi = float(self.grid[-1])
        self.step = float(self.grid[1] - self.grid[0])
        self.sup_norm = float(np.max(np.abs(self.samples)))
        if not np.isfinite(self.sup_norm):
            raise ConfigurationError(f"{name}: samples are not bounded")

        self._interpolant = make_interp_spline(self.grid, self.samples, k=1)
        self._primitive = self._interpolant.antiderivative()
        self._primitive_lo = float(self._primitive(self.lo))
        self._chain = (self._primitive, self._primitive.antiderivative(), self._primitive.antiderivative(2))

    @property
    def length(self):
        return self.hi - self.lo

    @property
    def trapezoid_weights(self):
        w = np.full(self.grid.size, self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        out = np.zeros_like(x)
        out[inside] = self._interpolant(x[inside])
        return out

    def antiderivative(self, x):
        """Integral of the interpolant from lo to x (constant outside the support)."""
        clipped = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        return self._primitive(clipped) - self._primitive_lo

    def primitives(self, x):
        """First, second and third antiderivatives on the support, each the primitive of the one before."""
        clipped = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        return tuple(p(clipped) for p in self._chain)

    def moment(self, k):
        return float(np.sum(self.trapezoid_weights * self.grid ** k * self.samples))

    def abs_moment(self, k):
        return float(np.sum(self.trapezoid_weights * np.abs(self.grid ** k * self.samples)))

    def moment_errors(self):
        """Relative moment magnitudes |int x^k psi| / int |x^k psi| for k < M."""
        return [abs(self.moment(k)) / max(self.abs_moment(k), np.finfo(float).tiny)
                for k in range(self.vanishing_moments)]

    def verify_moments(self, tolerance=MOMENT_TOLERANCE):
        return all(err <= tolerance for err in self.moment_errors())

    def principal_center(self):
        """Zero of psi where |int_lo^x psi| peaks."""
        primitive = np.concatenate(([0.0], np.cumsum(0.5 * self.step * (self.samples[1:] + self.samples[:-1]))))
        i = int(np.argmax(np.abs(primitive)))
        for j in (i - 1, i):
            if 0 <= j < self.samples.size - 1:
                v0, v1 = self.samples[j], self.samples[j + 1]
                if v0 == 0.0:
                    return float(self.grid[j])
                if v0 * v1 < 0.0:
                    return float(self.grid[j] + self.step * v0 / (v0 - v1))
        return float(self.grid[i])

    def l2_norm_squared(self):
        v0, v1 = self.samples[:-1], self.samples[1:]
        return float(np.sum(self.step / 3.0 * (v0 * v0 + v0 * v1 + v1 * v1)))


class Window1D:
    """Centered cardinal B-spline of order k (degree k-1) on [-k/2, k/2]."""

    def __init__(self, order):
        if int(order) < 2:
            raise ConfigurationError(f"spline order must be at least 2, got {order}")
        self.order = int(order)
        self.knots = np.arange(self.order + 1, dtype=float) - self.order / 2.0
        self.lo = float(self.knots[0])
        self.hi = float(self.knots[-1])
        self.smoothness = self.order - 2
        self._spline = BSpline.basis_element(self.knots, extrapolate=False)
        self._primitive = self._spline.antiderivative()
        self._chain = (self._primitive, self._spline.antiderivative(2), self._spline.antiderivative(3))
        self._primitive_lo = float(self._primitive(self.lo))
        self._total = float(self._primitive(self.hi)) - self._primitive_lo

        if not abs(self.value_at_zero) > CONDITION_TOLERANCE:
            raise ConfigurationError("window must not vanish at the origin")

    @property
    def length(self):
        return self.hi - self.lo

    @property
    def value_at_zero(self):
        return float(self(np.array([0.0]))[0])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        out = np.zeros_like(x)
        out[inside] = np.nan_to_num(self._spline(x[inside]))
        return out

    def antiderivative(self, x):
        x = np.asarray(x, dtype=float)
        clipped = np.clip(x, self.lo, self.hi)
        out = np.nan_to_num(self._primitive(clipped)) - self._primitive_lo
        out = np.where(x >= self.hi, self._total, out)
        return np.where(x <= self.lo, 0.0, out)

    def primitives(self, x):
        clipped = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        return tuple(np.nan_to_num(p(clipped)) for p in self._chain)

    def l2_norm_squared(self, samples=8193):
        x, step = np.linspace(self.lo, self.hi, samples, retstep=True)
        y = self(x) ** 2
        return float(step * (y.sum() - 0.5 * (y[0] + y[-1])))


@dataclass
class TheoremConditionReport:
    """Numerical values behind the lower-bound hypotheses of the classification theorem."""

    phi_at_zero: float
    lower_parabola_integral: float
    upper_parabola_integral: float
    smoothness: int
    vanishing_moments: int
    flags: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.flags.values())

    def rows(self):
        return [
            ("phi1(0)", self.phi_at_zero, self.flags["phi_at_zero"]),
            ("int_{x1<=-x2^2} psi1", self.lower_parabola_integral, self.flags["lower_parabola"]),
            ("int_{x1>=x2^2} psi1", self.upper_parabola_integral, self.flags["upper_parabola"]),
            ("L - M", float(self.smoothness - self.vanishing_moments), self.flags["smoothness"]),
        ]

    def to_dict(self):
        return asdict(self)


class GeneratorPair:
    """psi(u) = psi1(c + L1 u1) * phi1(L2 u2) on the box [u1lo, u1hi] x [-1/2, 1/2]."""

    def __init__(self, psi1, phi1, depth=None):
        self.logger = Logger().get_logger('generators.pair')
        self.psi1 = psi1
        self.phi1 = phi1
        self.depth = depth
        self.center = psi1.principal_center()
        self.psi_scale = psi1.length
        self.phi_scale = phi1.length
        self.box = (
            ((psi1.lo - self.center) / self.psi_scale, (psi1.hi - self.center) / self.psi_scale),
            (phi1.lo / self.phi_scale, phi1.hi / self.phi_scale),
        )
        self.psi_total = float(self.psi_antiderivative(np.array([self.box[0][1]]))[0])
        self.phi_total = float(self.phi_antiderivative(np.array([self.box[1][1]]))[0])
        self.sup_norm = psi1.sup_norm * float(np.max(phi1(np.linspace(phi1.lo, phi1.hi, 257))))
        self.psi_l1_norm = psi1.abs_moment(0) / self.psi_scale
        self.half_plane_integrals = self._parabola_integrals()
        self.l2_norm = float(np.sqrt(psi1.l2_norm_squared() / self.psi_scale
                                     * phi1.l2_norm_squared() / self.phi_scale))

        self.conditions = verify_theorem_conditions(self)
        self.logger.info(f"Built generator {self.name} (box={self.box}, center={self.center:.6f})")

    @property
    def name(self):
        return f"{self.psi1.name}x{self.phi1.order}spline"

    @property
    def vanishing_moments(self):
        return self.psi1.vanishing_moments

    def psi(self, u1):
        return self.psi1(self.center + self.psi_scale * np.asarray(u1, dtype=float))

    def phi(self, u2):
        return self.phi1(self.phi_scale * np.asarray(u2, dtype=float))

    def psi_antiderivative(self, u1):
        return self.psi1.antiderivative(self.center + self.psi_scale * np.asarray(u1, dtype=float)) / self.psi_scale

    def phi_antiderivative(self, u2):
        return self.phi1.antiderivative(self.phi_scale * np.asarray(u2, dtype=float)) / self.phi_scale

    def psi_primitives(self, u1):
        """Antiderivative chain of psi in box coordinates, for panel moments."""
        x = self.center + self.psi_scale * np.asarray(u1, dtype=float)
        return tuple(p / self.psi_scale ** k for k, p in enumerate(self.psi1.primitives(x), start=1))

    def phi_primitives(self, u2):
        x = self.phi_scale * np.asarray(u2, dtype=float)
        return tuple(p / self.phi_scale ** k for k, p in enumerate(self.phi1.primitives(x), start=1))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return self.evaluate(u[..., 0], u[..., 1])

    def evaluate(self, u1, u2):
        (lo1, hi1), (lo2, hi2) = self.box
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        inside = (u1 >= lo1) & (u1 <= hi1) & (u2 >= lo2) & (u2 <= hi2)
        return np.where(inside, self.psi(u1) * self.phi(u2), 0.0)

    def _parabola_integrals(self):
        """int over the box of psi on {u1 <= -u2^2} and on {u1 >= u2^2}, exact in u2."""
        u1 = (self.psi1.grid - self.center) / self.psi_scale
        values = self.psi1.samples
        weights = self.psi1.trapezoid_weights / self.psi_scale
        half = self.box[1][1]
        lower = np.where(u1 <= 0.0, np.minimum(2.0 * np.sqrt(np.clip(-u1, 0.0, None)), 2.0 * half), 0.0)
        upper = np.where(u1 >= 0.0, np.minimum(2.0 * np.sqrt(np.clip(u1, 0.0, None)), 2.0 * half), 0.0)
        return float(np.sum(weights * values * lower)), float(np.sum(weights * values * upper))

    def descriptor(self):
        return {
            "wavelet": {"M": self.vanishing_moments, "depth": self.depth},
            "window": {"order": self.phi1.order},
            "box": [list(self.box[0]), list(self.box[1])],
            "center": "argmax |int psi|",
        }

    @classmethod
    def from_descriptor(cls, descriptor):
        try:
            wavelet = descriptor.get("wavelet", {})
            window = descriptor.get("window", {})
            defaults = Config().get('generator')
            moments = int(wavelet.get("M", defaults.get('vanishing_moments', 8)))
            depth = int(wavelet.get("depth", defaults.get('cascade_depth', 10)))
            order = int(window.get("order", defaults.get('window_order', 11)))
        except (AttributeError, TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid generator descriptor {descriptor!r}: {e}") from e
        return build_generator(moments, depth, order)


@perf.log_execution_time
def build_daubechies(M, depth=None):
    """Daubechies wavelet with M vanishing moments sampled by the cascade algorithm."""
    if depth is None:
        depth = Config().get('generator', 'cascade_depth', 10)
    if not isinstance(M, (int, np.integer)) or not 1 <= M <= MAX_VANISHING_MOMENTS:
        raise ConfigurationError(f"unsupported number of vanishing moments: {M!r} (expected 1..{MAX_VANISHING_MOMENTS})")
    if depth < 8:
        raise ConfigurationError(f"cascade depth must be at least 8, got {depth}")

    wavelet = pywt.Wavelet(f"db{M}")
    _phi, psi, x = wavelet.wavefun(level=depth)
    n = min(len(x), len(psi))
    grid = np.asarray(x[:n], dtype=float)
    samples = np.asarray(psi[:n], dtype=float)

    weights = np.full(grid.size, grid[1] - grid[0])
    weights[0] = weights[-1] = 0.5 * weights[0]
    samples[0] = samples[-1] = 0.0
    samples = project_out_moments(samples, weights, grid, M, grid[0], grid[-1], pin_ends=True)

    result = Wavelet1D(grid, samples, M, name=f"db{M}")
    errors = result.moment_errors()
    if not result.verify_moments():
        raise ConfigurationError(f"db{M}: moment check failed, relative errors {errors}")
    logger.debug(f"db{M} depth={depth}: support [{result.lo}, {result.hi}], max relative moment {max(errors):.2e}")
    return result


def build_spline_window(order):
    return Window1D(order)


@lru_cache(maxsize=16)
def build_generator(M=8, depth=10, order=11):
    return GeneratorPair(build_daubechies(M, depth), build_spline_window(order), depth=depth)


def default_generator():
    cfg = Config().get('generator')
    return build_generator(cfg.get('vanishing_moments', 8), cfg.get('cascade_depth', 10), cfg.get('window_order', 11))


def eval_generator(g, x):
    return g(x)


def verify_theorem_conditions(g):
    """Report phi1(0), the two parabolic half-plane integrals of psi1 and the L > M check."""
    lower, upper = g.half_plane_integrals
    report = TheoremConditionReport(
        phi_at_zero=g.phi1.value_at_zero,
        lower_parabola_integral=lower,
        upper_parabola_integral=upper,
        smoothness=g.phi1.smoothness,
        vanishing_moments=g.vanishing_moments,
    )
    report.flags = {
        "phi_at_zero": abs(report.phi_at_zero) > CONDITION_TOLERANCE,
        "lower_parabola": abs(lower) > CONDITION_TOLERANCE,
        "upper_parabola": abs(upper) > CONDITION_TOLERANCE,
        "smoothness": report.smoothness > report.vanishing_moments,
    }
    for name, ok in report.flags.items():
        if not ok:
            logger.warning(f"Generator {g.name}: condition '{name}' fails; decay lower bounds are not guaranteed")
    return report


def save_descriptor(g, path):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(g.descriptor(), f, indent=2, sort_keys=True)


def load_descriptor(path):
    try:
        with open(path, 'r', encoding='utf-8') as f:
            descriptor = json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"cannot read generator descriptor {path}: {e}") from e
    return GeneratorPair.from_descriptor(descriptor)
