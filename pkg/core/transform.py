"""Bendlet atoms and continuous transform coefficients.

Vertical-cone atoms (iota=-1) are the horizontal-cone atoms of the swapped
signal at the swapped translation, so every coefficient is computed by one
horizontal-cone path.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from core.generators import default_generator
from core.geometry import (BendletParams, HigherOrderParams, cone_swap, l2_normalization,
                           representation_arg)
from core.quadrature import AdaptiveQuadrature, AtomMap, LineFamilyQuadrature
from core.signals import Swapped
from utils.config import Config
from utils.errors import ConfigurationError
from utils.logger import Logger
from utils.performance import PerformanceLogger

perf = PerformanceLogger()

METHODS = ("grid", "adaptive")


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "grid"
    q: int = 16
    tol: float = 1e-8
    line_samples: int = 64
    max_depth: int = 14

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown quadrature method {self.method!r}, expected one of {METHODS}")
        if int(self.q) < 4:
            raise ConfigurationError(f"oversampling q must be at least 4, got {self.q}")
        if not self.tol > 0:
            raise ConfigurationError(f"tolerance must be positive, got {self.tol}")
        if int(self.max_depth) < 1:
            raise ConfigurationError(f"max_depth must be at least 1, got {self.max_depth}")

    @classmethod
    def from_config(cls, **overrides):
        cfg = Config().get('transform')
        values = {
            "method": cfg.get('method', 'grid'),
            "q": cfg.get('q', 16),
            "tol": cfg.get('tol', 1e-8),
            "line_samples": cfg.get('line_samples', 64),
            "max_depth": cfg.get('max_depth', 14),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self):
        return {"method": self.method, "q": self.q, "tol": self.tol,
                "line_samples": self.line_samples, "max_depth": self.max_depth}


class Atom:
    """psi_{a,r,t} for higher-order parameters, or psi_{a,s,b,t,iota} for bendlet parameters."""

    def __init__(self, generator, params, alpha=None, iota=1):
        self.generator = generator
        if isinstance(params, BendletParams):
            if alpha is None:
                raise ConfigurationError("bendlet atoms need alpha")
            self.iota = params.iota
            self.params = params.as_higher_order(alpha)
        else:
            if iota not in (-1, 1):
                raise ConfigurationError(f"cone index must be -1 or +1, got {iota}")
            self.iota = iota
            self.params = params
        self.normalization = l2_normalization(self.params)
        box = AtomMap(self.params).bounding_box(generator.box)
        self.support_box = box if self.iota == 1 else (box[2], box[3], box[0], box[1])

    def _in_support(self, pts):
        x1lo, x1hi, x2lo, x2hi = self.support_box
        return ((pts[..., 0] >= x1lo) & (pts[..., 0] <= x1hi)
                & (pts[..., 1] >= x2lo) & (pts[..., 1] <= x2hi))

    def __call__(self, x):
        pts = np.asarray(x, dtype=float)
        frame = pts if self.iota == 1 else cone_swap(pts)
        values = self.normalization * self.generator(representation_arg(self.params, frame))
        values = np.where(self._in_support(pts), values, 0.0)
        return float(values) if values.ndim == 0 else values

    def __repr__(self):
        p = self.params
        return f"Atom(a={p.a}, alpha={p.alpha}, r={p.r}, t={p.t}, iota={self.iota})"


@dataclass
class DecayCurve:
    """|<f, psi_{a_j,s,b,t,iota}>| over dyadic scales a_j = 2^-j."""

    j: np.ndarray
    scales: np.ndarray
    values: np.ndarray
    s: float
    b: float
    t: tuple
    iota: int
    floor: float = 1e-14
    alpha: float = 0.335
    generator: dict = field(default_factory=dict)
    magnitudes: np.ndarray = field(init=False)
    floored: np.ndarray = field(init=False)

    def __post_init__(self):
        self.j = np.asarray(self.j, dtype=int)
        self.scales = np.asarray(self.scales, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if not (len(self.j) == len(self.scales) == len(self.values)):
            raise ConfigurationError("decay curve arrays must have equal length")
        if len(self.scales) > 1 and not np.all(np.diff(self.scales) < 0):
            raise ConfigurationError("decay curve scales must be strictly decreasing")
        raw = np.abs(self.values)
        self.floored = raw < self.floor
        self.magnitudes = np.where(self.floored, self.floor, raw)

    def __len__(self):
        return len(self.scales)

    @property
    def finest_magnitude(self):
        return float(self.magnitudes[-1])

    def all_floored_after(self, j):
        mask = self.j > j
        if not mask.any():
            mask = np.ones_like(self.floored)
        return bool(np.all(self.floored[mask]))


class BendletTransform:
    """Coefficient engine bundling generator, alpha, quadrature and thread count"""

    def __init__(self, generator=None, alpha=None, quadrature=None, floor=None, threads=None):
        self.logger = Logger().get_logger('transform')
        config = Config()
        self.generator = generator or default_generator()
        self.alpha = float(alpha if alpha is not None else config.get('transform', 'alpha', 0.335))
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")
        self.quadrature = quadrature or QuadratureSpec.from_config()
        self.floor = float(floor if floor is not None else config.get('transform', 'floor', 1e-14))
        self.threads = resolve_threads(threads)

        if self.quadrature.method == "grid":
            self._engine = LineFamilyQuadrature(self.generator, self.quadrature.q, self.quadrature.line_samples)
        else:
            self._engine = AdaptiveQuadrature(self.generator, self.quadrature.tol, self.quadrature.max_depth)
        self.logger.debug(f"Transform ready: alpha={self.alpha}, {self.quadrature}, threads={self.threads}")

    def with_quadrature(self, quadrature):
        return BendletTransform(self.generator, self.alpha, quadrature, self.floor, self.threads)

    def atom(self, params, iota=1):
        return Atom(self.generator, params, self.alpha, iota)

    def coefficient(self, sig, params, iota=1):
        """<sig, psi> for bendlet parameters or for higher-order parameters in cone ``iota``."""
        if isinstance(params, BendletParams):
            iota = params.iota
            hp = params.as_higher_order(self.alpha)
        else:
            hp = params
        target = sig if iota == 1 else Swapped(sig)
        return float(self._engine.integrate(target, hp))

    @perf.log_execution_time
    def decay_curve(self, sig, s, b, t, iota=1, j_min=None, j_max=None):
        j_min, j_max = self._scale_range(j_min, j_max)
        js = np.arange(j_min, j_max + 1)
        scales = 2.0 ** (-js.astype(float))
        values = [self.coefficient(sig, BendletParams(float(a), s, b, t, iota)) for a in scales]
        curve = DecayCurve(js, scales, values, float(s), float(b), (float(t[0]), float(t[1])), iota,
                           floor=self.floor, alpha=self.alpha, generator=self.generator.descriptor())
        self.logger.debug(f"Decay curve s={s}, b={b}, t={t}, iota={iota}: "
                          f"{int(curve.floored.sum())}/{len(curve)} floored")
        return curve

    @perf.log_execution_time
    def sweep(self, sig, t, iota, s_grid, b_grid, j_min=None, j_max=None):
        """One decay curve per (s, b), ordered s-major; each cell is computed independently."""
        s_grid = [float(s) for s in s_grid]
        b_grid = [float(b) for b in b_grid]
        if not s_grid or not b_grid:
            raise ConfigurationError("sweep grids must be non-empty")
        j_min, j_max = self._scale_range(j_min, j_max)
        cells = [(s, b) for s in s_grid for b in b_grid]
        self.logger.info(f"Sweeping {len(cells)} (s, b) cells at t={tuple(t)}, iota={iota}, "
                         f"j={j_min}..{j_max} on {self.threads} threads")

        def run(cell):
            return self.decay_curve(sig, cell[0], cell[1], t, iota, j_min, j_max)

        if self.threads <= 1 or len(cells) == 1:
            return [run(cell) for cell in cells]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(run, cells))

    def qp_shear_identity_check(self, p, a, s, t, samples=1000, seed=0):
        """max |psi_{a,s,0,t}(Q_p x) - psi_{a,s+2p t2,p,(t1+p t2^2,t2)}(x)| at alpha = 0."""
        if int(samples) < 1:
            raise ConfigurationError("qp_shear_identity_check needs at least one sample")
        t1, t2 = float(t[0]), float(t[1])
        left = Atom(self.generator, HigherOrderParams(a=a, alpha=0.0, r=(s, 0.0), t=(t1, t2)))
        right = Atom(self.generator, HigherOrderParams(a=a, alpha=0.0, r=(s + 2.0 * p * t2, p),
                                                       t=(t1 + p * t2 * t2, t2)))
        x1lo, x1hi, x2lo, x2hi = right.support_box
        rng = np.random.default_rng(seed)
        x = np.stack([rng.uniform(x1lo, x1hi, int(samples)), rng.uniform(x2lo, x2hi, int(samples))], axis=-1)
        qx = np.stack([x[:, 0] - p * x[:, 1] ** 2, x[:, 1]], axis=-1)
        deviation = float(np.max(np.abs(left(qx) - right(x))))
        self.logger.debug(f"Q_p identity (p={p}, a={a}, s={s}, t={t}): max deviation {deviation:.3e}")
        return deviation

    def atom_l2_norm(self, atom, rows=512, samples=2049):
        """L2 norm by line-wise trapezoid quadrature in signal coordinates."""
        p = atom.params
        amap = AtomMap(p)
        (lo1, hi1), (lo2, hi2) = self.generator.box
        y = amap.t2 + amap.f2 * (lo2 + (np.arange(rows) + 0.5) * (hi2 - lo2) / rows)
        dy = amap.f2 * (hi2 - lo2) / rows
        start = amap.t1 + amap.a * lo1 + p.shear.offset(y - amap.t2)
        frac = np.linspace(0.0, 1.0, samples)
        x1 = start[:, None] + amap.a * (hi1 - lo1) * frac[None, :]
        x2 = np.broadcast_to(y[:, None], x1.shape)
        pts = np.stack([x1, x2], axis=-1)
        if atom.iota == -1:
            pts = cone_swap(pts)
        values = atom(pts) ** 2
        dx = amap.a * (hi1 - lo1) / (samples - 1)
        per_row = dx * (values.sum(axis=1) - 0.5 * (values[:, 0] + values[:, -1]))
        return float(np.sqrt(dy * per_row.sum()))

    def _scale_range(self, j_min, j_max):
        cfg = Config()
        j_min = int(j_min if j_min is not None else cfg.get('transform', 'j_min', 4))
        j_max = int(j_max if j_max is not None else cfg.get('transform', 'j_max', 8))
        if j_min >= j_max:
            raise ConfigurationError(f"j_min must be smaller than j_max, got {j_min} >= {j_max}")
        if j_min < 1:
            raise ConfigurationError(f"j_min must be at least 1 for cone-adapted scales, got {j_min}")
        return j_min, j_max


def resolve_threads(threads=None):
    """Explicit value, then BENDLAB_THREADS, then runtime.threads; 0 means all cores."""
    if threads is None:
        env = os.environ.get('BENDLAB_THREADS')
        if env:
            try:
                threads = int(env)
            except ValueError as e:
                raise ConfigurationError(f"BENDLAB_THREADS must be an integer, got {env!r}") from e
        else:
            threads = Config().get('runtime', 'threads', 0)
    threads = int(threads)
    if threads < 0:
        raise ConfigurationError(f"thread count must be non-negative, got {threads}")
    return threads if threads > 0 else (os.cpu_count() or 1)


def atom_eval(at, x):
    return at(x)


def coefficient(sig, params, quad=None, generator=None, alpha=None):
    return BendletTransform(generator, alpha, quad, threads=1).coefficient(sig, params)


def decay_curve(sig, s, b, t, iota, j_min, j_max, quad=None, generator=None, alpha=None):
    return BendletTransform(generator, alpha, quad, threads=1).decay_curve(sig, s, b, t, iota, j_min, j_max)


def sweep(sig, t, iota, s_grid, b_grid, j_min, j_max, quad=None, generator=None, alpha=None, threads=None):
    return BendletTransform(generator, alpha, quad, threads=threads).sweep(sig, t, iota, s_grid, b_grid,
                                                                           j_min, j_max)


def qp_shear_identity_check(gen, p, a, s, t, samples=1000, seed=0):
    return BendletTransform(gen, alpha=0.0, threads=1).qp_shear_identity_check(p, a, s, t, samples, seed)
