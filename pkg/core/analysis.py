"""Decay-rate fitting and classification of boundary points.

A point is classified by sweeping (s, b) in both cones, picking the curve
with the largest finest-scale magnitude and matching its fitted slope to
the nearest theoretical rate on a log scale.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from core.geometry import BendletParams
from core.signals import PointType
from core.transform import BendletTransform
from utils.config import Config
from utils.errors import ConfigurationError, FitError
from utils.logger import Logger
from utils.performance import PerformanceLogger

logger = Logger().get_logger('analysis')
perf = PerformanceLogger()

OFF_BOUNDARY = "OFF_BOUNDARY"
WRONG_ORIENTATION = "WRONG_ORIENTATION"
WRONG_BENDING = "WRONG_BENDING"
MATCHED = "MATCHED"
CASES = (OFF_BOUNDARY, WRONG_ORIENTATION, WRONG_BENDING, MATCHED)

FLAG_UNRESOLVED = "UNRESOLVED"
FLAG_CONE_CORNER = "CONE_CORNER"
FLAG_ALPHA = "ALPHA_OUTSIDE_LOWER_BOUND"

MAX_PEAK_MOVES = 50


@dataclass
class RateFit:
    """Least-squares fit |c_j| ~ C a_j^slope over the non-floored points."""

    slope: float
    intercept: float
    residual: float
    points_used: int
    floored_excluded: int
    all_floored: bool = False

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "residual": self.residual,
                "points_used": self.points_used, "floored_excluded": self.floored_excluded,
                "all_floored": self.all_floored}


@dataclass(frozen=True)
class TheoreticalRates:
    alpha: object
    vanishing_moments: int
    matched: object
    wrong_bending: object
    wrong_shear: object
    off_boundary: float = math.inf

    def ordered(self):
        """Finite rates from slowest to fastest decay, with their case labels."""
        return [(MATCHED, float(self.matched)), (WRONG_BENDING, float(self.wrong_bending)),
                (WRONG_ORIENTATION, float(self.wrong_shear))]


@dataclass
class ClassificationResult:
    case: str
    t: Tuple[float, float]
    s: Optional[float] = None
    b: Optional[float] = None
    iota: Optional[int] = None
    rate: Optional[float] = None
    residual: Optional[float] = None
    normal: Optional[Tuple[float, float]] = None
    curvature: Optional[float] = None
    confidence: float = 0.0
    grid_step: Optional[Tuple[float, float]] = None
    flags: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "case": self.case,
            "t": list(self.t),
            "s": self.s,
            "b": self.b,
            "iota": self.iota,
            "rate": self.rate,
            "residual": self.residual,
            "normal": list(self.normal) if self.normal is not None else None,
            "curvature": self.curvature,
            "confidence": self.confidence,
            "grid_step": list(self.grid_step) if self.grid_step is not None else None,
            "flags": list(self.flags),
        }


def fit_rate(curve):
    usable = ~np.asarray(curve.floored)
    excluded = int(np.count_nonzero(~usable))
    if not usable.any():
        return RateFit(math.inf, -math.inf, 0.0, 0, excluded, all_floored=True)
    if np.count_nonzero(usable) < 2:
        raise FitError(f"decay curve has {int(np.count_nonzero(usable))} usable point(s), need at least 2")

    x = np.log(np.asarray(curve.scales)[usable])
    y = np.log(np.abs(np.asarray(curve.values)[usable]))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return RateFit(float(slope), float(intercept), residual, int(x.size), excluded)


def theoretical_rates(alpha, M):
    """(1+alpha)/2, (2-alpha)/2 and (1-alpha)(M+1)+(1+alpha)/2; exact for Fraction input."""
    if isinstance(alpha, (Fraction, int)):
        half = Fraction(1, 2)
    else:
        alpha = float(alpha)
        half = 0.5
    if not 0 < alpha <= half:
        raise ConfigurationError(f"theoretical rates need 0 < alpha <= 1/2, got {alpha}")
    if int(M) < 1:
        raise ConfigurationError(f"M must be at least 1, got {M}")
    if alpha == half:
        logger.warning("alpha = 1/2: matched and wrong-bending rates coincide; bending cannot be resolved")
    matched = (1 + alpha) * half
    wrong_bending = (2 - alpha) * half
    wrong_shear = (1 - alpha) * (int(M) + 1) + matched
    return TheoreticalRates(alpha, int(M), matched, wrong_bending, wrong_shear)


def nearest_case(slope, rates):
    """Nearest rate on the log scale; ties go to the slower decay."""
    if slope <= 0:
        return MATCHED
    best, best_distance = None, math.inf
    for case, rate in rates.ordered():
        distance = abs(math.log(slope) - math.log(rate))
        if distance < best_distance:
            best, best_distance = case, distance
    return best


def curvature_of(pt):
    return 2.0 * abs(pt.b) / (1.0 + pt.s * pt.s) ** 1.5


def normal_of(s, iota):
    n = (1.0, -s) if iota == 1 else (-s, 1.0)
    norm = math.hypot(*n)
    return n[0] / norm, n[1] / norm


def default_grid(lo, hi, step):
    count = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(count + 1), 12)


def _select(curves):
    """Largest finest-scale magnitude; the first curve wins ties."""
    best = curves[0]
    for curve in curves[1:]:
        if curve.finest_magnitude > best.finest_magnitude:
            best = curve
    return best


def parabola_vertex(x, y):
    """Abscissa of the vertex through three points, or None when they do not bend downwards."""
    c2, c1, _ = np.polyfit(np.asarray(x, dtype=float), np.asarray(y, dtype=float), 2)
    if not c2 < 0:
        return None
    return float(-c1 / (2.0 * c2))


def extrapolate_to_zero(x, y):
    """Value at x = 0 of the polynomial of degree min(2, n - 1) fitted through (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 1:
        return float(y[0])
    return float(np.polyfit(x, y, min(2, x.size - 1))[-1])


def _label(curve, rates):
    try:
        fit = fit_rate(curve)
    except FitError:
        return WRONG_ORIENTATION, None
    if fit.all_floored:
        return WRONG_ORIENTATION, fit
    return nearest_case(fit.slope, rates), fit


class PointClassifier:
    """Runs the cone sweeps, the case assignment and the local refinement for one query point"""

    def __init__(self, transform=None, s_grid=None, b_grid=None, j_min=None, j_max=None, refine=True,
                 cones=(1, -1)):
        self.logger = Logger().get_logger('analysis.classifier')
        cfg = Config().get('analysis')
        self.transform = transform or BendletTransform()
        self.s_step = float(cfg.get('s_step', 0.05))
        self.b_step = float(cfg.get('b_step', 0.1))
        self.s_grid = np.asarray(s_grid if s_grid is not None else
                                 default_grid(cfg.get('s_min', -1.0), cfg.get('s_max', 1.0), self.s_step), dtype=float)
        self.b_grid = np.asarray(b_grid if b_grid is not None else
                                 default_grid(cfg.get('b_min', -5.0), cfg.get('b_max', 5.0), self.b_step), dtype=float)
        if self.s_grid.size == 0 or self.b_grid.size == 0:
            raise ConfigurationError("classification grids must be non-empty")
        if self.s_grid.size > 1:
            self.s_step = float(np.min(np.diff(np.sort(self.s_grid))))
        if self.b_grid.size > 1:
            self.b_step = float(np.min(np.diff(np.sort(self.b_grid))))
        self.j_min, self.j_max = self.transform._scale_range(j_min, j_max)
        self.refine = refine
        self.refine_factor = int(cfg.get('refine_factor', 5))
        self.off_after = int(cfg.get('off_boundary_after', 4))
        self.bending_scales = int(cfg.get('bending_scales', 3))
        self.cones = tuple(cones)
        if not self.cones or any(c not in (-1, 1) for c in self.cones):
            raise ConfigurationError(f"cone list must contain -1 and/or +1, got {cones}")

        alpha = self.transform.alpha
        self.rates = theoretical_rates(alpha, self.transform.generator.vanishing_moments)
        if alpha == 0.5:
            raise ConfigurationError("alpha = 1/2 cannot separate matched from wrong-bending decay")
        self.alpha_flag = not (1.0 / 3.0 < alpha < 0.5)
        if self.alpha_flag:
            self.logger.warning(f"alpha={alpha} is outside (1/3, 1/2); the matched lower bound is not licensed")

    def _refined_grid(self, center, step, lo=None, hi=None):
        fine = step / self.refine_factor
        grid = center + fine * np.arange(-self.refine_factor, self.refine_factor + 1)
        if lo is not None:
            grid = grid[(grid >= lo - 1e-12) & (grid <= hi + 1e-12)]
        return np.round(grid, 12), fine

    def bending_peak(self, sig, t, s, iota, j, b0, step):
        """Bending where |c_j(b)| peaks near b0: walk until bracketed, then two parabolic passes."""
        a = 2.0 ** -j

        def magnitude(b):
            return abs(self.transform.coefficient(sig, BendletParams(a, s, b, t, iota)))

        center = float(b0)
        for h in (step, step / self.refine_factor):
            left, mid, right = magnitude(center - h), magnitude(center), magnitude(center + h)
            for _ in range(MAX_PEAK_MOVES):
                if mid >= left and mid >= right:
                    break
                if right > mid:
                    center += h
                    left, mid, right = mid, right, magnitude(center + h)
                else:
                    center -= h
                    left, mid, right = magnitude(center - h), left, mid
            else:
                self.logger.debug(f"No peak of |c_{j}(b)| within {MAX_PEAK_MOVES} steps of b={b0}")
                return None
            vertex = parabola_vertex((center - h, center, center + h), (left, mid, right))
            if vertex is None:
                return None
            center = min(max(vertex, center - h), center + h)
        return center

    def extrapolated_bending(self, sig, t, s, iota, b0, step):
        """Per-scale peaks of |c_j(b)| over the finest scales, extrapolated to a -> 0.

        The peak of a matched atom sits off the true bending by a term that
        shrinks like a^(2 alpha); a polynomial in a^(2 alpha) through the finest
        peaks removes it. Returns None when a peak cannot be bracketed.
        """
        count = min(self.bending_scales, self.j_max - self.j_min + 1)
        if count < 2:
            return None
        x, peaks = [], []
        start = b0
        for j in range(self.j_max, self.j_max - count, -1):
            peak = self.bending_peak(sig, t, s, iota, j, start, step)
            if peak is None:
                return None
            x.append(2.0 ** (-2.0 * self.transform.alpha * j))
            peaks.append(peak)
            start = peak
        estimate = extrapolate_to_zero(x, peaks)
        self.logger.debug(f"Bending peaks {dict(zip(range(self.j_max, self.j_max - count, -1), peaks))} "
                          f"-> {estimate:.6f}")
        return estimate

    @perf.log_execution_time
    def classify(self, sig, t):
        t = (float(t[0]), float(t[1]))
        self.logger.info(f"Classifying t={t}")
        curves = []
        for iota in self.cones:
            curves.extend(self.transform.sweep(sig, t, iota, self.s_grid, self.b_grid, self.j_min, self.j_max))

        flags = [FLAG_ALPHA] if self.alpha_flag else []
        if all(c.all_floored_after(self.off_after) for c in curves):
            self.logger.info(f"t={t}: every coefficient beyond j={self.off_after} vanishes")
            return ClassificationResult(OFF_BOUNDARY, t, rate=math.inf, confidence=1.0, flags=flags)

        best = _select(curves)
        case, fit = _label(best, self.rates)
        step = (self.s_step, self.b_step)

        if self.refine and self.refine_factor > 1:
            s_fine, fs = self._refined_grid(best.s, self.s_step, -1.0, 1.0)
            b_fine, fb = self._refined_grid(best.b, self.b_step)
            local = self.transform.sweep(sig, t, best.iota, s_fine, b_fine, self.j_min, self.j_max)
            refined = _select(local)
            if refined.finest_magnitude >= best.finest_magnitude:
                best = refined
                case, fit = _label(best, self.rates)
            step = (fs, fb)

        if fit is None or fit.all_floored:
            flags.append(FLAG_UNRESOLVED)
            return ClassificationResult(case, t, best.s, best.b, best.iota, confidence=0.0,
                                        grid_step=step, flags=flags)

        midpoint = 0.5 * (float(self.rates.wrong_bending) + float(self.rates.wrong_shear))
        if fit.slope > midpoint and not best.floored.any():
            flags.append(FLAG_UNRESOLVED)
        if abs(abs(best.s) - 1.0) <= 1e-12:
            flags.append(FLAG_CONE_CORNER)

        result = ClassificationResult(case, t, best.s, best.b, best.iota, rate=fit.slope, residual=fit.residual,
                                      confidence=float(math.exp(-fit.residual)), grid_step=step, flags=flags)
        if case == MATCHED:
            if self.refine and self.bending_scales > 1:
                bending = self.extrapolated_bending(sig, t, best.s, best.iota, best.b, step[1])
                if bending is not None:
                    result.b = bending
            result.normal = normal_of(best.s, best.iota)
            result.curvature = curvature_of(PointType(best.s, result.b, best.iota))
        self.logger.info(f"t={t}: {case} (s={best.s}, b={result.b}, iota={best.iota}, rate={fit.slope:.4f})")
        return result


def classify_point(sig, t, cones=(1, -1), s_grid=None, b_grid=None, j_min=None, j_max=None,
                   transform=None, refine=True):
    return PointClassifier(transform, s_grid, b_grid, j_min, j_max, refine, cones).classify(sig, t)


def classify_points(sig, points, **kwargs):
    classifier = PointClassifier(**kwargs)
    return [classifier.classify(sig, t) for t in points]
