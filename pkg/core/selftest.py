"""Structural invariant suites behind the ``selftest`` command."""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from core.analysis import theoretical_rates
from core.generators import build_daubechies, build_spline_window
from core.geometry import (BendletParams, HigherOrderParams, ShearParams, apply_inverse_shear, apply_shear,
                           representation_arg, representation_inverse)
from core.signals import Constant
from utils.logger import Logger
from utils.performance import PerformanceLogger


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


class SelfTest:
    """Runs every invariant suite and collects one row per check"""

    def __init__(self, transform, seed=0):
        self.logger = Logger().get_logger('selftest')
        self.perf = PerformanceLogger()
        self.transform = transform
        self.seed = int(seed)
        self.suites = [
            ("vanishing moments", self.check_vanishing_moments),
            ("spline partition of unity", self.check_partition_of_unity),
            ("inverse shear", self.check_inverse_shear),
            ("representation inverse", self.check_representation_inverse),
            ("atom isometry", self.check_isometry),
            ("constant annihilation", self.check_constant_annihilation),
            ("Q_p identity", self.check_qp_identity),
            ("rate ordering", self.check_rate_ordering),
        ]

    def run(self):
        results = []
        for name, suite in self.suites:
            with self.perf.start_timer(f"Self-test: {name}"):
                try:
                    result = suite()
                except Exception as e:
                    self.logger.error(f"Self-test '{name}' raised: {e}", exc_info=True)
                    result = CheckResult(name, float('nan'), float('nan'), False, str(e))
            level = self.logger.info if result.passed else self.logger.error
            level(f"{name}: {'PASS' if result.passed else 'FAIL'} (value={result.value:.3e})")
            results.append(result)
        return results

    def check_vanishing_moments(self):
        M = self.transform.generator.vanishing_moments
        wavelet = build_daubechies(M, self.transform.generator.depth or 10)
        worst = max(wavelet.moment_errors())
        return CheckResult("vanishing moments", worst, 1e-6, worst <= 1e-6, f"db{M}")

    def check_partition_of_unity(self):
        window = build_spline_window(self.transform.generator.phi1.order)
        x = np.linspace(-0.5, 0.5, 1001)
        shifts = np.arange(-window.order, window.order + 1)
        total = window(x[:, None] - shifts[None, :]).sum(axis=1)
        worst = float(np.max(np.abs(total - 1.0)))
        return CheckResult("spline partition of unity", worst, 1e-12, worst <= 1e-12)

    def check_inverse_shear(self):
        rng = np.random.default_rng(self.seed)
        x = rng.uniform(-1.0, 1.0, (1000, 2))
        worst = 0.0
        for order in (1, 2, 3):
            shear = ShearParams(tuple(rng.uniform(-1.0, 1.0, order)))
            back = apply_inverse_shear(shear, apply_shear(shear, x))
            worst = max(worst, float(np.max(np.abs(back - x))))
        return CheckResult("inverse shear", worst, 1e-12, worst <= 1e-12)

    def check_representation_inverse(self):
        rng = np.random.default_rng(self.seed + 1)
        u = rng.uniform(-0.5, 0.5, (1000, 2))
        p = HigherOrderParams(a=2.0 ** -6, alpha=self.transform.alpha, r=(0.3, -1.5), t=(0.2, -0.1))
        worst = float(np.max(np.abs(representation_arg(p, representation_inverse(p, u)) - u)))
        return CheckResult("representation inverse", worst, 1e-9, worst <= 1e-9)

    def check_isometry(self):
        g = self.transform.generator
        worst = 0.0
        for j in (0, 3, 6, 9):
            for iota in (1, -1):
                a = 2.0 ** -j
                params = HigherOrderParams(a=a, alpha=self.transform.alpha, r=(0.25, -0.5), t=(0.1, 0.2))
                norm = self.transform.atom_l2_norm(self.transform.atom(params, iota=iota))
                worst = max(worst, abs(norm - g.l2_norm) / g.l2_norm)
        return CheckResult("atom isometry", worst, 0.01, worst <= 0.01)

    def check_constant_annihilation(self):
        rng = np.random.default_rng(self.seed + 2)
        signal = Constant(1.0)
        worst = 0.0
        for _ in range(10):
            params = BendletParams(2.0 ** -int(rng.integers(2, 9)), float(rng.uniform(-1, 1)),
                                   float(rng.uniform(-5, 5)), tuple(rng.uniform(-0.5, 0.5, 2)),
                                   int(rng.choice([-1, 1])))
            worst = max(worst, abs(self.transform.coefficient(signal, params)))
        return CheckResult("constant annihilation", worst, 1e-8, worst < 1e-8)

    def check_qp_identity(self):
        rng = np.random.default_rng(self.seed + 3)
        worst = 0.0
        for _ in range(5):
            p = float(rng.uniform(-2.0, 2.0))
            s = float(rng.uniform(-1.0, 1.0))
            t = tuple(rng.uniform(-0.5, 0.5, 2))
            a = 2.0 ** -int(rng.integers(2, 7))
            worst = max(worst, self.transform.qp_shear_identity_check(p, a, s, t, samples=1000,
                                                                      seed=int(rng.integers(1 << 31))))
        return CheckResult("Q_p identity", worst, 1e-9, worst < 1e-9)

    def check_rate_ordering(self):
        violations = 0
        checked = 0
        for num in range(1, 50):
            alpha = Fraction(num, 100)
            for M in range(1, 11):
                rates = theoretical_rates(alpha, M)
                checked += 1
                if not rates.matched < rates.wrong_bending < rates.wrong_shear:
                    violations += 1
        return CheckResult("rate ordering", float(violations), 0.0, violations == 0, f"{checked} (alpha, M) pairs")


def format_table(results):
    width = max(len(r.name) for r in results) if results else 10
    lines = [f"{'check':<{width}}  {'value':>12}  {'threshold':>12}  result"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.value:>12.3e}  {r.threshold:>12.3e}  {'PASS' if r.passed else 'FAIL'}"
                     + (f"  ({r.detail})" if r.detail else ""))
    return "\n".join(lines)
