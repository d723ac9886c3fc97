import math

import numpy as np
import pytest

from core.geometry import BendletParams, HigherOrderParams
from core.quadrature import (AdaptiveQuadrature, AtomMap, LineFamilyQuadrature, check_raster_resolution,
                             quadratic_weights)
from core.signals import Complement, Constant, Disk, HalfPlane, RasterSignal, Scaled, rasterize
from utils.errors import ConfigurationError, ResolutionError

ALPHA = 0.335


def _params(j, s=0.0, b=0.0, t=(0.0, 0.0)):
    return BendletParams(2.0 ** -j, s, b, t).as_higher_order(ALPHA)


def _row_reference(generator, region, params, rows=20000):
    """Dense row sum: exact wavelet integral between boundary crossings, exact window masses per row."""
    amap = AtomMap(params)
    (_, _), (lo2, hi2) = generator.box
    edges = np.linspace(lo2, hi2, rows + 1)
    u2 = 0.5 * (edges[1:] + edges[:-1])
    masses = np.diff(generator.phi_antiderivative(edges))
    base, x2 = amap(np.zeros_like(u2), u2)
    if isinstance(region, Disk):
        (c1, c2), r = region.center, region.radius
        chord = r * r - (x2 - c2) ** 2
        half = np.sqrt(np.clip(chord, 0.0, None))
        inside = (generator.psi_antiderivative((c1 + half - base) / amap.a)
                  - generator.psi_antiderivative((c1 - half - base) / amap.a))
        inside = np.where(chord > 0.0, inside, 0.0)
    else:
        o1, o2 = region.offset
        inside = generator.psi_antiderivative((o1 + region.normal_shear * (x2 - o2) - base) / amap.a)
    return amap.weight * float(masses @ inside)


def _disk_tuple(radius, angle, ds, b, j, center=(0.0, 0.0)):
    """Disk and params at the boundary point at ``angle`` with the shear off by ``ds``."""
    t = (center[0] + radius * math.cos(angle), center[1] + radius * math.sin(angle))
    return Disk(center, radius), _params(j, s=-math.tan(angle) + ds, b=b, t=t)


MISMATCHED = [
    _disk_tuple(0.25, 0.0, 0.0, 0.0, 5),
    _disk_tuple(0.25, 0.0, 0.0, 0.0, 7),
    _disk_tuple(0.35, 0.4, 0.15, 1.0, 5, center=(0.1, -0.05)),
    _disk_tuple(0.35, 0.4, 0.15, 1.0, 7, center=(0.1, -0.05)),
    _disk_tuple(0.25, 0.0, 0.0, -1.0, 6),
    (HalfPlane(0.3), _params(4, s=0.1, b=2.0)),
]


def _random_tuples(count=50, seed=2024):
    rng = np.random.default_rng(seed)
    tuples = []
    for k in range(count):
        j = int(rng.integers(3, 8))
        ds = float(rng.uniform(-0.3, 0.3))
        b = float(rng.uniform(-4.0, 4.0))
        if k % 2 == 0:
            radius = float(rng.uniform(0.3, 0.6))
            # keep the window rows inside the disk's x2 extent
            angle = float(rng.uniform(-0.3, 0.3))
            tuples.append(_disk_tuple(radius, angle, ds, b, j, center=tuple(rng.uniform(-0.1, 0.1, 2))))
        else:
            slope = float(rng.uniform(-0.8, 0.8))
            offset = tuple(float(v) for v in rng.uniform(-0.2, 0.2, 2))
            tuples.append((HalfPlane(slope, offset), _params(j, s=slope + ds, b=b, t=offset)))
    return tuples


class TestAtomMap:
    def test_maps_box_corners_into_bounding_box(self, generator):
        p = HigherOrderParams(a=2.0 ** -3, alpha=ALPHA, r=(0.4, -1.5), t=(0.2, -0.1))
        amap = AtomMap(p)
        x1lo, x1hi, x2lo, x2hi = amap.bounding_box(generator.box)
        (lo1, hi1), (lo2, hi2) = generator.box
        u1, u2 = np.meshgrid(np.linspace(lo1, hi1, 21), np.linspace(lo2, hi2, 21))
        x1, x2 = amap(u1, u2)
        assert x1.min() >= x1lo - 1e-12 and x1.max() <= x1hi + 1e-12
        assert x2.min() >= x2lo - 1e-12 and x2.max() <= x2hi + 1e-12

    def test_weight(self):
        p = HigherOrderParams(a=2.0 ** -4, alpha=ALPHA, r=(0.0,))
        assert AtomMap(p).weight == pytest.approx(2.0 ** (-4 * (1 + ALPHA) / 2))


class TestLineFamilyQuadrature:
    def test_line_counts_follow_oversampling(self, generator):
        quad = LineFamilyQuadrature(generator, q=16)
        assert quad.n_rows == 16 * 11
        assert quad.n_columns == 16 * 15

    def test_shallow_boundary_keeps_vanishing_moments(self, generator):
        # a wrong-orientation atom sees the boundary as a smooth function of u1
        p = _params(5)
        grid = LineFamilyQuadrature(generator).integrate(HalfPlane(0.5), p)
        matched = LineFamilyQuadrature(generator).integrate(HalfPlane(0.0), p)
        assert abs(grid) < 1e-6 * abs(matched)

    def test_vertical_boundary_uses_rows(self, generator):
        quad = LineFamilyQuadrature(generator)
        assert quad.choose_family(HalfPlane(0.0), AtomMap(_params(4)))

    def test_shallow_boundary_uses_columns(self, generator):
        quad = LineFamilyQuadrature(generator)
        assert not quad.choose_family(HalfPlane(0.5), AtomMap(_params(4)))

    def test_matched_half_plane_is_exact(self, generator):
        quad = LineFamilyQuadrature(generator)
        for j in (3, 6, 9):
            expected = (2.0 ** -j) ** ((1 + ALPHA) / 2) * float(generator.psi_antiderivative(np.array([0.0]))[0]) \
                * generator.phi_total
            assert quad.integrate(HalfPlane(0.0), _params(j)) == pytest.approx(expected, rel=1e-9)

    def test_no_crossing_gives_exact_zero(self, generator):
        quad = LineFamilyQuadrature(generator)
        assert quad.integrate(Disk((0.0, 0.0), 0.25), _params(4, t=(0.45, 0.0))) == 0.0

    def test_atom_inside_region_annihilates(self, generator):
        quad = LineFamilyQuadrature(generator)
        assert abs(quad.integrate(Disk((0.0, 0.0), 0.9), _params(5))) < 1e-12

    def test_constant_signal(self, generator):
        quad = LineFamilyQuadrature(generator)
        assert abs(quad.integrate(Constant(1.0), _params(4))) < 1e-8

    def test_complement_negates(self, generator):
        quad = LineFamilyQuadrature(generator)
        disk = Disk((0.0, 0.0), 0.25)
        p = _params(5, b=-2.0, t=(0.25, 0.0))
        # complement = constant - disk, and constants integrate to zero
        assert quad.integrate(Complement(disk), p) == pytest.approx(-quad.integrate(disk, p), rel=1e-6)

    def test_scaling_is_linear(self, generator):
        quad = LineFamilyQuadrature(generator)
        disk = Disk((0.0, 0.0), 0.25)
        p = _params(5, b=-2.0, t=(0.25, 0.0))
        assert quad.integrate(Scaled(disk, -3.0), p) == pytest.approx(-3.0 * quad.integrate(disk, p), rel=1e-12)

    def test_oversampling_must_be_at_least_four(self, generator):
        with pytest.raises(ConfigurationError):
            LineFamilyQuadrature(generator, q=3)


class TestAdaptiveQuadrature:
    def test_agrees_with_line_quadrature_on_half_plane(self, generator):
        p = _params(5)
        grid = LineFamilyQuadrature(generator).integrate(HalfPlane(0.0), p)
        adaptive = AdaptiveQuadrature(generator, tol=1e-8).integrate(HalfPlane(0.0), p)
        assert adaptive == pytest.approx(grid, rel=1e-3)

    def test_no_boundary_gives_exact_zero(self, generator):
        quad = AdaptiveQuadrature(generator)
        assert quad.integrate(Disk((0.0, 0.0), 0.25), _params(4, t=(0.45, 0.0))) == 0.0

    def test_rejects_nonpositive_tolerance(self, generator):
        with pytest.raises(ConfigurationError):
            AdaptiveQuadrature(generator, tol=0.0)

    @pytest.mark.slow
    def test_agrees_with_line_quadrature_on_matched_disk(self, generator):
        disk = Disk((0.0, 0.0), 1.0)
        p = BendletParams(2.0 ** -6, 0.0, -0.5, (1.0, 0.0)).as_higher_order(ALPHA)
        grid = LineFamilyQuadrature(generator).integrate(disk, p)
        adaptive = AdaptiveQuadrature(generator, tol=1e-8).integrate(disk, p)
        assert grid != 0.0
        assert adaptive == pytest.approx(grid, rel=1e-3)


class TestQuadraticWeights:
    @pytest.mark.parametrize("factor", ["psi", "phi"])
    def test_quadratics_are_integrated_exactly(self, generator, factor):
        if factor == "psi":
            (lo, hi), _ = generator.box
            density, primitives = generator.psi, generator.psi_primitives
        else:
            _, (lo, hi) = generator.box
            density, primitives = generator.phi, generator.phi_primitives
        x0, x1 = lo + 0.31 * (hi - lo), lo + 0.37 * (hi - lo)
        w0, wm, w1 = quadratic_weights(primitives, np.array([x0]), np.array([x1]))
        edges = np.linspace(x0, x1, 200001)
        mid = 0.5 * (edges[1:] + edges[:-1])
        dense = density(mid) * np.diff(edges)
        xm = 0.5 * (x0 + x1)
        for k in range(3):
            expected = float(np.sum(dense * mid ** k))
            value = float(w0[0] * x0 ** k + wm[0] * xm ** k + w1[0] * x1 ** k)
            assert value == pytest.approx(expected, rel=1e-6, abs=1e-12)


class TestReferenceAgreement:
    @pytest.mark.parametrize("region, params", MISMATCHED[:1])
    def test_adaptive_matches_dense_reference(self, generator, region, params):
        reference = _row_reference(generator, region, params)
        assert reference != 0.0
        adaptive = AdaptiveQuadrature(generator, tol=1e-8).integrate(region, params)
        assert adaptive == pytest.approx(reference, rel=1e-3)

    @pytest.mark.parametrize("region, params", MISMATCHED)
    def test_line_engine_matches_dense_reference(self, generator, region, params):
        reference = _row_reference(generator, region, params)
        grid = LineFamilyQuadrature(generator).integrate(region, params)
        assert grid == pytest.approx(reference, rel=1e-3)

    @pytest.mark.slow
    @pytest.mark.parametrize("region, params", MISMATCHED[1:])
    def test_adaptive_matches_dense_reference_across_tuples(self, generator, region, params):
        reference = _row_reference(generator, region, params)
        adaptive = AdaptiveQuadrature(generator, tol=1e-8).integrate(region, params)
        assert adaptive == pytest.approx(reference, rel=1e-3)

    def test_adaptive_keeps_wrong_orientation_small(self, generator):
        p = _params(5)
        grid = LineFamilyQuadrature(generator).integrate(HalfPlane(0.5), p)
        adaptive = AdaptiveQuadrature(generator, tol=1e-8).integrate(HalfPlane(0.5), p)
        assert abs(adaptive - grid) < 1e-7

    def test_cell_cut_by_curved_boundary_is_refined(self, generator):
        # the small disk curves across most of the window
        disk, p = _disk_tuple(0.1, 0.0, 0.0, 0.0, 4)
        assert AdaptiveQuadrature(generator, tol=1e-8).integrate(disk, p) == pytest.approx(
            _row_reference(generator, disk, p), rel=1e-3)


class TestQuadratureConvergence:
    @pytest.mark.parametrize("region, params", MISMATCHED[:5])
    def test_doubling_oversampling_changes_little(self, generator, region, params):
        coarse = LineFamilyQuadrature(generator, q=16).integrate(region, params)
        fine = LineFamilyQuadrature(generator, q=32).integrate(region, params)
        assert coarse != 0.0
        assert abs(fine - coarse) < 1e-3 * abs(fine)

    @pytest.mark.slow
    def test_grid_and_adaptive_agree_on_random_tuples(self, generator):
        grid = LineFamilyQuadrature(generator, q=16)
        adaptive = AdaptiveQuadrature(generator, tol=1e-8)
        failures = []
        for region, params in _random_tuples():
            expected = adaptive.integrate(region, params)
            value = grid.integrate(region, params)
            if value != pytest.approx(expected, rel=1e-3, abs=1e-9):
                failures.append((region, params.a, value, expected))
        assert not failures


class TestRasterResolution:
    def test_pixels_wider_than_atom(self, generator):
        raster = rasterize(Disk((0.0, 0.0), 0.5), 32)
        with pytest.raises(ResolutionError) as excinfo:
            LineFamilyQuadrature(generator).integrate(raster, _params(5, b=-1.0, t=(0.5, 0.0)))
        assert excinfo.value.max_scale_index == 4

    def test_feasible_scale_passes(self, generator):
        raster = RasterSignal(np.zeros((64, 64)))
        check_raster_resolution(raster, AtomMap(_params(4)), generator.box)

    def test_raster_coefficient_is_finite(self, generator):
        raster = rasterize(Disk((0.0, 0.0), 0.5), 256)
        value = LineFamilyQuadrature(generator).integrate(raster, _params(4, b=-1.0, t=(0.5, 0.0)))
        assert math.isfinite(value) and value != 0.0

    def test_raster_of_constant_region_annihilates(self, generator):
        raster = RasterSignal(np.ones((128, 128)))
        assert abs(LineFamilyQuadrature(generator).integrate(raster, _params(4))) < 1e-10
