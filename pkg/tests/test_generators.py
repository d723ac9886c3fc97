import numpy as np
import pytest

from core.generators import (GeneratorPair, Window1D, build_daubechies, build_generator, eval_generator,
                             load_descriptor, project_out_moments, save_descriptor,
                             verify_theorem_conditions)
from utils.errors import ConfigurationError


class TestDaubechies:
    @pytest.mark.parametrize("M", [1, 2, 4, 8])
    def test_vanishing_moments(self, M):
        assert max(build_daubechies(M, 10).moment_errors()) <= 1e-6

    @pytest.mark.parametrize("M", [2, 8])
    def test_support_length(self, M):
        assert build_daubechies(M, 10).length == pytest.approx(2 * M - 1, abs=1e-2)

    def test_haar_shape(self):
        haar = build_daubechies(1, 10)
        assert haar(np.array([0.25]))[0] == pytest.approx(1.0, abs=1e-2)
        assert haar(np.array([0.75]))[0] == pytest.approx(-1.0, abs=1e-2)

    def test_zero_outside_support(self):
        w = build_daubechies(4, 10)
        np.testing.assert_array_equal(w(np.array([w.lo - 0.1, w.hi + 0.1])), [0.0, 0.0])

    def test_antiderivative_vanishes_at_both_ends(self):
        w = build_daubechies(8, 10)
        np.testing.assert_allclose(w.antiderivative(np.array([w.lo, w.hi, w.hi + 3.0])), 0.0, atol=1e-12)

    @pytest.mark.parametrize("M", [0, 11])
    def test_unsupported_moment_counts(self, M):
        with pytest.raises(ConfigurationError):
            build_daubechies(M, 10)

    def test_shallow_cascade_is_rejected(self):
        with pytest.raises(ConfigurationError):
            build_daubechies(4, 4)


class TestProjection:
    def test_projected_values_annihilate_low_degree_polynomials(self):
        x = np.linspace(-1.0, 2.0, 301)
        w = np.full(x.size, 0.01)
        v = np.sin(3.0 * x) + 0.2
        projected = project_out_moments(v, w, x, 4, x[0], x[-1])
        for k in range(4):
            assert abs(np.sum(w * projected * x ** k)) < 1e-12

    def test_pinned_ends_stay_put(self):
        x = np.linspace(0.0, 1.0, 101)
        v = np.cos(x)
        v[0] = v[-1] = 0.0
        projected = project_out_moments(v, np.ones_like(x), x, 2, 0.0, 1.0, pin_ends=True)
        assert projected[0] == 0.0 and projected[-1] == 0.0


class TestWindow:
    def test_cubic_spline_at_origin(self):
        assert Window1D(4).value_at_zero == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_hat_function_at_origin(self):
        assert Window1D(2).value_at_zero == pytest.approx(1.0)

    @pytest.mark.parametrize("order", [2, 4, 11])
    def test_partition_of_unity(self, order):
        window = Window1D(order)
        x = np.linspace(-0.5, 0.5, 201)
        shifts = np.arange(-order, order + 1)
        np.testing.assert_allclose(window(x[:, None] - shifts[None, :]).sum(axis=1), 1.0, atol=1e-12)

    def test_unit_mass(self):
        assert Window1D(11).antiderivative(np.array([10.0]))[0] == pytest.approx(1.0, abs=1e-12)

    def test_order_below_two_is_rejected(self):
        with pytest.raises(ConfigurationError):
            Window1D(1)


class TestGeneratorPair:
    def test_box_has_unit_width(self, generator):
        (lo1, hi1), (lo2, hi2) = generator.box
        assert hi1 - lo1 == pytest.approx(1.0)
        assert (lo2, hi2) == pytest.approx((-0.5, 0.5))
        assert lo1 < 0.0 < hi1

    def test_zero_outside_box(self, generator):
        (lo1, hi1), (lo2, hi2) = generator.box
        u = np.array([[lo1 - 0.01, 0.0], [0.0, hi2 + 0.01], [hi1 + 1.0, lo2 - 1.0]])
        np.testing.assert_array_equal(eval_generator(generator, u), 0.0)

    def test_separable(self, generator):
        u = np.array([[0.05, 0.1], [-0.2, -0.03]])
        expected = generator.psi(u[:, 0]) * generator.phi(u[:, 1])
        np.testing.assert_allclose(generator(u), expected, rtol=1e-14)

    def test_integrates_to_zero(self, generator):
        assert abs(generator.psi_total) < 1e-10
        assert generator.phi_total == pytest.approx(1.0 / generator.phi_scale, abs=1e-12)

    def test_l2_norm_is_positive(self, generator):
        assert np.isfinite(generator.l2_norm) and generator.l2_norm > 0.0

    def test_default_pair_meets_theorem_conditions(self, generator):
        report = verify_theorem_conditions(generator)
        assert report.passed
        assert report.phi_at_zero > 0.0
        assert abs(report.lower_parabola_integral) > 1e-8
        assert abs(report.upper_parabola_integral) > 1e-8
        assert [row[0] for row in report.rows()][0] == "phi1(0)"

    def test_haar_hat_fails_smoothness_only(self, haar_generator):
        report = haar_generator.conditions
        assert not report.passed
        assert report.flags == {"phi_at_zero": True, "lower_parabola": True,
                                "upper_parabola": True, "smoothness": False}

    def test_haar_is_centred_on_its_sign_change(self, haar_generator):
        assert haar_generator.center == pytest.approx(0.5, abs=2e-3)

    def test_haar_parabola_integrals_match_midpoint_reference(self, haar_generator):
        n = 1024
        u = -0.5 + (np.arange(n) + 0.5) / n
        u1, u2 = np.meshgrid(u, u, indexing="ij")
        psi = haar_generator.psi(u1)
        lower = float(np.sum(psi * (u1 <= -u2 ** 2))) / n ** 2
        upper = float(np.sum(psi * (u1 >= u2 ** 2))) / n ** 2
        computed_lower, computed_upper = haar_generator.half_plane_integrals
        assert computed_lower == pytest.approx(lower, abs=5e-3)
        assert computed_upper == pytest.approx(upper, abs=5e-3)
        assert computed_lower == pytest.approx(5.0 / 12.0, abs=5e-3)

    def test_descriptor_roundtrip(self, generator, tmp_path):
        path = tmp_path / "generator.json"
        save_descriptor(generator, path)
        assert load_descriptor(path).descriptor() == generator.descriptor()

    def test_build_is_cached(self):
        assert build_generator(2, 10, 4) is build_generator(2, 10, 4)

    def test_from_descriptor_fills_defaults(self, generator):
        assert GeneratorPair.from_descriptor({}) is generator

    def test_broken_descriptor_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_descriptor(path)
