import numpy as np
import pytest

from core.geometry import (AlphaScale, BendletParams, HigherOrderParams, ShearParams, apply_alpha_scale,
                           apply_cone_shear, apply_inverse_shear, apply_shear, compose_first_order_shears,
                           cone_swap, jacobian_det, l2_normalization, representation_arg,
                           representation_inverse)
from utils.errors import ConfigurationError, DomainError


class TestAlphaScale:
    def test_scales_axes_anisotropically(self):
        np.testing.assert_allclose(apply_alpha_scale(AlphaScale(0.25, 0.5), (1.0, 1.0)), [0.25, 0.5])

    def test_determinant(self):
        sc = AlphaScale(2.0 ** -4, 0.335)
        assert sc.det == pytest.approx(np.linalg.det(sc.matrix), rel=1e-12)

    def test_compose_multiplies_scales(self):
        assert AlphaScale(0.5, 0.3).compose(AlphaScale(0.25, 0.3)).a == pytest.approx(0.125)

    def test_compose_rejects_mixed_alpha(self):
        with pytest.raises(ConfigurationError):
            AlphaScale(0.5, 0.3).compose(AlphaScale(0.5, 0.4))

    @pytest.mark.parametrize("a", [0.0, -1.0])
    def test_rejects_nonpositive_scale(self, a):
        with pytest.raises(ConfigurationError):
            AlphaScale(a, 0.5)


class TestShear:
    def test_second_order_shear(self):
        np.testing.assert_allclose(apply_shear(ShearParams((0.5, 1.0)), (0.0, 1.0)), [1.5, 1.0])

    def test_inverse_roundtrip_on_random_points(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1.0, 1.0, (500, 2))
        for order in (1, 2, 3, 4):
            sh = ShearParams(tuple(rng.uniform(-1.0, 1.0, order)))
            np.testing.assert_allclose(apply_inverse_shear(sh, apply_shear(sh, x)), x, atol=1e-12)

    def test_shear_preserves_second_coordinate(self):
        x = np.array([[0.3, -0.7], [0.1, 0.2]])
        np.testing.assert_array_equal(apply_shear(ShearParams((0.4, -2.0)), x)[:, 1], x[:, 1])

    def test_first_order_shears_compose_additively(self):
        x = np.array([[0.2, 0.9], [-0.4, -0.3]])
        first, second = ShearParams((0.3,)), ShearParams((-0.8,))
        combined = compose_first_order_shears(first, second)
        np.testing.assert_allclose(apply_shear(combined, x), apply_shear(first, apply_shear(second, x)),
                                   atol=1e-15)

    def test_only_first_order_shears_compose(self):
        with pytest.raises(ConfigurationError):
            compose_first_order_shears(ShearParams((0.1, 0.2)), ShearParams((0.3,)))

    def test_order_above_limit_is_rejected(self):
        with pytest.raises(ConfigurationError):
            ShearParams((0.1, 0.2, 0.3, 0.4, 0.5))

    def test_cone_shear_acts_on_second_coordinate(self):
        np.testing.assert_allclose(apply_cone_shear(ShearParams((0.5,)), (2.0, 1.0)), [2.0, 2.0])

    def test_offset_range_includes_interior_extremum(self):
        lo, hi = ShearParams((0.0, 1.0)).offset_range(-1.0, 1.0)
        assert lo == pytest.approx(0.0, abs=1e-15)
        assert hi == pytest.approx(1.0)


class TestRepresentation:
    def test_worked_example(self):
        p = HigherOrderParams(a=0.25, alpha=0.5, r=(0.0, -0.5), t=(1.0, 0.0))
        np.testing.assert_allclose(representation_arg(p, (0.9, 0.2)), [-0.32, 0.4], atol=1e-12)

    def test_inverse_is_exact_on_random_points(self):
        rng = np.random.default_rng(1)
        u = rng.uniform(-0.5, 0.5, (1000, 2))
        p = HigherOrderParams(a=2.0 ** -6, alpha=0.335, r=(0.3, -1.5, 0.7), t=(0.2, -0.1))
        np.testing.assert_allclose(representation_arg(p, representation_inverse(p, u)), u, atol=1e-9)

    def test_jacobian_and_normalization(self):
        p = HigherOrderParams(a=2.0 ** -5, alpha=0.335, r=(0.2, 1.0))
        assert jacobian_det(p) == pytest.approx(p.a ** 1.335)
        assert l2_normalization(p) ** 2 * jacobian_det(p) == pytest.approx(1.0)

    def test_cone_swap(self):
        np.testing.assert_array_equal(cone_swap(np.array([[1.0, 2.0], [3.0, 4.0]])), [[2.0, 1.0], [4.0, 3.0]])

    def test_rejects_wrong_point_shape(self):
        with pytest.raises(DomainError):
            representation_arg(HigherOrderParams(0.5, 0.5, (0.0,)), np.zeros((3, 3)))


class TestBendletParams:
    def test_vertical_cone_swaps_translation(self):
        hp = BendletParams(0.25, 0.1, -0.5, (0.3, 0.7), iota=-1).as_higher_order(0.335)
        assert hp.t == (0.7, 0.3)
        assert hp.r == (0.1, -0.5)

    @pytest.mark.parametrize("kwargs", [
        {"a": 1.0, "s": 0.0, "b": 0.0},
        {"a": 0.5, "s": 1.5, "b": 0.0},
        {"a": 0.5, "s": 0.0, "b": 0.0, "iota": 0},
    ])
    def test_out_of_range_parameters(self, kwargs):
        with pytest.raises(DomainError):
            BendletParams(**kwargs)

    def test_range_checks_can_be_disabled(self):
        assert BendletParams(2.0, 3.0, 0.0, check_ranges=False).a == 2.0
