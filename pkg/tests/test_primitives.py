import numpy as np
import pytest

from helpers import closed_hat, grid
from mixrelu.primitives import (
    Breakpoints,
    cpwl_net,
    dual_hat_net,
    hat_univariate_net,
    product_levels,
    product_net,
    square_net,
    tensor_hat_net,
)

T = np.linspace(0.0, 1.0, 10001)[:, None]


class TestHats:
    @pytest.mark.parametrize("k, s, t, expected", [(0, 0, 0.5, 1.0), (1, 1, 0.75, 1.0), (1, 1, 0.5, 0.0), (1, 1, 1.0, 0.0)])
    def test_values(self, k, s, t, expected):
        assert hat_univariate_net(k, s)(np.array([[t]]))[0, 0] == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("k", [0, 1, 3])
    def test_exact_on_line(self, k):
        t = np.linspace(-1, 2, 3001)[:, None]
        for s in range(2**k):
            assert np.max(np.abs(hat_univariate_net(k, s)(t) - closed_hat(k, s, t))) <= 1e-14

    def test_boundary_level(self):
        t = np.linspace(0, 1, 65)[:, None]
        assert np.allclose(hat_univariate_net(-1, 0)(t)[:, 0], np.maximum(1 - np.abs(t[:, 0]), 0))

    def test_size_and_shape(self):
        net = hat_univariate_net(0, 0)
        assert net.size() == 8
        assert net.depth() == 2
        assert net.width() == 3

    def test_shifted_hat_has_one_extra_bias(self):
        assert hat_univariate_net(2, 1).size() == 9

    @pytest.mark.parametrize("k, s", [(0, 1), (2, 4), (1, -1), (-1, 2)])
    def test_bad_shift(self, k, s):
        with pytest.raises(ValueError):
            hat_univariate_net(k, s)


class TestDualHat:
    def test_peak(self):
        assert dual_hat_net(0, 1)(np.array([[0.5]]))[0, 0] == pytest.approx(1.0)

    def test_support_ends(self):
        net = dual_hat_net(1, 3)
        assert np.allclose(net(np.array([[0.5], [1.0]]))[:, 0], 0.0, atol=1e-15)

    @pytest.mark.parametrize("m", [0, 1, 2, 3])
    def test_node_interpolation(self, m):
        nodes = (np.arange(1, 2 ** (m + 1)) / 2.0 ** (m + 1))[:, None]
        vals = np.column_stack([dual_hat_net(m, s)(nodes)[:, 0] for s in range(1, 2 ** (m + 1))])
        assert np.allclose(vals, np.eye(len(nodes)), atol=1e-14)

    def test_bad_shift(self):
        with pytest.raises(ValueError):
            dual_hat_net(1, 4)


class TestSquare:
    def test_knot_value(self):
        assert square_net(1)(np.array([[0.5]]))[0, 0] == 0.25

    def test_error_three_levels(self):
        assert np.max(np.abs(square_net(3)(T)[:, 0] - T[:, 0] ** 2)) <= 0.00390625

    def test_zero(self):
        assert square_net(5)(np.array([[0.0]]))[0, 0] == 0.0

    @pytest.mark.parametrize("levels", [1, 2, 3, 4, 5, 6])
    def test_error_window_and_knots(self, levels):
        t = np.linspace(0, 1, 2 ** (levels + 6) + 1)[:, None]
        err = np.abs(square_net(levels)(t)[:, 0] - t[:, 0] ** 2)
        assert 2.0 ** (-2 * levels - 3) <= err.max() <= 2.0 ** (-2 * levels - 2)
        knots = (np.arange(2**levels + 1) / 2.0**levels)[:, None]
        assert np.max(np.abs(square_net(levels)(knots)[:, 0] - knots[:, 0] ** 2)) <= 1e-15

    @pytest.mark.parametrize("levels", [2, 3, 5, 8])
    def test_linear_size(self, levels):
        net = square_net(levels)
        assert net.depth() == levels + 1
        assert net.size() <= 8 * levels


class TestProduct:
    def test_zero_coordinate(self):
        assert product_net(2, 1e-2)(np.array([[0.0, 0.7]]))[0, 0] == 0.0

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_all_ones(self, d):
        assert abs(product_net(d, 1e-2)(np.ones((1, d)))[0, 0] - 1.0) <= 1e-2

    def test_monte_carlo_and_grid(self):
        net = product_net(2, 1e-3)
        x = np.vstack([np.random.default_rng(1).random((10**4, 2)), grid(7, 2)])
        assert np.max(np.abs(net(x)[:, 0] - x[:, 0] * x[:, 1])) <= 1e-3

    def test_signed_domain(self):
        net = product_net(3, 1e-2)
        x = np.random.default_rng(2).uniform(-1, 1, (5000, 3))
        assert np.max(np.abs(net(x)[:, 0] - np.prod(x, axis=1))) <= 1e-2

    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_zero_preservation_signed(self, d):
        x = np.random.default_rng(d).uniform(-1, 1, (2000, d))
        x[np.arange(2000), np.arange(2000) % d] = 0.0
        assert np.max(np.abs(product_net(d, 1e-3)(x))) <= 1e-14

    def test_levels_grow_with_precision(self):
        assert product_levels(2, 1e-1) <= product_levels(2, 1e-3) <= product_levels(2, 1e-6)

    @pytest.mark.parametrize("d, delta", [(1, 0.1), (2, 0.0), (2, 1.0), (3, -0.1)])
    def test_errors(self, d, delta):
        with pytest.raises(ValueError):
            product_net(d, delta)


class TestTensorHat:
    def test_center(self):
        net = tensor_hat_net((1, 2), (0, 3), 1e-3)
        assert abs(net(np.array([[0.25, 0.875]]))[0, 0] - 1.0) <= 1e-3

    def test_grid_error(self):
        net = tensor_hat_net((1, 2), (0, 3), 1e-3)
        x = grid(8, 2)
        expected = closed_hat(1, 0, x[:, 0]) * closed_hat(2, 3, x[:, 1])
        assert np.max(np.abs(net(x)[:, 0] - expected)) <= 1e-3

    def test_support_boundary_is_exact_zero(self):
        net = tensor_hat_net((1, 2), (0, 3), 1e-3)
        y = np.linspace(0, 1, 101)
        pts = np.vstack([np.column_stack([np.full_like(y, 0.5), y]), np.column_stack([y, np.full_like(y, 0.75)])])
        assert np.all(net(pts) == 0.0)

    def test_zero_outside_support(self):
        net = tensor_hat_net((2, 1, 1), (1, 0, 1), 1e-2)
        x = np.random.default_rng(5).uniform(-0.5, 1.5, (40000, 3))
        lo = np.array([0.25, 0.0, 0.5])
        outside = np.any((x < lo) | (x > lo + np.array([0.25, 0.5, 0.5])), axis=1)
        assert outside.sum() >= 10**4
        assert np.all(net(x[outside]) == 0.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            tensor_hat_net((1, 1), (2, 0), 1e-2)


class TestCPwL:
    def test_hat(self):
        net = cpwl_net(Breakpoints((0.0, 0.5, 1.0), (0.0, 1.0, 0.0)))
        assert np.max(np.abs(net(T) - closed_hat(0, 0, T))) <= 1e-12

    def test_exact_on_grid(self):
        bp = Breakpoints((0.0, 0.25, 0.5, 1.0), (0.0, 0.25, 0.0, 0.0))
        t = np.linspace(0, 1, 1000)
        assert np.max(np.abs(cpwl_net(bp)(t[:, None])[:, 0] - np.interp(t, bp.knots, bp.values))) <= 1e-12

    def test_zero_values(self):
        net = cpwl_net(Breakpoints((0.0, 0.3, 1.0), (0.0, 0.0, 0.0)))
        assert np.all(net(T) == 0.0)

    def test_knot_values_and_size(self):
        rng = np.random.default_rng(9)
        knots = (0.0,) + tuple(np.sort(rng.random(12))) + (1.0,)
        values = (0.0,) + tuple(rng.normal(size=13))
        bp = Breakpoints(knots, values)
        net = cpwl_net(bp)
        assert np.max(np.abs(net(np.array(knots)[:, None])[:, 0] - np.array(values))) <= 1e-12
        assert net.depth() == 2
        assert net.size() <= 3 * (len(knots) + 1)

    @pytest.mark.parametrize("knots, values", [((0.0, 0.5, 0.5), (0.0, 1.0, 0.0)), ((0.0, 1.0), (1.0, 0.0)), ((0.0,), (0.0,))])
    def test_errors(self, knots, values):
        with pytest.raises(ValueError):
            cpwl_net(Breakpoints(knots, values))
