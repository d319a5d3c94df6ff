import numpy as np
import pytest

from helpers import closed_hat, hat_net
from mixrelu.combinators import (
    ACCOUNTING,
    SpecialNetwork,
    concatenate,
    parallelize,
    special_combine,
    special_to_standard,
)
from mixrelu.network import ReluNetwork
from mixrelu.primitives import hat_univariate_net, square_net, tensor_hat_net

T = np.linspace(0.0, 1.0, 1025)[:, None]


def affine_net(a: float, b: float) -> ReluNetwork:
    """Two-layer net for t -> a t + b on all of R."""
    return ReluNetwork(1, [([[1.0], [-1.0]], [0.0, 0.0]), ([[a, -a]], [b])])


def deep_identity(depth: int) -> ReluNetwork:
    """t -> t on [0, 1] through ``depth - 1`` single ReLU nodes."""
    return ReluNetwork(1, [([[1.0]], [0.0])] * (depth - 1) + [([[1.0]], [0.0])])


class TestParallelize:
    def test_single_branch(self):
        net = hat_univariate_net(0, 0)
        assert np.allclose(parallelize([net], [1.0])(T), net(T), atol=1e-12)

    def test_two_hats(self):
        out = parallelize([hat_univariate_net(1, 0), hat_univariate_net(1, 1)], [1.0, 1.0])
        expected = closed_hat(1, 0, T) + closed_hat(1, 1, T)
        assert np.allclose(out(T), expected, atol=1e-12)

    def test_depth_is_max(self):
        out = parallelize([hat_univariate_net(0, 0), deep_identity(5)], [1.0, 1.0])
        assert out.depth() == 5

    def test_disjoint_sizes_add(self):
        a, b = hat_net(), hat_net().precompose_affine([1.0], [0.5])
        assert parallelize([a, b]).size() == a.size() + b.size()

    def test_negative_shallow_member_is_padded_exactly(self):
        neg = affine_net(-3.0, 0.5)
        out = parallelize([neg, square_net(4)], [2.0, -1.0])
        assert out.depth() == square_net(4).depth()
        assert np.allclose(out(T), 2.0 * neg(T) - square_net(4)(T), atol=1e-12)

    def test_size_bounds(self):
        nets = [hat_univariate_net(0, 0), deep_identity(6), affine_net(1.0, -2.0)]
        out = parallelize(nets, [1.0, 2.0, 3.0])
        L = out.depth()
        assert out.size() <= sum(n.size() for n in nets) + sum(L - n.depth() + 2 for n in nets if n.depth() < L)

    @pytest.mark.parametrize("bad", [[], None])
    def test_errors(self, bad):
        with pytest.raises(ValueError):
            parallelize(bad if bad is not None else [hat_net(), tensor_hat_net((0, 0), (0, 0), 0.1)])


class TestConcatenate:
    def test_affine_then_hat(self):
        out = concatenate(affine_net(2.0, -1.0), hat_univariate_net(0, 0))
        assert np.allclose(out(T), closed_hat(0, 0, 2 * T - 1), atol=1e-12)

    def test_identity_composition(self):
        net = hat_univariate_net(1, 1)
        assert np.allclose(concatenate(affine_net(1.0, 0.0), net)(T), net(T), atol=1e-12)

    def test_depth_adds(self):
        assert concatenate(affine_net(1.0, 0.0), deep_identity(3)).depth() == 5

    def test_size_bound(self):
        a, b = affine_net(2.0, -1.0), hat_net()
        assert concatenate(a, b).size() <= 2 * a.size() + 2 * b.size()

    def test_interface_mismatch(self):
        with pytest.raises(ValueError, match="interface"):
            concatenate(tensor_hat_net((0, 0), (0, 0), 0.1), ReluNetwork(2, [(np.eye(2), [0, 0]), ([[1, 1]], [0])]))


class TestSpecial:
    def test_difference_of_hats(self):
        snet = special_combine([hat_univariate_net(0, 0), hat_univariate_net(1, 0)], [1.0, -1.0], input_dim=1)
        assert isinstance(snet, SpecialNetwork)
        expected = closed_hat(0, 0, T) - closed_hat(1, 0, T)
        assert np.allclose(snet.evaluate(T), expected, atol=1e-12)

    def test_single_member(self):
        net = hat_univariate_net(1, 1)
        snet = special_combine([net])
        assert snet.depth() == net.depth()
        assert np.allclose(snet.evaluate(T), net(T), atol=1e-12)

    def test_size_and_depth(self):
        nets = [tensor_hat_net((1, 0), (1, 0), 0.1), tensor_hat_net((0, 1), (0, 0), 0.1)]
        snet = special_combine(nets, [1.0, -0.5])
        assert snet.depth() == sum(n.depth() for n in nets)
        assert snet.size() <= sum(n.size() for n in nets) + 3 * snet.depth()

    def test_to_standard_round_trip(self):
        nets = [tensor_hat_net((1, 0), (1, 0), 0.1), tensor_hat_net((0, 1), (0, 0), 0.1)]
        snet = special_combine(nets, [-1.0, 0.5])
        std = special_to_standard(snet)
        x = np.random.default_rng(0).random((4096, 2))
        assert np.allclose(std(x), snet.evaluate(x), atol=1e-12)
        assert std.depth() == snet.depth()
        assert std.size() <= 2 * snet.size()
        assert std.size() <= snet.size() + snet.depth()

    def test_mismatched_dims(self):
        with pytest.raises(ValueError):
            special_combine([hat_net(), tensor_hat_net((0, 0), (0, 0), 0.1)])


def test_accounting_log_has_no_violations():
    parallelize([hat_net(), deep_identity(4)])
    special_to_standard(special_combine([hat_net(), hat_net()], [1.0, -1.0]))
    assert ACCOUNTING.records
    assert ACCOUNTING.violations() == []
