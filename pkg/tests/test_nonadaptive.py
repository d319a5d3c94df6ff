import math

import numpy as np
import pytest

from helpers import grid
from mixrelu.faber import get_preset, product_bump, single_hat, truncation_eval
from mixrelu.network import has_architecture, minimal_architecture
from mixrelu.nonadaptive import InfeasibleTolerance, build_Rn_net, choose_n, log2_h


def h(n, alpha=1.0, d=2):
    return 2.0 ** log2_h(n, alpha, d)


class TestChooseN:
    def test_threshold_alpha1_d2(self):
        plan = choose_n(0.05, 1.0, 2)
        assert plan.n0 == 5
        assert plan.epsilon0 == 0.109375

    def test_two_sided_at_half_threshold(self):
        plan = choose_n(0.109375 / 2, 1.0, 2)
        assert h(plan.n) <= plan.epsilon / 2 < h(plan.n - 1)
        assert plan.n > max(plan.n0, 2)

    @pytest.mark.parametrize("eps, n", [(0.1, 7), (0.06, 8), (0.035, 9), (0.02, 10)])
    def test_frozen_levels(self, eps, n):
        assert choose_n(eps, 1.0, 2).n == n

    def test_monotone(self):
        ns = [choose_n(e, 1.0, 3).n for e in np.geomspace(5e-3, 1e-8, 25)]
        assert ns == sorted(ns)

    @pytest.mark.parametrize("alpha, d", [(1.0, 2), (1.0, 3), (0.5, 2), (0.75, 4)])
    def test_n_upper_bound(self, alpha, d):
        eps0 = choose_n(1e-12, alpha, d).epsilon0
        for eps in np.geomspace(eps0 / 2, 1e-12, 15):
            plan = choose_n(eps, alpha, d)
            assert plan.n <= 2 / alpha * math.log2(2 / eps)

    def test_plan_constants(self):
        plan = choose_n(0.05, 1.0, 2)
        assert plan.epsilon_prime == 0.025
        assert plan.delta == 0.025
        assert plan.bounds["K1"] == 4.0

    @pytest.mark.parametrize("eps", [0.25, 0.109375, 1.0])
    def test_infeasible_carries_threshold(self, eps):
        with pytest.raises(InfeasibleTolerance) as info:
            choose_n(eps, 1.0, 2)
        assert info.value.epsilon0 == 0.109375

    def test_rejects_d1(self):
        with pytest.raises(ValueError):
            choose_n(0.01, 1.0, 1)


class TestRnNet:
    def test_single_hat(self):
        f = single_hat((1, 2), (1, 0))
        net = build_Rn_net(f, 3, 0.01)
        x = grid(7, 2)
        assert np.max(np.abs(net(x)[:, 0] - f(x))) <= 0.01

    @pytest.mark.parametrize("n", [2, 4])
    def test_product_bump_within_eps_prime(self, n):
        f = product_bump(2)
        net = build_Rn_net(f, n, 0.02)
        x = grid(n + 4, 2)
        assert np.max(np.abs(net(x)[:, 0] - truncation_eval(f, n, x))) <= 0.02

    def test_shared_architecture(self):
        arch = minimal_architecture(build_Rn_net(None, 3, 0.05, weighted=False, d=2))
        for name in ("product-bump", "faber-random(0,3)", "faber-random(5,2)", "single-hat"):
            assert has_architecture(build_Rn_net(get_preset(name, 2), 3, 0.05), arch)
        again = minimal_architecture(build_Rn_net(None, 3, 0.05, weighted=False, d=2))
        assert again == arch

    def test_zero_coefficients_keep_slots(self):
        f = single_hat((0, 0), (0, 0))
        net = build_Rn_net(f, 2, 0.05)
        unweighted = build_Rn_net(None, 2, 0.05, weighted=False, d=2)
        assert net.dimension() == unweighted.dimension()
        assert net.size() < unweighted.size()

    def test_size_and_depth_bounds(self):
        n, eps_prime = 3, 0.05
        net = build_Rn_net(product_bump(2), n, eps_prime)
        logterm = math.log2(2 / eps_prime)
        assert net.size() <= 20 * 2 * 2**n * math.comb(n + 1, 1) * logterm
        assert net.depth() <= 2 * logterm

    def test_invalid(self):
        with pytest.raises(ValueError):
            build_Rn_net(product_bump(2), -1, 0.1)
        with pytest.raises(ValueError):
            build_Rn_net(None, 2, 0.1)
