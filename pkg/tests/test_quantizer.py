import math

import numpy as np
import pytest

from helpers import closed_hat, grid, linspace_grid
from mixrelu.faber import Certificate, TargetFunction, product_bump, random_holder_univariate
from mixrelu.quantizer import (
    CertificateViolation,
    HighDimPattern,
    QuantPattern,
    cardinality_bounds,
    highdim_error_bound,
    highdim_key_count,
    highdim_pattern_eval,
    pattern_to_net,
    quantize_highdim,
    quantize_univariate,
    quantize_values,
    univariate_error_bound,
)


def uni(fn, alpha=1.0):
    return TargetFunction(lambda x: fn(x[:, 0]), alpha, 1, Certificate("analytic"))


class TestUnivariate:
    def test_tie_goes_to_previous(self):
        p = quantize_univariate(uni(lambda t: t * (1 - t)), 0)
        assert p.l == (0, 0)

    def test_zero_function(self):
        assert quantize_univariate(uni(np.zeros_like), 3).is_zero

    def test_tie_rule_completion(self):
        # value exactly between 1 and 2 with previous 0: both differ from 0, smaller wins
        assert quantize_values(np.array([0.0, 0.5, 1.5, 0.0]), 1.0).tolist() == [0, 0, 1]
        assert quantize_values(np.array([0.0, 1.0, 1.5, 0.0]), 1.0).tolist() == [0, 1, 1]
        assert quantize_values(np.array([0.0, 1.0, 2.0, 2.5, 0.0]), 1.0).tolist() == [0, 1, 2, 2]

    def test_rejects_nonvanishing(self):
        with pytest.raises(ValueError):
            quantize_univariate(uni(lambda t: t), 2)

    def test_certificate_violation(self):
        with pytest.raises(CertificateViolation):
            quantize_univariate(uni(lambda t: 3 * t * (1 - t)), 2)

    @pytest.mark.parametrize("m", range(7))
    @pytest.mark.parametrize("alpha", [1.0, 0.5])
    def test_random_certified(self, m, alpha):
        rng = np.random.default_rng(100 + m)
        t = np.linspace(0, 1, 2 ** (m + 5) + 1)
        bound = univariate_error_bound(alpha, m)
        for _ in range(20):
            g = random_holder_univariate(rng, alpha)
            p = quantize_univariate(g, m)
            nodes = np.arange(2 ** (m + 1) + 1) / 2 ** (m + 1)
            assert np.max(np.abs(p.node_values() - g(nodes[:, None]))) <= p.step / 2
            assert max(abs(a - b) for a, b in zip(p.l + (0,), p.l[1:] + (0,))) <= 1
            assert np.max(np.abs(g(t[:, None]) - p.evaluate(t))) <= bound

    def test_deterministic(self):
        g = random_holder_univariate(np.random.default_rng(0), 1.0)
        assert quantize_univariate(g, 4) == quantize_univariate(g, 4)

    def test_serialization(self):
        p = quantize_univariate(random_holder_univariate(np.random.default_rng(1), 1.0), 3)
        assert QuantPattern.from_dict(p.to_dict()) == p


class TestPatternNet:
    def test_zero_pattern(self):
        net = pattern_to_net(QuantPattern(2, 1.0, (0,) * 8))
        assert np.all(net(np.linspace(0, 1, 33)[:, None]) == 0.0)

    def test_single_entry(self):
        p = QuantPattern(1, 1.0, (0, 0, 1, 0))
        t = np.linspace(0, 1, 257)
        expected = p.step * closed_hat(0, 0, 2 * t - 0.5)  # phi*_{1,2} peaks at 1/2
        assert np.max(np.abs(pattern_to_net(p)(t[:, None])[:, 0] - expected)) <= 1e-12

    def test_node_values(self):
        p = quantize_univariate(random_holder_univariate(np.random.default_rng(2), 1.0), 4)
        nodes = np.arange(2**5 + 1) / 2**5
        assert np.max(np.abs(pattern_to_net(p)(nodes[:, None])[:, 0] - p.node_values())) <= 1e-12

    def test_size_linear_in_nodes(self):
        for m in range(1, 6):
            p = quantize_univariate(random_holder_univariate(np.random.default_rng(m), 1.0), m)
            assert pattern_to_net(p).size() <= 3 * (2 ** (m + 1) + 2)


class TestHighDim:
    def test_zero_function(self):
        f = TargetFunction(lambda x: np.zeros(len(x)), 1.0, 2, Certificate("analytic"))
        assert quantize_highdim(f, 3).is_zero

    @pytest.mark.parametrize("m, bound", [(2, 1.0), (3, 0.625), (4, 0.375)])
    def test_product_bump_bound(self, m, bound):
        f = product_bump(2)
        S = quantize_highdim(f, m)
        assert highdim_error_bound(1.0, 2, m) == bound
        x = grid(8, 2)
        assert np.max(np.abs(f(x) - highdim_pattern_eval(S, x))) <= bound

    @pytest.mark.parametrize("m, d", [(2, 2), (3, 2), (2, 3), (3, 3)])
    def test_key_count(self, m, d):
        S = quantize_highdim(product_bump(d), m)
        expected = sum(2**l * math.comb(l + d - 2, d - 2) for l in range(m + 1))
        assert len(S.patterns) == highdim_key_count(m, d) == expected

    def test_levels_match(self):
        S = quantize_highdim(product_bump(3), 3)
        assert all(p.level == 3 - sum(kbar) for (kbar, _), p in S.patterns.items())

    def test_single_entry_closed_form(self):
        pat = QuantPattern(1, 1.0, (0, 1, 1, 0))
        S = HighDimPattern(2, 2, 1.0, {((1,), (1,)): pat})
        x = linspace_grid(65, 2)
        expected = 2.0**-2 * closed_hat(1, 1, x[:, 1]) * pat.evaluate(x[:, 0])
        assert np.max(np.abs(highdim_pattern_eval(S, x) - expected)) <= 1e-12

    def test_zero_off_cube(self):
        S = quantize_highdim(product_bump(2), 3)
        assert np.all(highdim_pattern_eval(S, np.array([[1.5, 0.5], [0.5, -0.2]])) == 0.0)

    def test_hash_by_integers(self):
        a = quantize_highdim(product_bump(2), 3)
        b = quantize_highdim(product_bump(2), 3)
        assert a == b and hash(a) == hash(b)
        assert len({a, b}) == 1

    def test_requires_m_above_one(self):
        with pytest.raises(ValueError):
            quantize_highdim(product_bump(2), 1)


class TestCardinality:
    def test_values(self):
        assert cardinality_bounds(0, 2)[0] == 9
        assert cardinality_bounds(1, 2) == (81, 6561)

    def test_big_integers(self):
        big = cardinality_bounds(6, 4)[1]
        assert isinstance(big, int) and big > 2**64

    def test_monotone(self):
        for m in range(5):
            for d in range(2, 5):
                assert cardinality_bounds(m + 1, d)[1] > cardinality_bounds(m, d)[1]
                assert cardinality_bounds(m, d + 1)[1] >= cardinality_bounds(m, d)[1]

    def test_observed_patterns_below_bound(self):
        rng = np.random.default_rng(4)
        seen = {quantize_univariate(random_holder_univariate(rng, 1.0), 0).l for _ in range(200)}
        assert len(seen) <= cardinality_bounds(0, 2)[0]
