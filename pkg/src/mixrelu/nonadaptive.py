"""Nonadaptive construction: one architecture per tolerance, weights from the truncated Faber series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .combinators import parallelize
from .faber import B_const, TargetFunction, faber_expansion, hyperbolic_cross, MultiIndex
from .network import Architecture, ReluNetwork, minimal_architecture
from .primitives import tensor_hat_net

__all__ = ["InfeasibleTolerance", "NonadaptivePlan", "build_Rn_net", "build_nonadaptive", "choose_n", "log2_h"]

_SCAN_LIMIT = 4000


class InfeasibleTolerance(ValueError):
    """The requested tolerance is not below the validity threshold ``epsilon0``."""

    def __init__(self, epsilon: float, epsilon0: float):
        super().__init__(f"epsilon={epsilon:g} is not below epsilon0={epsilon0:.6g}")
        self.epsilon = epsilon
        self.epsilon0 = epsilon0


def log2_h(n: int, alpha: float, d: int) -> float:
    """``log2`` of ``2^{-alpha} B^d 2^{-alpha n} binom(n + d, d - 1)``."""
    return -alpha - d * math.log2(2.0**alpha - 1.0) - alpha * n + math.log2(math.comb(n + d, d - 1))


def _scan_n0(alpha: float, d: int) -> int:
    """Last ``n`` where ``h`` fails to decrease or ``h(n - 1) > 2^{-alpha n / 2}``."""
    n0 = 0
    for n in range(1, _SCAN_LIMIT):
        lh, lprev = log2_h(n, alpha, d), log2_h(n - 1, alpha, d)
        if not (lh < lprev and lprev <= -alpha * n / 2.0):
            n0 = n
    return n0


@dataclass
class NonadaptivePlan:
    """Parameters of one nonadaptive build."""

    epsilon: float
    alpha: float
    d: int
    n: int
    epsilon_prime: float
    delta: float
    epsilon0: float
    n0: int
    bounds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _bounds(alpha: float, d: int, n: int, eps: float, eps_prime: float) -> dict:
    B = B_const(alpha)
    logterm = math.log2(d * B**d / eps_prime)
    return {
        "B": B,
        "K1": B ** (1.0 / (alpha + 1.0)) * 4.0 / alpha,
        "truncation_error": 2.0 ** log2_h(n, alpha, d),
        "n_upper": 2.0 / alpha * math.log2(2.0 / eps),
        "W_lemma": d * 2.0**n * math.comb(n + d - 1, d - 1) * logterm,
        "L_lemma": max(math.log2(d), 1.0) * logterm,
        "W_theorem": eps ** (-1.0 / alpha) * math.log2(2.0 / eps) ** ((d - 1) * (1.0 / alpha + 1.0) + 1.0),
        "L_theorem": max(math.log2(d), 1.0) * math.log2(2.0 / eps),
    }


def choose_n(epsilon: float, alpha: float, d: int) -> NonadaptivePlan:
    """Pick the truncation level ``n`` for tolerance ``epsilon``.

    ``n`` is the unique level above ``max(n0, d)`` with
    ``h(n) <= epsilon / 2 < h(n - 1)``.  Raises :class:`InfeasibleTolerance`
    when ``epsilon >= epsilon0``.
    """
    if d < 2:
        raise ValueError("the nonadaptive construction needs d >= 2")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    n0 = _scan_n0(alpha, d)
    eps0 = min(2.0 ** log2_h(n0, alpha, d), 2.0 ** log2_h(d, alpha, d))
    if not 0.0 < epsilon < eps0:
        raise InfeasibleTolerance(epsilon, eps0)
    target = math.log2(epsilon / 2.0)
    n = max(n0, d) + 1
    while log2_h(n, alpha, d) > target:
        n += 1
    eps_prime = epsilon / 2.0
    delta = B_const(alpha) ** (-d) * eps_prime
    return NonadaptivePlan(epsilon, alpha, d, n, eps_prime, delta, eps0, n0, _bounds(alpha, d, n, epsilon, eps_prime))


@lru_cache(maxsize=512)
def _hat_template(k: tuple[int, ...], delta: float) -> ReluNetwork:
    return tensor_hat_net(k, (0,) * len(k), delta)


def build_Rn_net(f: TargetFunction | None, n: int, eps_prime: float, weighted: bool = True, d: int | None = None) -> ReluNetwork:
    """Parallelization of ``lambda_{k,s}(f) * Phi_delta(phi_{k,s})`` over ``|k|_1 <= n``.

    ``delta = B^{-d} eps_prime`` keeps the output within ``eps_prime`` of
    ``R_n(f)``.  With ``weighted=False`` every coefficient is 1, which gives
    the shared architecture.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if f is None and weighted:
        raise ValueError("a weighted build needs a target function")
    d = f.dim if f is not None else int(d)
    alpha = f.alpha if f is not None else 1.0
    delta = B_const(alpha) ** (-d) * eps_prime
    if delta >= 1.0:
        delta = 0.5
    exp = faber_expansion(f, n) if weighted else None
    nets, coeffs = [], []
    ones = np.ones(d)
    for k in hyperbolic_cross(n, d):
        template = _hat_template(k, delta)
        scale = np.array([2.0**-kj for kj in k])
        block = exp.coeffs[k] if weighted else None
        for s in MultiIndex(k).Z():
            shift = -scale * np.array(s, dtype=np.float64)
            nets.append(template if not any(s) else template.precompose_affine(ones, shift))
            coeffs.append(float(block[s]) if weighted else 1.0)
    return parallelize(nets, coeffs)


def build_nonadaptive(f: TargetFunction, epsilon: float) -> tuple[ReluNetwork, NonadaptivePlan, Architecture]:
    """Network within ``epsilon`` of ``f``, its plan, and the shared architecture."""
    plan = choose_n(epsilon, f.alpha, f.dim)
    net = build_Rn_net(f, plan.n, plan.epsilon_prime)
    arch = minimal_architecture(build_Rn_net(None, plan.n, plan.epsilon_prime, weighted=False, d=f.dim))
    plan.bounds["W_constant"] = net.size() / plan.bounds["W_lemma"]
    plan.bounds["L_constant"] = net.depth() / plan.bounds["L_lemma"]
    plan.bounds["W_architecture"] = arch.size()
    return net, plan, arch
