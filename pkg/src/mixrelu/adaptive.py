"""Adaptive construction: quantized residual surrogates realized with pattern reuse."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._circuit import Circuit, Lin
from .combinators import parallelize, special_combine, special_to_standard
from .faber import B_const, MultiIndex, T_eval, T_rescale_eval, TargetFunction, Certificate, truncation_eval
from .network import ReluNetwork, zero_network
from .nonadaptive import InfeasibleTolerance, build_Rn_net
from .primitives import cpwl_forms, hat_nodes, product_levels, product_tree
from .quantizer import HighDimPattern, highdim_pattern_eval, quantize_highdim

__all__ = [
    "AdaptivePlan",
    "ResidualBlock",
    "Skm_eval",
    "aggregate_lambda",
    "build_S_net",
    "build_Skm_net",
    "build_adaptive",
    "choose_n_m",
    "decompose_residual",
    "residual_eval",
    "shift_combine",
    "surrogate_bound",
]

LOG2_3 = math.log2(3.0)


# --------------------------------------------------------------- residual
@dataclass(frozen=True)
class ResidualBlock:
    """``F_{k_j} = sum_{l in lambda_set} c_l T_l(f)`` for a first-``j``-coordinates index ``k_j``."""

    j: int
    k_j: tuple[int, ...]
    lambda_set: tuple[tuple[tuple[int, ...], int], ...]


def decompose_residual(f_or_d, n: int) -> list[ResidualBlock]:
    """Blocks of ``f - R_n(f) = sum_{j<d} sum_{|k_j|_1 <= n} F_{k_j}``.

    ``F_{k_j} = (q_{k_1} x ... x q_{k_j}) x T_{n+1-|k_j|_1} x I x ... x I``
    with ``q_k = T_k - T_{k+1}``.  Expanding the differences gives
    ``Lambda(k_j) = {(k_j + e, n + 1 - |k_j|_1, 0, ..., 0) : e in {0,1}^j}``
    with sign ``(-1)^{|e|}``.  Zero components need no special case since
    ``T_0`` is the identity.
    """
    d = f_or_d if isinstance(f_or_d, int) else f_or_d.dim
    if n < 1:
        raise ValueError("n must be >= 1")
    blocks = []
    for j in range(d):
        for kj in _cross_exact(n, j):
            rest = n + 1 - sum(kj)
            lam = []
            for e in itertools.product((0, 1), repeat=j):
                ell = tuple(a + b for a, b in zip(kj, e)) + (rest,) + (0,) * (d - j - 1)
                lam.append((ell, (-1) ** sum(e)))
            blocks.append(ResidualBlock(j, kj, tuple(lam)))
    return blocks


def _cross_exact(n: int, j: int) -> list[tuple[int, ...]]:
    if j == 0:
        return [()]
    return [k for k in itertools.product(range(n + 1), repeat=j) if sum(k) <= n]


def aggregate_lambda(blocks: Sequence[ResidualBlock]) -> dict[tuple[int, ...], int]:
    """Net coefficient of every ``T_l`` over all blocks (zero totals dropped)."""
    agg: dict[tuple[int, ...], int] = {}
    for b in blocks:
        for ell, c in b.lambda_set:
            agg[ell] = agg.get(ell, 0) + c
    return {ell: c for ell, c in sorted(agg.items()) if c != 0}


def residual_eval(f: TargetFunction, n: int, x, blocks=None) -> np.ndarray:
    """``sum_blocks sum_l c_l T_l(f)(x)``; equals ``f - R_n(f)`` pointwise."""
    blocks = decompose_residual(f, n) if blocks is None else blocks
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.zeros(len(x))
    for ell, c in aggregate_lambda(blocks).items():
        out += c * T_eval(f, ell, x)
    return out


# ------------------------------------------------------- S-pattern networks
def _block_circuit(d: int, kbar, sbar, pattern, delta: float) -> ReluNetwork:
    """``S(x_1) prod_j phi_{kbar_j, sbar_j}(x_{j+1})`` within ``delta``."""
    c = Circuit(d)
    xs = c.inputs()
    bp = pattern.breakpoints()
    amp = float(np.max(np.abs(bp.values)))
    scale = 2.0 ** math.ceil(math.log2(amp))
    s_form = cpwl_forms(c, xs[0], bp, 1.0 / scale)
    hats = hat_nodes(c, [x * 2.0 ** (kj + 1) - 2.0 * sj for x, kj, sj in zip(xs[1:], kbar, sbar)])
    s_held = c.hold(s_form, nonneg=False)
    levels = product_levels(d, min(delta / scale, 0.5))
    out = product_tree(c, [s_held] + hats, [True] + [False] * (d - 1), levels)
    return c.network([out * scale])


def build_S_net(S: HighDimPattern, eps: float) -> ReluNetwork:
    """Network within ``eps`` of the function of a high-dimensional pattern.

    Each nonzero ``(kbar, sbar)`` term is a CPwL encoder times hat nodes
    through a signed product tree at tolerance ``eps B^{1-d}``.  Terms are
    stacked over ``sbar`` with the special construction and summed over
    ``kbar`` by parallelization.  The output vanishes outside ``[0, 1]^d``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    d = S.dim
    delta = eps * B_const(S.alpha) ** (1 - d)
    by_k: dict[tuple[int, ...], list[ReluNetwork]] = {}
    for (kbar, sbar), pat in sorted(S.patterns.items()):
        if pat.is_zero:
            continue
        by_k.setdefault(kbar, []).append(_block_circuit(d, kbar, sbar, pat, delta))
    if not by_k:
        return zero_network(d)
    nets, coeffs = [], []
    for kbar, members in by_k.items():
        nets.append(members[0] if len(members) == 1 else special_to_standard(special_combine(members, input_dim=d)))
        coeffs.append(S.weight(kbar))
    return parallelize(nets, coeffs)


# ------------------------------------------------------------ shift gadget
def shift_combine(phi: ReluNetwork, lam: Sequence[int], k: int, axis: int = 0) -> ReluNetwork:
    """Network for ``sum_{s in lam} phi(x_1, .., 2^k x_axis - s, .., x_d)`` on ``[0, 1]^d``.

    ``phi`` must vanish whenever its ``axis`` argument leaves ``[0, 1]``.
    Shifts are split into residue classes mod 3 so that gate supports do not
    overlap; each class uses two copies of ``phi`` and a clamp, applied to the
    positive and negative parts separately.  Depth is ``depth(phi) + 4``.
    """
    lam = sorted(set(int(s) for s in lam))
    if not lam:
        raise ValueError("lam must be nonempty")
    if lam[0] < 0 or lam[-1] >= 2**k:
        raise ValueError(f"shifts must lie in Z({k})")
    d = phi.input_dim
    c = Circuit(d)
    xs = c.inputs()
    t = xs[axis] * 2.0**k
    gates: dict[int, Lin | None] = {}
    x_node: list[Lin] = []

    def gate(s: int):
        if s not in gates:
            if s == 2**k:
                gates[s] = None
            elif s == 2**k - 1:
                if not x_node:
                    x_node.append(c.relu(xs[axis]))
                gates[s] = c.relu(x_node[0] * 2.0**k - float(2**k - 1))
            else:
                n1 = c.relu(t - float(s + 1))
                n2 = c.relu(float(s + 1) - t)
                gates[s] = c.relu(1.0 - n1 - n2)
        return gates[s]

    others = {j: c.carry(xs[j], 2, nonneg=True) for j in range(d) if j != axis}
    out = Lin.const(phi.depth() + 3, 0.0)
    for i in range(3):
        cls = [s for s in lam if s % 3 == i]
        if not cls:
            continue
        g1 = Lin.const(2, 0.0)
        g2 = Lin.const(2, 1.0)
        for s in cls:
            g1 = g1 + gate(s)
            nxt = gate(s + 1)
            if nxt is not None:
                g2 = g2 - nxt
        outs = []
        for g in (g1, g2):
            ins = [g if j == axis else others[j] for j in range(d)]
            outs.append(c.embed(phi, ins)[0])
        p1, n1 = c.relu(outs[0]), c.relu(-outs[0])
        p2, n2 = c.relu(outs[1]), c.relu(-outs[1])
        out = out + c.relu(p1 - p2) - c.relu(n1 - n2)
    return c.network([out])


# ------------------------------------------------------- residual surrogates
def _axis_perm(k: Sequence[int]) -> list[int]:
    """Permutation putting the first largest level first, the others in order."""
    a = int(np.argmax(k))
    return [a] + [j for j in range(len(k)) if j != a]


def _rescaled_target(f: TargetFunction, k, s, perm) -> TargetFunction:
    """``T_{k,s}(f)`` read in permuted coordinates ``y = x[perm]``."""
    inv = np.argsort(perm)

    def ev(y: np.ndarray) -> np.ndarray:
        return T_rescale_eval(f, k, s, y[:, inv])

    return TargetFunction(ev, f.alpha, f.dim, Certificate("sampled", "rescaled residual"), "T_ks")


def skm_patterns(f: TargetFunction, k: Sequence[int], m: int):
    """Permutation and ``{s (permuted): S_m(T_{k,s} f)}`` for every cell ``s``."""
    k = tuple(int(v) for v in k)
    perm = _axis_perm(k)
    kp = tuple(k[p] for p in perm)
    inv = np.argsort(perm)
    pats = {}
    for sp in MultiIndex(kp).Z():
        s = tuple(int(sp[i]) for i in inv)
        pats[sp] = quantize_highdim(_rescaled_target(f, k, s, perm), m)
    return perm, kp, pats


def Skm_eval(f: TargetFunction, k: Sequence[int], m: int, x, patterns=None) -> np.ndarray:
    """``S_{k,m}(f)(x) = 2^{-alpha|k|_1 + d} sum_s S_m(T_{k,s} f)(2^k x - s)``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    perm, kp, pats = skm_patterns(f, k, m) if patterns is None else patterns
    y = x[:, perm]
    scale = np.array([2.0**v for v in kp])
    out = np.zeros(len(x))
    for sp, pat in pats.items():
        if pat.is_zero:
            continue
        z = y * scale - np.array(sp, dtype=np.float64)
        mask = np.all((z >= 0.0) & (z <= 1.0), axis=1)
        if mask.any():
            out[mask] += highdim_pattern_eval(pat, z[mask])
    return 2.0 ** (-f.alpha * sum(kp) + f.dim) * out


def build_Skm_net(f: TargetFunction, k: Sequence[int], m: int, eps: float, cache: dict | None = None, stats: dict | None = None) -> ReluNetwork:
    """Network within ``2^{-alpha|k|_1 + d} eps`` of ``S_{k,m}(f)``.

    The largest level is moved to the first axis.  For every ``sbar`` the
    cells ``s_1`` are grouped by identical pattern; one pattern network is
    built per group and replicated along the first axis by
    :func:`shift_combine`.
    """
    d = f.dim
    cache = {} if cache is None else cache
    perm, kp, pats = skm_patterns(f, k, m)
    k1, kbar = kp[0], kp[1:]
    groups: dict[tuple[int, ...], dict[HighDimPattern, list[int]]] = {}
    for sp, pat in pats.items():
        if pat.is_zero:
            continue
        groups.setdefault(sp[1:], {}).setdefault(pat, []).append(sp[0])
    per_sbar = []
    n_patterns = 0
    for sbar, by_pat in sorted(groups.items()):
        members = []
        for pat, lam in by_pat.items():
            n_patterns += 1
            key = (pat, eps)
            if key not in cache:
                cache[key] = build_S_net(pat, eps)
            phi = cache[key]
            scale = [1.0] + [2.0**kj for kj in kbar]
            shift = [0.0] + [-float(sj) for sj in sbar]
            members.append(shift_combine(phi.precompose_affine(scale, shift), lam, k1, axis=0))
        per_sbar.append(members[0] if len(members) == 1 else special_to_standard(special_combine(members, input_dim=d)))
    if stats is not None:
        stats["distinct_patterns"] = n_patterns
        stats["cells"] = len(pats)
        stats["sbar_groups"] = len(per_sbar)
    if not per_sbar:
        return zero_network(d)
    weight = 2.0 ** (-f.alpha * sum(kp) + d)
    return parallelize(per_sbar, [weight] * len(per_sbar)).permute_inputs(perm)


def surrogate_bound(alpha: float, d: int, m: int, ell: Sequence[int]) -> float:
    """``(2B)^d (2^m 2^{|l|_1})^{-alpha} binom(m + d, d - 1)``."""
    return (2.0 * B_const(alpha)) ** d * 2.0 ** (-alpha * (m + sum(ell))) * math.comb(m + d, d - 1)


# ------------------------------------------------------------------ plan
def _log2_K(alpha: float, d: int) -> float:
    B = B_const(alpha)
    return (
        1.0
        + d * math.log2(2.0 ** (alpha + 2) * B)
        + alpha * math.log2(4.0 * d * LOG2_3)
        + (alpha + 2.0) * (d - 1 - math.log2(math.factorial(d - 1)))
    )


def log2_h_adaptive(n: int, alpha: float, d: int) -> float:
    """``log2`` of ``K_{d,alpha} 2^{-alpha n} n^{d-1-alpha} (log2 n)^{(alpha+1)(d-1)}``."""
    if n < 2:
        return math.inf
    return (
        _log2_K(alpha, d)
        - alpha * n
        + (d - 1 - alpha) * math.log2(n)
        + (alpha + 1.0) * (d - 1) * math.log2(math.log2(n))
    )


def _log2_mdmm(m: int, d: int, upper: bool) -> float:
    """``log2`` of the left (``upper=False``) or right side of the ``m`` selection rule."""
    if upper:
        b = math.comb(m + d, d - 1)
        return math.log2(math.log2(d)) + 2 ** (m + 2) * b * LOG2_3 + (m + 1) + math.log2(b) + math.log2(m + 1)
    b = math.comb(m + d - 1, d - 1)
    return math.log2(math.log2(d)) + 2 ** (m + 1) * b * LOG2_3 + m + math.log2(b) + math.log2(m)


@dataclass
class AdaptivePlan:
    """Parameters of one adaptive build; ``certified_bound`` is the provable sup error."""

    epsilon: float | None
    alpha: float
    d: int
    n: int
    m: int
    epsilon_prime: float
    epsilon0: float | None = None
    constants: dict = field(default_factory=dict)
    certified_bound: float | None = None
    explicit: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _adaptive_thresholds(alpha: float, d: int, scan_limit: int = 200000) -> dict:
    B = B_const(alpha)
    m0 = d
    while d * math.log2(B) - alpha * m0 + math.log2(math.comb(m0 + d, d - 1)) >= 0.0:
        m0 += 1
    n1 = math.floor(8 * d * LOG2_3 * 2**m0 * math.comb(m0 + d - 1, d - 1)) + 1
    n0 = 2
    for n in range(3, scan_limit):
        lh, lprev = log2_h_adaptive(n, alpha, d), log2_h_adaptive(n - 1, alpha, d)
        if not (lh < lprev and lprev <= -alpha * n / 2.0):
            n0 = n + 1
    log2_eps0 = min(log2_h_adaptive(n0, alpha, d), log2_h_adaptive(n1, alpha, d), -1.0)
    return {"m0": m0, "n0": n0, "n1": n1, "log2_epsilon0": log2_eps0, "log2_K": _log2_K(alpha, d)}


def choose_n_m(epsilon: float, alpha: float, d: int) -> AdaptivePlan:
    """Select ``(n, m)`` by the two-sided rules; all quantities are handled in ``log2``.

    Raises :class:`InfeasibleTolerance` (carrying ``epsilon0``) when
    ``epsilon >= epsilon0``.  ``epsilon0`` underflows double precision for
    small ``d``, so ``constants['log2_epsilon0']`` is the reliable value.
    """
    if d < 2:
        raise ValueError("the adaptive construction needs d >= 2")
    th = _adaptive_thresholds(alpha, d)
    eps0 = 2.0 ** th["log2_epsilon0"]
    if not (epsilon > 0.0 and math.log2(epsilon) < th["log2_epsilon0"]):
        raise InfeasibleTolerance(epsilon, eps0)
    target = math.log2(epsilon / 2.0)
    n = max(th["n0"], th["n1"])
    while log2_h_adaptive(n, alpha, d) > target:
        n += 1
    m = 1
    while _log2_mdmm(m + 1, d, upper=False) <= n / d:
        m += 1
    eps_prime = B_const(alpha) ** d * 2.0 ** (-alpha * m) * math.comb(m + d, d - 1)
    return AdaptivePlan(epsilon, alpha, d, n, m, eps_prime, eps0, th)


def _certified_bound(alpha, d, n, m, eps_rn, eps_prime, agg) -> float:
    tail = sum(abs(c) * (surrogate_bound(alpha, d, m, ell) + 2.0 ** (-alpha * sum(ell) + d) * eps_prime) for ell, c in agg.items())
    return eps_rn + tail


def build_adaptive(
    f: TargetFunction,
    epsilon: float | None = None,
    n: int | None = None,
    m: int | None = None,
    eps_prime: float | None = None,
) -> tuple[ReluNetwork, AdaptivePlan]:
    """Adaptive network for ``f``.

    With only ``epsilon`` the parameters come from :func:`choose_n_m`.  With
    explicit ``n`` and ``m`` (``epsilon`` then sets the tolerance of the
    ``R_n`` half, default ``1e-2``) the plan records the certified bound of
    the resulting network instead of a target.
    """
    d, alpha = f.dim, f.alpha
    explicit = n is not None or m is not None
    if explicit:
        if n is None or m is None:
            raise ValueError("give both n and m")
        eps_total = 2e-2 if epsilon is None else float(epsilon)
        eps_p = B_const(alpha) ** d * 2.0 ** (-alpha * m) * math.comb(m + d, d - 1)
        plan = AdaptivePlan(epsilon, alpha, d, int(n), int(m), eps_p, explicit=True)
    else:
        plan = choose_n_m(epsilon, alpha, d)
        eps_total = epsilon
    if eps_prime is not None:
        plan.epsilon_prime = float(eps_prime)
    net_eps = min(plan.epsilon_prime, 0.5)
    agg = aggregate_lambda(decompose_residual(d, plan.n))
    cache: dict = {}
    nets = [build_Rn_net(f, plan.n, eps_total / 2.0)]
    coeffs = [1.0]
    per_ell = {}
    for ell, c in agg.items():
        stats: dict = {}
        sub = build_Skm_net(f, ell, plan.m, net_eps, cache, stats)
        stats["size"] = sub.size()
        per_ell[ell] = stats
        nets.append(sub)
        coeffs.append(float(c))
    net = parallelize(nets, coeffs)
    plan.certified_bound = _certified_bound(alpha, d, plan.n, plan.m, eps_total / 2.0, net_eps, agg)
    plan.constants.update({"per_ell": per_ell, "distinct_pattern_nets": len(cache), "Rn_size": nets[0].size()})
    return net, plan
