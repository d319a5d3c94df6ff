"""Primitive networks: hats, squaring, zero-preserving products, CPwL encoders."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._circuit import Circuit, Lin
from .network import ReluNetwork, zero_network

__all__ = [
    "Breakpoints",
    "cpwl_net",
    "dual_hat_net",
    "hat_univariate_net",
    "product_levels",
    "product_net",
    "square_net",
    "tensor_hat_net",
]


def _hat_from_affine(scale: float, shift: float) -> ReluNetwork:
    """``phi(scale * x + shift)`` as ``s(t) - 2 s(t - 1) + s(t - 2)``."""
    w1 = np.full((3, 1), float(scale))
    b1 = np.array([shift, shift - 1.0, shift - 2.0])
    return ReluNetwork(1, [(w1, b1), (np.array([[1.0, -2.0, 1.0]]), [0.0])])


def hat_univariate_net(k: int, s: int) -> ReluNetwork:
    """Exact network for the Faber hat ``phi_{k,s}``.

    For ``k >= 0`` this is ``phi(2^{k+1} x - 2 s)`` on the whole real line, with
    3 hidden nodes and 8 nonzero parameters when ``s = 0`` (9 otherwise, one
    more nonzero bias).  For ``k = -1`` the two boundary functions ``1 - x``
    and ``x`` are realized on ``[0, 1]``.
    """
    if k == -1:
        if s not in (0, 1):
            raise ValueError(f"s={s} not in {{0, 1}} for k=-1")
        w1, b1 = ([[-1.0]], [1.0]) if s == 0 else ([[1.0]], [0.0])
        return ReluNetwork(1, [(np.array(w1), b1), (np.array([[1.0]]), [0.0])])
    if k < 0 or not 0 <= s < 2**k:
        raise ValueError(f"s={s} not in Z({k})")
    return _hat_from_affine(2.0 ** (k + 1), -2.0 * s)


def dual_hat_net(k: int, s: int) -> ReluNetwork:
    """Exact network for ``phi*_{k,s}(x) = phi(2^{k+1} x - s + 1)``, ``s`` in ``1..2^{k+1}-1``."""
    if k < 0 or not 1 <= s <= 2 ** (k + 1) - 1:
        raise ValueError(f"s={s} not in Z_*({k})")
    return _hat_from_affine(2.0 ** (k + 1), 1.0 - s)


# ------------------------------------------------------------------ squaring
def _square_forms(c: Circuit, ts: Sequence[Lin], levels: int) -> list[Lin]:
    """Sawtooth approximations of ``t^2`` for several inputs in lockstep.

    The nodes of all inputs are created type by type (running sums, then the
    ``a`` nodes, then the ``b`` nodes), so branch nodes of the same type are
    adjacent.  Differences of two branches with bitwise equal inputs then
    cancel exactly.
    """
    a = c.relus(ts)
    b = c.relus([t - 0.5 for t in ts])
    acc = list(a)
    for j in range(1, levels):
        g = [2.0 * ai - 4.0 * bi for ai, bi in zip(a, b)]
        acc = c.relus([s - gi * 4.0**-j for s, gi in zip(acc, g)])
        a = c.relus(g)
        b = c.relus([gi - 0.5 for gi in g])
    return [s - (2.0 * ai - 4.0 * bi) * 4.0**-levels for s, ai, bi in zip(acc, a, b)]


def square_net(levels: int) -> ReluNetwork:
    """Approximation of ``t^2`` on ``[0, 1]`` with error at most ``2^{-2 levels - 2}``.

    Exact at ``j 2^{-levels}``; depth ``levels + 1``; output 0 at ``t <= 0``.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    c = Circuit(1)
    (t,) = c.inputs()
    return c.network(_square_forms(c, [t], levels))


# ------------------------------------------------------------------ products
def _multiply(c: Circuit, x: Lin, y: Lin, signed: bool, levels: int) -> Lin:
    """``xy`` via ``sq(|x + y| / 2) - sq(|x - y| / 2)``; error at most ``2^{-2 levels - 2}``."""
    if signed:
        up = c.relu(0.5 * x + 0.5 * y)
        um = c.relu(-0.5 * x - 0.5 * y)
        vp = c.relu(0.5 * x - 0.5 * y)
        vm = c.relu(0.5 * y - 0.5 * x)
        tu = up + um
    else:
        tu = c.relu(0.5 * x + 0.5 * y)
        vp = c.relu(0.5 * x - 0.5 * y)
        vm = c.relu(0.5 * y - 0.5 * x)
    sq_u, sq_v = _square_forms(c, [tu, vp + vm], levels)
    return sq_u - sq_v


def product_tree(c: Circuit, operands: Sequence[Lin], signed: Sequence[bool], levels: int) -> Lin:
    """Balanced binary product tree of ``operands`` inside ``c``.

    Operands must lie in ``[-1, 1]`` (``[0, 1]`` when not signed).  Each
    operand is held on raw nodes before it is multiplied, so a factor that is
    exactly zero yields an output that is exactly zero.
    """
    ops = list(zip(operands, signed))
    while len(ops) > 1:
        ops = [(c.hold(v, not s), s) for v, s in ops]
        top = max(v.layer for v, _ in ops)
        ops = [(c.carry(v, top, not s), s) for v, s in ops]
        nxt = []
        for (x, sx), (y, sy) in zip(ops[0::2], ops[1::2]):
            nxt.append((_multiply(c, x, y, sx or sy, levels), sx or sy))
        if len(ops) % 2:
            v, s = ops[-1]
            nxt.append((c.carry(v, top + levels + 1, not s), s))
        ops = nxt
    return ops[0][0]


def _tree_error(depth: int, levels: int) -> float:
    """Worst-case error of a product tree of the given depth (operands in [-1, 1])."""
    e = 2.0 ** (-2 * levels - 2)
    err = 0.0
    for _ in range(depth):
        # inherited error roughly doubles; the extra half covers sawtooth inputs
        # slightly above 1, plus the quadratic cross term
        err = 3.0 * err + 2.0 * err * err + e
    return err


def product_levels(d: int, delta: float) -> int:
    """Smallest sawtooth depth whose product tree over ``d`` factors is within ``delta``."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    depth = math.ceil(math.log2(d)) if d > 1 else 0
    levels = 1
    while _tree_error(depth, levels) > delta:
        levels += 1
    return levels


def product_net(d: int, delta: float) -> ReluNetwork:
    """Approximate ``x_1 x_2 ... x_d`` on ``[-1, 1]^d`` within ``delta``.

    The output is exactly zero whenever some input coordinate is zero.
    """
    if d < 2:
        raise ValueError("product_net needs d >= 2")
    levels = product_levels(d, delta)
    c = Circuit(d)
    xs = c.inputs()
    return c.network([product_tree(c, xs, [True] * d, levels)])


# ------------------------------------------------------------- tensor hats
def hat_node(c: Circuit, t: Lin) -> Lin:
    """Raw node equal to ``phi(t) = max(1 - |t - 1|, 0)``, exactly 0 off ``(0, 2)``.

    Occupies two layers after ``t``.
    """
    n1 = c.relu(t - 1.0)
    n2 = c.relu(1.0 - t)
    return c.relu(1.0 - n1 - n2)


def hat_nodes(c: Circuit, ts: Sequence[Lin]) -> list[Lin]:
    """Several :func:`hat_node` values, created layer by layer."""
    firsts = [(c.relu(t - 1.0), c.relu(1.0 - t)) for t in ts]
    return [c.relu(1.0 - n1 - n2) for n1, n2 in firsts]


def _check_ks(k: Sequence[int], s: Sequence[int]):
    if len(k) != len(s):
        raise ValueError("k and s must have the same length")
    for kj, sj in zip(k, s):
        if kj < 0 or not 0 <= sj < 2**kj:
            raise ValueError(f"invalid (k, s) component ({kj}, {sj})")


def tensor_hat_net(k: Sequence[int], s: Sequence[int], delta: float) -> ReluNetwork:
    """Approximate ``prod_j phi_{k_j, s_j}(x_j)`` within ``delta``.

    The output is exactly zero outside the support box of the hat product.
    """
    k = [int(v) for v in k]
    s = [int(v) for v in s]
    _check_ks(k, s)
    d = len(k)
    c = Circuit(d)
    xs = c.inputs()
    hs = hat_nodes(c, [x * 2.0 ** (kj + 1) - 2.0 * sj for x, kj, sj in zip(xs, k, s)])
    if d == 1:
        return c.network(hs)
    levels = product_levels(d, delta)
    return c.network([product_tree(c, hs, [False] * d, levels)])


# ------------------------------------------------------------------- CPwL
@dataclass(frozen=True)
class Breakpoints:
    """Knots ``t_0 < ... < t_M`` in ``[0, 1]`` with values ``v_0 .. v_M``."""

    knots: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        knots = tuple(float(t) for t in self.knots)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        if len(knots) != len(values) or len(knots) < 2:
            raise ValueError("need at least two knots and one value per knot")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError("knots must be strictly increasing")
        if knots[0] < 0.0 or knots[-1] > 1.0:
            raise ValueError("knots must lie in [0, 1]")

    def slope_changes(self) -> list[tuple[float, float]]:
        """``(t_j, a_j)`` with ``f(t) = sum_j a_j max(t - t_j, 0)`` on ``[t_0, inf)``.

        The last pair turns the function constant after ``t_M``.
        """
        t = self.knots
        v = self.values
        slopes = [(v[i + 1] - v[i]) / (t[i + 1] - t[i]) for i in range(len(t) - 1)]
        out = []
        prev = 0.0
        for tj, sl in zip(t, slopes + [0.0]):
            a = sl - prev
            if a != 0.0:
                out.append((tj, a))
            prev = sl
        return out

    def __call__(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=np.float64), self.knots, self.values)


def cpwl_forms(c: Circuit, x: Lin, bp: Breakpoints, scale: float = 1.0) -> Lin:
    """``scale * S(x)`` for the CPwL function ``S`` of ``bp`` (one hidden layer)."""
    out = Lin.const(x.layer + 1, 0.0)
    for tj, a in bp.slope_changes():
        out = out + c.relu(x - tj) * (a * scale)
    return out


def cpwl_net(bp: Breakpoints) -> ReluNetwork:
    """Exact one-hidden-layer network for a CPwL function vanishing at ``t_0 = 0``."""
    if bp.knots[0] != 0.0 or bp.values[0] != 0.0:
        raise ValueError("cpwl_net needs t_0 = 0 and v_0 = 0")
    if not bp.slope_changes():
        return zero_network(1)
    c = Circuit(1)
    (x,) = c.inputs()
    return c.network([cpwl_forms(c, x, bp)])
