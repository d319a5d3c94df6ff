"""Quantized CPwL approximants with node values on a fixed lattice."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .faber import MultiIndex, TargetFunction, hat, hyperbolic_cross
from .network import ReluNetwork
from .primitives import Breakpoints, cpwl_net

__all__ = [
    "CertificateViolation",
    "HighDimPattern",
    "QuantPattern",
    "cardinality_bounds",
    "highdim_pattern_eval",
    "pattern_to_net",
    "quantize_highdim",
    "quantize_univariate",
    "quantize_values",
    "univariate_error_bound",
    "highdim_error_bound",
]

_TIE_TOL = 1e-12


class CertificateViolation(ValueError):
    """The input cannot lie in the unit ball: a quantized increment exceeded 1."""


@dataclass(frozen=True)
class QuantPattern:
    """Integers ``l_0 .. l_{2^{m+1}-1}`` (``l_0 = 0``); the node ``2^{m+1}`` is 0 implicitly."""

    level: int
    alpha: float
    l: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "l", tuple(int(v) for v in self.l))
        if len(self.l) != 2 ** (self.level + 1):
            raise ValueError(f"pattern of level {self.level} needs {2 ** (self.level + 1)} entries")
        if self.l[0] != 0:
            raise ValueError("l_0 must be 0")

    @property
    def step(self) -> float:
        return 2.0 ** (-self.alpha * (self.level + 1))

    @property
    def is_zero(self) -> bool:
        return not any(self.l)

    def node_values(self) -> np.ndarray:
        """``step * l_s`` for ``s = 0 .. 2^{m+1}``, including the zero end node."""
        return self.step * np.array(self.l + (0,), dtype=np.float64)

    def breakpoints(self) -> Breakpoints:
        n = 2 ** (self.level + 1)
        return Breakpoints(tuple(np.arange(n + 1) / n), tuple(self.node_values()))

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        n = 2 ** (self.level + 1)
        return np.interp(t, np.arange(n + 1) / n, self.node_values(), left=0.0, right=0.0)

    def to_dict(self) -> dict:
        return {"m": self.level, "alpha": self.alpha, "l": list(self.l)}

    @classmethod
    def from_dict(cls, doc: dict) -> "QuantPattern":
        return cls(int(doc["m"]), float(doc["alpha"]), tuple(doc["l"]))


def quantize_values(values: np.ndarray, step: float) -> np.ndarray:
    """Left-to-right nearest-multiple quantization along the last axis.

    ``values[..., s]`` are samples at the nodes ``s = 0 .. n``; column 0 must
    be zero.  Ties go to the multiple closest to the previous integer, then
    to the smaller one.  Returns integers for columns ``0 .. n-1``.
    """
    values = np.asarray(values, dtype=np.float64)
    v = values / step
    out = np.zeros(values.shape[:-1] + (values.shape[-1] - 1,), dtype=np.int64)
    prev = np.zeros(values.shape[:-1], dtype=np.int64)
    for s in range(1, values.shape[-1] - 1):
        lo = np.floor(v[..., s]).astype(np.int64)
        frac = v[..., s] - lo
        pick = np.where(frac > 0.5, lo + 1, lo)
        tie = np.abs(frac - 0.5) <= _TIE_TOL
        # closest to prev; the integer prev is never equidistant, smaller wins otherwise
        tie_pick = np.where(np.abs(lo + 1 - prev) < np.abs(lo - prev), lo + 1, lo)
        cur = np.where(tie, tie_pick, pick)
        out[..., s] = cur
        prev = cur
    return out


def _check_increments(l: np.ndarray, what: str):
    ext = np.concatenate([l, np.zeros(l.shape[:-1] + (1,), dtype=l.dtype)], axis=-1)
    worst = int(np.max(np.abs(np.diff(ext, axis=-1)))) if ext.shape[-1] > 1 else 0
    if worst > 1:
        raise CertificateViolation(f"{what}: quantized increment {worst} > 1, input is not in the unit ball")


def quantize_univariate(g: TargetFunction | Callable, m: int, alpha: float | None = None) -> QuantPattern:
    """Quantized interpolant ``S_g`` of level ``m`` with step ``2^{-alpha(m+1)}``."""
    if alpha is None:
        alpha = g.alpha
    if m < 0:
        raise ValueError("m must be >= 0")
    n = 2 ** (m + 1)
    nodes = np.arange(n + 1) / n
    vals = np.asarray(g(nodes[:, None]), dtype=np.float64)
    if abs(vals[0]) > 1e-12 or abs(vals[-1]) > 1e-12:
        raise ValueError("g must vanish at 0 and 1")
    vals[0] = 0.0
    vals[-1] = 0.0
    l = quantize_values(vals, 2.0 ** (-alpha * (m + 1)))
    _check_increments(l, "quantize_univariate")
    return QuantPattern(m, alpha, tuple(l))


def univariate_error_bound(alpha: float, m: int) -> float:
    """``2^{-(m+1) alpha - 1/2} + 2^{-(m+1) alpha} / (2^alpha - 1)``."""
    return 2.0 ** (-(m + 1) * alpha - 0.5) + 2.0 ** (-(m + 1) * alpha) / (2.0**alpha - 1.0)


def pattern_to_net(p: QuantPattern) -> ReluNetwork:
    """Exact one-hidden-layer network for the pattern's CPwL function."""
    return cpwl_net(p.breakpoints())


# ------------------------------------------------------------ high dim
@dataclass(frozen=True)
class HighDimPattern:
    """Map ``(kbar, sbar) -> QuantPattern`` over the cross in the last ``d-1`` coordinates."""

    level: int
    dim: int
    alpha: float
    patterns: dict

    def keys(self) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
        return iter(self.patterns)

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for p in self.patterns.values())

    def signature(self) -> tuple:
        """Exact hashable identity (integer tuples only)."""
        return tuple((key, p.l) for key, p in sorted(self.patterns.items()))

    def __hash__(self):
        return hash(self.signature())

    def __eq__(self, other):
        return isinstance(other, HighDimPattern) and self.signature() == other.signature()

    def weight(self, kbar) -> float:
        return 2.0 ** (-self.alpha * (sum(kbar) + self.dim - 1))

    def to_dict(self) -> dict:
        return {
            "m": self.level,
            "d": self.dim,
            "alpha": self.alpha,
            "patterns": [{"kbar": list(k), "sbar": list(s), "l": list(p.l)} for (k, s), p in sorted(self.patterns.items())],
        }


def highdim_key_count(m: int, d: int) -> int:
    """``sum_{l=0}^m 2^l binom(l + d - 2, d - 2)``."""
    return sum(2**l * math.comb(l + d - 2, d - 2) for l in range(m + 1))


def _fiber_values(f: TargetFunction, kbar: tuple[int, ...], level: int) -> np.ndarray:
    """``2^{alpha(|kbar| + d - 1)} lambda_{kbar, sbar}(f(x_1, .))`` at the ``level`` nodes.

    Shape ``(2^{kbar_1}, ..., 2^{kbar_{d-1}}, 2^{level+1} + 1)``.
    """
    d = f.dim
    n = 2 ** (level + 1)
    axes = [np.arange(n + 1) / n] + [np.arange(2 ** (kj + 1) + 1) * 2.0 ** (-kj - 1) for kj in kbar]
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = f(np.stack([g.ravel() for g in mesh], axis=1)).reshape(mesh[0].shape)
    for axis in range(1, d):
        size = vals.shape[axis]
        a = np.take(vals, range(0, size - 1, 2), axis=axis)
        mid = np.take(vals, range(1, size, 2), axis=axis)
        b = np.take(vals, range(2, size, 2), axis=axis)
        vals = -0.5 * (a - 2.0 * mid + b)
    vals = vals * 2.0 ** (f.alpha * (sum(kbar) + d - 1))
    return np.moveaxis(vals, 0, -1)


def quantize_highdim(f: TargetFunction, m: int) -> HighDimPattern:
    """``S_m(f)``: quantize every normalized fiber at level ``m - |kbar|_1``."""
    if m < 2:
        raise ValueError("quantize_highdim needs m >= 2")
    d = f.dim
    if d < 2:
        raise ValueError("quantize_highdim needs d >= 2")
    patterns = {}
    for kbar in hyperbolic_cross(m, d - 1):
        level = m - sum(kbar)
        vals = _fiber_values(f, kbar, level)
        if np.max(np.abs(vals[..., [0, -1]]), initial=0.0) > 1e-12:
            raise ValueError("f must vanish for x_1 in {0, 1}")
        vals[..., 0] = 0.0
        vals[..., -1] = 0.0
        l = quantize_values(vals, 2.0 ** (-f.alpha * (level + 1)))
        _check_increments(l, f"quantize_highdim kbar={kbar}")
        for sbar in MultiIndex(kbar).Z():
            patterns[(kbar, sbar)] = QuantPattern(level, f.alpha, tuple(l[sbar]))
    return HighDimPattern(m, d, f.alpha, patterns)


def highdim_pattern_eval(p: HighDimPattern, x) -> np.ndarray:
    """Evaluate ``sum_kbar w_kbar sum_sbar phi_{kbar,sbar}(xbar) S_{kbar,sbar}(x_1)``; zero off the cube."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.zeros(len(x))
    inside = np.all((x >= 0.0) & (x <= 1.0), axis=1)
    xi = x[inside]
    if not len(xi):
        return out
    by_k: dict[tuple[int, ...], list] = {}
    for (kbar, sbar), pat in p.patterns.items():
        by_k.setdefault(kbar, []).append((sbar, pat))
    acc = np.zeros(len(xi))
    for kbar, entries in by_k.items():
        shape = tuple(2**kj for kj in kbar)
        level = entries[0][1].level
        table = np.zeros(shape + (2 ** (level + 1) + 1,))
        for sbar, pat in entries:
            table[sbar] = pat.node_values()
        idx = []
        val = np.ones(len(xi))
        for j, kj in enumerate(kbar):
            t = xi[:, j + 1] * 2.0**kj
            s = np.clip(np.floor(t), 0, 2**kj - 1).astype(np.int64)
            idx.append(s)
            val *= hat(2.0 * (t - s))
        n = 2 ** (level + 1)
        u = xi[:, 0] * n
        i = np.clip(np.floor(u), 0, n - 1).astype(np.int64)
        w = u - i
        rows = table[tuple(idx)]
        cpwl = rows[np.arange(len(xi)), i] * (1.0 - w) + rows[np.arange(len(xi)), i + 1] * w
        acc += p.weight(kbar) * val * cpwl
    out[inside] = acc
    return out


def highdim_error_bound(alpha: float, d: int, m: int) -> float:
    """``B^d 2^{-alpha m} binom(m + d, d - 1)``."""
    return (2.0**alpha - 1.0) ** (-d) * 2.0 ** (-alpha * m) * math.comb(m + d, d - 1)


def cardinality_bounds(m: int, d: int, alpha: float | None = None) -> tuple[int, int]:
    """``(3^{2^{m+1}}, 3^{2^{m+1} binom(m+d-1, d-1)})`` as exact integers.

    ``alpha`` does not enter the counts; it is accepted for interface symmetry.
    """
    if m < 0 or d < 1:
        raise ValueError("need m >= 0 and d >= 1")
    return 3 ** (2 ** (m + 1)), 3 ** (2 ** (m + 1) * math.comb(m + d - 1, d - 1))
