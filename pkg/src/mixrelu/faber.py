"""Faber-Schauder analysis on [0, 1]^d.

Coefficients are mixed second differences of ``f``; the truncated series over
the hyperbolic cross ``{k : |k|_1 <= m}`` interpolates ``f`` on a sparse grid.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "Certificate",
    "FaberExpansion",
    "MultiIndex",
    "TargetFunction",
    "T_eval",
    "T_rescale_eval",
    "error_bound_R",
    "faber_coeff",
    "faber_expansion",
    "faber_random",
    "get_preset",
    "grid_G",
    "grid_points",
    "hat",
    "hyperbolic_cross",
    "pde_demo",
    "product_bump",
    "B_const",
    "PRESETS",
    "random_holder_univariate",
    "sampled_norm",
    "single_hat",
    "truncation_eval",
]


def hat(t):
    """The reference hat ``phi(t) = max(1 - |t - 1|, 0)`` supported on ``[0, 2]``."""
    return np.maximum(1.0 - np.abs(np.asarray(t, dtype=np.float64) - 1.0), 0.0)


def B_const(alpha: float) -> float:
    """``B = 1 / (2^alpha - 1)``."""
    return 1.0 / (2.0**alpha - 1.0)


@dataclass(frozen=True)
class MultiIndex:
    """Level vector ``k`` with entries in ``{-1, 0, 1, ...}``."""

    k: tuple[int, ...]

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        if any(v < -1 for v in k):
            raise ValueError(f"level entries must be >= -1, got {k}")
        object.__setattr__(self, "k", k)

    def __iter__(self):
        return iter(self.k)

    def __len__(self):
        return len(self.k)

    def __getitem__(self, i):
        return self.k[i]

    @property
    def l1(self) -> int:
        return sum(abs(v) for v in self.k)

    @property
    def linf(self) -> int:
        return max(abs(v) for v in self.k)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.k) if v != 0)

    def Z(self) -> Iterator[tuple[int, ...]]:
        """Shifts ``s`` with ``0 <= s_j < 2^{k_j}`` (``{0, 1}`` for ``k_j = -1``)."""
        ranges = [range(2) if v == -1 else range(2**v) for v in self.k]
        return itertools.product(*ranges)

    def Z_star(self) -> Iterator[tuple[int, ...]]:
        """Shifts ``s`` with ``1 <= s_j <= 2^{k_j + 1} - 1``."""
        return itertools.product(*[range(1, 2 ** (v + 1)) for v in self.k])

    @staticmethod
    def unit(i: int, d: int, value: int = 1) -> "MultiIndex":
        k = [0] * d
        k[i] = value
        return MultiIndex(tuple(k))


def hyperbolic_cross(m: int, d: int) -> list[tuple[int, ...]]:
    """All ``k`` in ``N_0^d`` with ``|k|_1 <= m``, lexicographically ordered."""
    if d == 1:
        return [(i,) for i in range(m + 1)]
    out = []
    for first in range(m + 1):
        for rest in hyperbolic_cross(m - first, d - 1):
            out.append((first,) + rest)
    return out


# --------------------------------------------------------------- targets
@dataclass(frozen=True)
class Certificate:
    """How unit-ball membership of a target was established.

    ``analytic`` certificates are proofs documented in ``note``.  ``sampled``
    ones record a measured mixed-difference norm, which is evidence only.
    """

    kind: str
    note: str = ""
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("analytic", "sampled"):
            raise ValueError(f"unknown certificate kind {self.kind!r}")


@dataclass
class TargetFunction:
    """Vectorized function on ``[0, 1]^d`` tagged with its smoothness ``alpha``.

    ``evaluator`` maps an ``(n, d)`` array to ``n`` values.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    alpha: float
    dim: int
    certificate: Certificate
    name: str = "custom"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return self.evaluator(x[None, :])[0]
        return np.asarray(self.evaluator(x), dtype=np.float64)

    @property
    def certified(self) -> bool:
        return self.certificate.kind == "analytic"

    def boundary_max(self, samples: int = 33) -> float:
        """Largest ``|f|`` sampled on the faces of the cube."""
        t = np.linspace(0.0, 1.0, samples)
        worst = 0.0
        for j in range(self.dim):
            pts = np.array(list(itertools.product(t, repeat=self.dim - 1))) if self.dim > 1 else np.zeros((1, 0))
            for face in (0.0, 1.0):
                x = np.insert(pts, j, face, axis=1)
                worst = max(worst, float(np.max(np.abs(self(x)))))
        return worst


def _product_bump(x: np.ndarray) -> np.ndarray:
    return np.prod(x * (1.0 - x), axis=1)


def _hat_product(k: Sequence[int], s: Sequence[int], scale: float):
    k = np.asarray(k, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)

    def ev(x: np.ndarray) -> np.ndarray:
        return scale * np.prod(hat(x * 2.0 ** (k + 1) - 2.0 * s), axis=1)

    return ev


def product_bump(d: int, alpha: float = 1.0) -> TargetFunction:
    # |g| <= 1/4 and |g(x+h) - g(x)| <= min(h, 1/4) <= h^alpha for g = x(1-x),
    # so every mixed difference of the product is bounded by prod h_j^alpha.
    cert = Certificate("analytic", "prod x_j(1-x_j): factor Lipschitz 1 and sup 1/4, any alpha <= 1")
    return TargetFunction(_product_bump, alpha, d, cert, name="product-bump")


def single_hat(k0: Sequence[int], s0: Sequence[int], alpha: float = 1.0) -> TargetFunction:
    """``c * phi_{k0, s0}`` normalized so its only coefficient meets the decay bound with equality."""
    mi = MultiIndex(tuple(k0))
    if len(s0) != len(mi) or any(not 0 <= sj < 2**kj for kj, sj in zip(mi, s0)):
        raise ValueError("invalid (k0, s0)")
    d = len(mi)
    scale = 2.0 ** (-alpha * d) * 2.0 ** (-alpha * mi.l1)
    # phi_{k,s} has univariate Hölder-alpha constant 2^{alpha(k+1)}; the scale cancels it
    cert = Certificate("analytic", "scaled hat: Hölder constant prod 2^{alpha(k_j+1)} times scale is 1")
    return TargetFunction(_hat_product(mi.k, s0, scale), alpha, d, cert, name=f"single-hat{mi.k}{tuple(s0)}")


def faber_random(seed: int, m: int, d: int, alpha: float = 1.0) -> TargetFunction:
    """Finite Faber series with coefficients at most half the decay bound."""
    rng = np.random.default_rng(seed)
    coeffs = {}
    for k in hyperbolic_cross(m, d):
        bound = 2.0 ** (-alpha * d) * 2.0 ** (-alpha * sum(k))
        coeffs[k] = rng.uniform(-0.5, 0.5, size=tuple(2**kj for kj in k)) * bound
    exp = FaberExpansion(d, m, coeffs)
    f = TargetFunction(exp.evaluate, alpha, d, Certificate("sampled"), name=f"faber-random({seed},{m})")
    level = {1: 10, 2: 6, 3: 4}.get(d, 3)
    value = sampled_norm(f, level)
    f.certificate = Certificate("sampled", f"measured on a level-{level} grid; not a proof", value)
    return f


def pde_demo(d: int) -> TargetFunction:
    f = product_bump(d, alpha=0.5)
    f.name = "pde-demo"
    return f


PRESETS = ("product-bump", "single-hat", "faber-random", "pde-demo")


def get_preset(name: str, d: int, alpha: float | None = None) -> TargetFunction:
    """Look up a preset by CLI name.

    ``faber-random(seed,m)`` and ``single-hat(k1,..,kd;s1,..,sd)`` take
    parameters in parentheses.  ``pde-demo`` always has ``alpha = 1/2``.
    """
    name = name.strip()
    match = re.fullmatch(r"([a-z-]+)(?:\((.*)\))?", name)
    if not match:
        raise KeyError(f"cannot parse preset {name!r}")
    base, args = match.group(1), match.group(2)
    a = 1.0 if alpha is None else float(alpha)
    if base == "product-bump":
        return product_bump(d, a)
    if base == "pde-demo":
        if alpha is not None and alpha != 0.5:
            raise ValueError("pde-demo is defined for alpha = 1/2")
        return pde_demo(d)
    if base == "single-hat":
        if args:
            ks, ss = args.split(";")
            k0 = [int(v) for v in ks.split(",")]
            s0 = [int(v) for v in ss.split(",")]
        else:
            k0, s0 = [1] * d, [0] * d
        if len(k0) != d:
            raise ValueError("single-hat level vector does not match the dimension")
        return single_hat(k0, s0, a)
    if base == "faber-random":
        seed, m = (int(v) for v in args.split(",")) if args else (0, 3)
        return faber_random(seed, m, d, a)
    raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")


def random_holder_univariate(rng: np.random.Generator, alpha: float, pieces: int = 12) -> TargetFunction:
    """Random univariate function in the closed unit ball, vanishing at 0 and 1.

    Built from 1-Lipschitz CPwL functions ``u >= 0``: ``u^alpha`` is
    alpha-Hölder with constant 1 because ``t -> t^alpha`` is subadditive.  The
    result is ``c (u_1^alpha - u_2^alpha) / 2`` with ``|c| <= 1``.
    """

    def lipschitz_bump():
        knots = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, pieces - 1)]))
        slopes = rng.uniform(-1.0, 1.0, pieces)
        vals = np.concatenate([[0.0], np.cumsum(slopes * np.diff(knots))])
        # pull back to vanish at 1 without leaving the Lipschitz ball: min with the distance to 1
        vals = np.minimum(np.maximum(vals, 0.0), 1.0 - knots)
        return knots, vals

    k1, v1 = lipschitz_bump()
    k2, v2 = lipschitz_bump()
    c = rng.uniform(-1.0, 1.0)

    def ev(x: np.ndarray) -> np.ndarray:
        t = x[:, 0]
        return c * 0.5 * (np.interp(t, k1, v1) ** alpha - np.interp(t, k2, v2) ** alpha)

    return TargetFunction(ev, alpha, 1, Certificate("analytic", "difference of powers of Lipschitz bumps"), "random-holder")


# --------------------------------------------------------------- analysis
def faber_coeff(f: TargetFunction, k: Sequence[int], s: Sequence[int]) -> float:
    """``lambda_{k,s}(f)``: tensorized ``-1/2 (f(a) - 2 f(mid) + f(b))`` stencil."""
    k = tuple(int(v) for v in k)
    s = tuple(int(v) for v in s)
    if len(k) != f.dim or len(s) != f.dim:
        raise ValueError("k and s must have length d")
    pts, weights = [], []
    for offs in itertools.product(range(3), repeat=f.dim):
        x = [2.0**-kj * sj + o * 2.0 ** (-kj - 1) for kj, sj, o in zip(k, s, offs)]
        assert all(0.0 <= v <= 1.0 for v in x), "stencil point outside the cube"
        pts.append(x)
        weights.append(math.prod((1.0, -2.0, 1.0)[o] * -0.5 for o in offs))
    vals = f(np.array(pts))
    return math.fsum(w * v for w, v in zip(weights, vals))


def _block_coeffs(f: TargetFunction, k: tuple[int, ...]) -> np.ndarray:
    """All ``lambda_{k,s}`` for one level vector, from one vectorized grid sample."""
    axes = [np.arange(2 ** (kj + 1) + 1) * 2.0 ** (-kj - 1) for kj in k]
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = f(np.stack([g.ravel() for g in mesh], axis=1)).reshape(mesh[0].shape)
    for axis in range(len(k)):
        n = vals.shape[axis]
        a = np.take(vals, range(0, n - 1, 2), axis=axis)
        mid = np.take(vals, range(1, n, 2), axis=axis)
        b = np.take(vals, range(2, n, 2), axis=axis)
        vals = -0.5 * (a - 2.0 * mid + b)
    return vals


class FaberExpansion:
    """Truncated Faber series ``sum_{|k|_1 <= m} sum_s lambda_{k,s} phi_{k,s}``.

    ``coeffs`` maps each level vector ``k`` to an array of shape
    ``(2^{k_1}, ..., 2^{k_d})`` indexed by ``s``.
    """

    def __init__(self, dim: int, cross_bound: int, coeffs: dict[tuple[int, ...], np.ndarray]):
        self.dim = int(dim)
        self.cross_bound = int(cross_bound)
        for k, arr in coeffs.items():
            if sum(k) > cross_bound or arr.shape != tuple(2**kj for kj in k):
                raise ValueError(f"bad coefficient block for k={k}")
        self.coeffs = dict(coeffs)

    @classmethod
    def from_function(cls, f: TargetFunction, m: int) -> "FaberExpansion":
        return cls(f.dim, m, {k: _block_coeffs(f, k) for k in hyperbolic_cross(m, f.dim)})

    def items(self) -> Iterator[tuple[tuple[int, ...], tuple[int, ...], float]]:
        """Sparse view ``(k, s, lambda)`` over the nonzero coefficients."""
        for k, arr in self.coeffs.items():
            for s in zip(*np.nonzero(arr)):
                yield k, tuple(int(v) for v in s), float(arr[s])

    def coefficient(self, k, s) -> float:
        arr = self.coeffs.get(tuple(k))
        return 0.0 if arr is None else float(arr[tuple(s)])

    def truncate(self, m: int) -> "FaberExpansion":
        return FaberExpansion(self.dim, m, {k: v for k, v in self.coeffs.items() if sum(k) <= m})

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.zeros(len(x))
        for k, arr in self.coeffs.items():
            idx = []
            val = np.ones(len(x))
            for j, kj in enumerate(k):
                t = x[:, j] * 2.0**kj
                s = np.clip(np.floor(t), 0, 2**kj - 1).astype(np.int64)
                idx.append(s)
                val *= hat(2.0 * (t - s))
            out += arr[tuple(idx)] * val
        return out

    __call__ = evaluate


def faber_expansion(f: TargetFunction, m: int) -> FaberExpansion:
    """Cached :meth:`FaberExpansion.from_function` (cached on ``f``)."""
    key = ("faber", m)
    if key not in f._cache:
        bigger = [mm for (tag, mm) in f._cache if tag == "faber" and mm > m]
        if bigger:
            f._cache[key] = f._cache[("faber", min(bigger))].truncate(m)
        else:
            f._cache[key] = FaberExpansion.from_function(f, m)
    return f._cache[key]


def truncation_eval(f: TargetFunction, m: int, x) -> np.ndarray:
    """``R_m(f)(x)``."""
    if m < 0:
        raise ValueError("m must be >= 0")
    return faber_expansion(f, m).evaluate(x)


def grid_G(m: int, d: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Sparse interpolation grid: pairs ``(k, s)`` with ``|k|_1 <= m``, ``s`` in ``Z_*(k)``.

    The associated point is ``2^{-k-1} s``.
    """
    return [(k, s) for k in hyperbolic_cross(m, d) for s in MultiIndex(k).Z_star()]


def grid_points(pairs) -> np.ndarray:
    return np.array([[sj * 2.0 ** (-kj - 1) for kj, sj in zip(k, s)] for k, s in pairs])


def _h(alpha: float, d: int, m: int) -> float:
    return 2.0**-alpha * B_const(alpha) ** d * 2.0 ** (-alpha * m) * math.comb(m + d, d - 1)


def error_bound_R(alpha: float, d: int, m: int) -> float:
    """Sup-norm bound ``2^{-alpha} B^d 2^{-alpha m} binom(m + d, d - 1)`` for ``f - R_m(f)``."""
    if d < 2 or m < 1 or not 0.0 < alpha <= 1.0:
        raise ValueError("need d >= 2, m >= 1 and alpha in (0, 1]")
    return _h(alpha, d, m)


# ------------------------------------------------------------- residuals
def _interp_weights(t: np.ndarray, level: int):
    """Nodes and CPwL weights for interpolation at ``2^{-level} i`` (this is ``R_{level-1}``).

    Weights at the end nodes 0 and 1 are zeroed: the truncated series only has
    interior hats.
    """
    n = 2**level
    u = t * n
    i = np.clip(np.floor(u), 0, n - 1)
    w = u - i
    wl = np.where(i == 0, 0.0, 1.0 - w)
    wr = np.where(i + 1 == n, 0.0, w)
    return i / n, (i + 1) / n, wl, wr


def T_eval(f: TargetFunction | Callable, k: Sequence[int], x) -> np.ndarray:
    """``(T_k f)(x)`` with ``T_k = prod_j (I - R_{k_j - 1})`` and ``T_0 = I``.

    The product is expanded over subsets ``u`` of ``supp k``; each term
    interpolates ``f`` in the coordinates of ``u``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    k = tuple(int(v) for v in k)
    supp = [j for j, kj in enumerate(k) if kj > 0]
    out = np.zeros(len(x))
    for r in range(len(supp) + 1):
        for u in itertools.combinations(supp, r):
            sign = (-1.0) ** r
            if not u:
                out += sign * f(x)
                continue
            parts = [_interp_weights(x[:, j], k[j]) for j in u]
            for corner in itertools.product((0, 1), repeat=len(u)):
                y = x.copy()
                w = np.ones(len(x))
                for j, (a, b, wl, wr), c in zip(u, parts, corner):
                    y[:, j] = b if c else a
                    w = w * (wr if c else wl)
                mask = w != 0.0
                if mask.any():
                    term = np.zeros(len(x))
                    term[mask] = f(y[mask]) * w[mask]
                    out += sign * term
    return out


def T_rescale_eval(f, k: Sequence[int], s: Sequence[int], x, alpha: float | None = None) -> np.ndarray:
    """``T_{k,s}(f)(x) = 2^{alpha |k|_1 - d} (T_k(f) chi_{I_{k,s}})(2^{-k}(x + s))``.

    Zero outside ``[0, 1]^d``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    k = np.asarray(k, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    if np.any(k < 0) or np.any(s < 0) or np.any(s >= 2**k):
        raise ValueError("invalid (k, s)")
    a = f.alpha if alpha is None else alpha
    d = len(k)
    inside = np.all((x >= 0.0) & (x <= 1.0), axis=1)
    out = np.zeros(len(x))
    if inside.any():
        y = (x[inside] + s) * 2.0 ** (-k.astype(np.float64))
        out[inside] = 2.0 ** (a * int(k.sum()) - d) * T_eval(f, tuple(k), y)
    return out


# --------------------------------------------------------- certificates
def sampled_norm(f, level: int, alpha: float | None = None, dim: int | None = None) -> float:
    """Largest normalized mixed difference of ``f`` over a dyadic grid.

    Returns ``max_u sup |Delta_{h,u} f| / prod_{j in u} h_j^alpha`` over all
    subsets ``u`` (including the sup norm for the empty set) and all step
    vectors that are multiples of ``2^{-level}``.  A value ``<= 1`` is
    consistent with unit-ball membership; it is not a proof.
    """
    a = f.alpha if alpha is None else alpha
    d = f.dim if dim is None else dim
    n = 2**level
    axes = [np.linspace(0.0, 1.0, n + 1)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = np.asarray(f(np.stack([g.ravel() for g in mesh], axis=1))).reshape(mesh[0].shape)
    best = float(np.max(np.abs(vals)))
    for r in range(1, d + 1):
        for u in itertools.combinations(range(d), r):
            for steps in itertools.product(range(1, n + 1), repeat=r):
                diff = vals
                for j, t in zip(u, steps):
                    m = diff.shape[j]
                    diff = np.take(diff, range(t, m), axis=j) - np.take(diff, range(0, m - t), axis=j)
                scale = math.prod((t / n) ** a for t in steps)
                best = max(best, float(np.max(np.abs(diff))) / scale)
    return best
