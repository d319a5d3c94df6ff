"""Sup-norm measurement, run reports and sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .faber import B_const, TargetFunction, error_bound_R, get_preset
from .network import ReluNetwork

__all__ = [
    "GridTooLarge",
    "RunReport",
    "SWEEP_COLUMNS",
    "constants_table",
    "default_grid_level",
    "dyadic_grid",
    "measure_sup_error",
    "run",
    "sweep",
]

MAX_POINTS = 1 << 24
WORK_BUDGET = 3e10  # nonzero weights times grid points per measurement


class GridTooLarge(MemoryError):
    """The requested grid exceeds the point cap; measure on tiles instead."""


def dyadic_grid(level: int, d: int) -> np.ndarray:
    """All points of ``(2^{-level} Z)^d`` in the unit cube, shape ``((2^level + 1)^d, d)``."""
    a = np.arange(2**level + 1) / 2.0**level
    mesh = np.meshgrid(*[a] * d, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def measure_sup_error(net: ReluNetwork, f, grid_level: int, extra_points=None, max_points: int = MAX_POINTS) -> float:
    """``max |net(x) - f(x)|`` over the level-``grid_level`` dyadic grid plus ``extra_points``.

    ``f`` may be a target function or any vectorized callable.  Pass the
    breakpoints of both operands as ``extra_points`` to make the maximum exact
    for two CPwL functions.
    """
    if grid_level < 1:
        raise ValueError("grid_level must be >= 1")
    d = net.input_dim
    count = (2**grid_level + 1) ** d
    if count > max_points:
        raise GridTooLarge(f"{count} grid points exceed the cap {max_points}; tile the cube and measure each tile")
    x = dyadic_grid(grid_level, d)
    if extra_points is not None:
        x = np.vstack([x, np.atleast_2d(np.asarray(extra_points, dtype=np.float64))])
    return float(np.max(np.abs(net(x)[:, 0] - np.asarray(f(x)))))


def default_grid_level(n: int, d: int, nnz: int, budget: float = WORK_BUDGET) -> int:
    """``max(10, n + 4)`` for ``d = 2`` and ``max(6, n + 2)`` otherwise, lowered to fit ``budget``."""
    g = max(10, n + 4) if d <= 2 else max(6, n + 2)
    while g > 3 and (2**g + 1) ** d * max(nnz, 1) > budget:
        g -= 1
    return g


def constants_table(alpha: float, d: int, m: int, n: int) -> dict:
    """Constant-free bound values and the named constants."""
    from .adaptive import _log2_K
    from .quantizer import cardinality_bounds, highdim_error_bound

    B = B_const(alpha)
    return {
        "B": B,
        "lemma_truncation_bound(n)": error_bound_R(alpha, d, n) if n >= 1 else float("nan"),
        "lemma_quantized_bound(m)": highdim_error_bound(alpha, d, m),
        "N_d(m)_log3": math.log(cardinality_bounds(m, d)[1], 3),
        "K1": B ** (1.0 / (alpha + 1.0)) * 4.0 / alpha,
        "K2": 4.0 * (2.0 ** (alpha + 3) * B) ** (1.0 / (2 * alpha + 2)) * math.sqrt(math.log2(2.0 / alpha) / alpha),
        "K_d_alpha": 2.0 ** _log2_K(alpha, d),
    }


@dataclass
class RunReport:
    method: str
    preset: str
    alpha: float
    d: int
    epsilon: float
    plan: dict
    measured_error: float
    W: int
    L: int
    width: int
    bounds: dict = field(default_factory=dict)
    grid_level: int = 0
    wall_time: float = 0.0

    @property
    def accepted(self) -> bool:
        return self.measured_error <= self.epsilon

    def to_dict(self) -> dict:
        out = asdict(self)
        out["accepted"] = self.accepted
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, dict):
        return {str(k): val for k, val in v.items()}
    if isinstance(v, tuple):
        return list(v)
    return str(v)


def _plan_dict(plan) -> dict:
    doc = plan.to_dict()
    consts = doc.get("constants")
    if isinstance(consts, dict) and "per_ell" in consts:
        consts["per_ell"] = {",".join(map(str, k)): v for k, v in consts["per_ell"].items()}
    return doc


def run(
    method: str,
    preset: str | TargetFunction,
    alpha: float | None,
    d: int,
    epsilon: float,
    out_path=None,
    grid_level: int | None = None,
    n: int | None = None,
    m: int | None = None,
) -> tuple[ReluNetwork, RunReport]:
    """Build, measure and optionally save one network."""
    from .adaptive import build_adaptive
    from .nonadaptive import build_nonadaptive

    f = preset if isinstance(preset, TargetFunction) else get_preset(preset, d, alpha)
    t0 = time.perf_counter()
    if method == "nonadaptive":
        net, plan, arch = build_nonadaptive(f, epsilon)
        bounds = dict(plan.bounds)
    elif method == "adaptive":
        net, plan = build_adaptive(f, epsilon, n=n, m=m)
        bounds = {"certified_bound": plan.certified_bound}
    else:
        raise ValueError(f"unknown method {method!r}")
    nnz = sum(w.nnz for w in net.weights)
    g = grid_level if grid_level is not None else default_grid_level(plan.n, d, nnz)
    err = measure_sup_error(net, f, g)
    report = RunReport(
        method, f.name, f.alpha, d, epsilon, _plan_dict(plan), err,
        net.size(), net.depth(), net.width(), bounds, g, time.perf_counter() - t0,
    )
    if out_path is not None:
        net.save(out_path)
    return net, report


SWEEP_COLUMNS = (
    "method", "preset", "alpha", "d", "epsilon", "n", "m", "measured_error",
    "W", "L", "width", "grid_level", "W_over_trend", "L_over_log", "within_eps",
)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def sweep(method: str, preset: str, alpha: float | None, d: int, eps_list, grid_level: int | None = None) -> str:
    """Run ``method`` for every tolerance and return the CSV text (wall time excluded)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for eps in eps_list:
        _, rep = run(method, preset, alpha, d, float(eps), grid_level=grid_level)
        a = rep.alpha
        trend = eps ** (-1.0 / a) * math.log2(2.0 / eps) ** ((d - 1) * (1.0 / a + 1.0) + 1.0)
        writer.writerow(
            [_fmt(v) for v in (
                rep.method, rep.preset, float(a), d, float(eps), rep.plan.get("n"), rep.plan.get("m", ""),
                rep.measured_error, rep.W, rep.L, rep.width, rep.grid_level,
                rep.W / trend, rep.L / math.log2(2.0 / eps), int(rep.accepted),
            )]
        )
    return buf.getvalue()
