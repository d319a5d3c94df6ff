"""Network algebra: parallelization, concatenation and special networks.

Every public combinator checks the size/depth inequality of its lemma as an
exact integer comparison and appends a record to :data:`ACCOUNTING`.  A
violated inequality raises :class:`AccountingError`.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .network import ReluNetwork, interval_bounds

__all__ = [
    "ACCOUNTING",
    "AccountingError",
    "AccountingRecord",
    "SpecialNetwork",
    "concatenate",
    "parallelize",
    "special_combine",
    "special_to_standard",
]


class AccountingError(AssertionError):
    """A combinator produced a network violating its size or depth bound."""


@dataclass(frozen=True)
class AccountingRecord:
    combinator: str
    size: int
    depth: int
    size_bound: int
    depth_expected: int
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.size <= self.size_bound and self.depth == self.depth_expected and all(
            v for k, v in self.extra.items() if k.startswith("check_")
        )


class AccountingLog:
    """Thread-safe list of :class:`AccountingRecord` entries."""

    def __init__(self):
        self._lock = threading.Lock()
        self._records: list[AccountingRecord] = []

    def add(self, rec: AccountingRecord) -> None:
        with self._lock:
            self._records.append(rec)
        if not rec.ok:
            raise AccountingError(f"{rec.combinator} violated its bound: {rec}")

    @property
    def records(self) -> list[AccountingRecord]:
        with self._lock:
            return list(self._records)

    def violations(self) -> list[AccountingRecord]:
        return [r for r in self.records if not r.ok]

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            out[r.combinator] = out.get(r.combinator, 0) + 1
        return out

    def clear(self) -> None:
        with self._lock:
            self._records.clear()


ACCOUNTING = AccountingLog()


def _offset(lower: float) -> float:
    """Smallest power of two making ``value + offset`` nonnegative, or 0."""
    if lower >= 0.0:
        return 0.0
    return float(2.0 ** math.ceil(math.log2(-lower)))


def _check_inputs(nets: Sequence[ReluNetwork]) -> int:
    if not nets:
        raise ValueError("need at least one network")
    d = nets[0].input_dim
    for i, n in enumerate(nets):
        if n.input_dim != d:
            raise ValueError(f"network {i} has input_dim {n.input_dim}, expected {d}")
    return d


# ---------------------------------------------------------------- parallelize
def parallelize(
    nets: Sequence[ReluNetwork],
    coeffs: Sequence[float] | None = None,
    box: tuple[float, float] = (0.0, 1.0),
) -> ReluNetwork:
    """Network with output ``sum_j coeffs[j] * nets[j](x)`` for ``x`` in ``box^d``.

    All members read the shared input.  A member shallower than the deepest
    one has its output lifted by a constant ``C_j`` (a power of two bounding
    its negative part on the box, from interval arithmetic), forwarded through
    single identity nodes and shifted back at the output.  This costs at most
    ``L - L_j + 2`` extra weights per member.
    """
    d = _check_inputs(nets)
    coeffs = [1.0] * len(nets) if coeffs is None else [float(c) for c in coeffs]
    if len(coeffs) != len(nets):
        raise ValueError("coeffs and nets differ in length")
    for i, n in enumerate(nets):
        if n.output_dim != 1:
            raise ValueError(f"network {i} is not scalar-output; vector parallelization is unsupported")
    depth = max(n.depth() for n in nets)

    padded = [_pad_to_depth(n, depth, box) for n in nets]
    w1 = sparse.vstack([p[0][0] for p in padded], format="csr")
    b1 = np.concatenate([p[0][1] for p in padded])
    assembled = [(w1, b1)]
    for i in range(1, depth - 1):
        assembled.append(
            (
                sparse.block_diag([p[i][0] for p in padded], format="csr"),
                np.concatenate([p[i][1] for p in padded]),
            )
        )
    w_out = sparse.hstack([p[-1][0] * c for p, c in zip(padded, coeffs)], format="csr")
    b_out = np.array([math.fsum(c * p[-1][1][0] for p, c in zip(padded, coeffs))])
    assembled.append((w_out, b_out))
    out = ReluNetwork(d, assembled)

    sizes = [n.size() for n in nets]
    pad = sum(depth - n.depth() + 2 for n in nets if n.depth() < depth)
    extra = {"n_members": len(nets), "members_size": sum(sizes)}
    if max(sizes) >= depth:
        extra["check_3N_max"] = out.size() <= 3 * len(nets) * max(sizes)
    ACCOUNTING.add(
        AccountingRecord("parallelize", out.size(), out.depth(), sum(sizes) + pad, depth, extra)
    )
    return out


def _pad_to_depth(net: ReluNetwork, depth: int, box) -> list:
    layers = list(net.layers)
    if net.depth() == depth:
        return layers
    lo = interval_bounds(net, box[0], box[1])[-1][0][0]
    shift = _offset(lo)
    w_last, b_last = layers[-1]
    one = sparse.csr_matrix(np.ones((1, 1)))
    return (
        layers[:-1]
        + [(w_last, b_last + shift)]
        + [(one, np.zeros(1))] * (depth - net.depth() - 1)
        + [(one, np.array([-shift]))]
    )


# ---------------------------------------------------------------- concatenate
def concatenate(first: ReluNetwork, second: ReluNetwork) -> ReluNetwork:
    """Network computing ``second(first(x))``.

    The last affine map of ``first`` is doubled into ``max(t, 0)`` and
    ``max(-t, 0)`` nodes, and the first map of ``second`` reads their
    difference, which is exact for every real interface value.
    """
    if first.output_dim != second.input_dim:
        raise ValueError(
            f"interface mismatch: first has {first.output_dim} outputs, second expects {second.input_dim}"
        )
    a = list(first.layers)
    b = list(second.layers)
    w_last, b_last = a[-1]
    junction = (sparse.vstack([w_last, -w_last], format="csr"), np.concatenate([b_last, -b_last]))
    w2, b2 = b[0]
    reader = (sparse.hstack([w2, -w2], format="csr"), b2)
    out = ReluNetwork(first.input_dim, a[:-1] + [junction, reader] + b[1:])
    ACCOUNTING.add(
        AccountingRecord(
            "concatenate",
            out.size(),
            out.depth(),
            2 * first.size() + 2 * second.size(),
            first.depth() + second.depth(),
        )
    )
    return out


# ----------------------------------------------------------- special networks
@dataclass(frozen=True)
class SpecialNetwork:
    """Network with source channels and a collation channel.

    ``base`` stores the affine maps.  In hidden layer ``l`` (1-based) the node
    ``collation[l - 1]`` (or none if ``-1``) is the collation node: it is
    affine, not rectified.  Source nodes are ordinary ReLU nodes that forward
    ``x``, which is exact on ``[0, 1]^d``.
    """

    base: ReluNetwork
    source_channel_width: int
    collation: tuple[int, ...]

    @property
    def has_collation(self) -> bool:
        return any(c >= 0 for c in self.collation)

    def depth(self) -> int:
        return self.base.depth()

    def size(self) -> int:
        return self.base.size()

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        z = x.T.copy()
        last = self.base.depth() - 1
        for i, (w, b) in enumerate(self.base.layers):
            pre = w @ z + b[:, None]
            if i < last:
                c = self.collation[i]
                z = np.maximum(pre, 0.0)
                if c >= 0:
                    z[c] = pre[c]
            else:
                z = pre
        return z.T

    def collation_bounds(self, lower=0.0, upper=1.0) -> list[tuple[float, float]]:
        """Interval bounds of each collation value over ``[lower, upper]^d``."""
        d = self.base.input_dim
        lo = np.full(d, float(lower))
        hi = np.full(d, float(upper))
        out = []
        for i, (w, b) in enumerate(self.base.layers[:-1]):
            wp, wn = w.maximum(0), w.minimum(0)
            plo = wp @ lo + wn @ hi + b
            phi = wp @ hi + wn @ lo + b
            mag = np.maximum(np.abs(lo), np.abs(hi))
            pad = 1e-12 * (abs(w) @ mag + np.abs(b) + 1.0)
            plo, phi = plo - pad, phi + pad
            lo, hi = np.maximum(plo, 0.0), np.maximum(phi, 0.0)
            c = self.collation[i]
            if c >= 0:
                lo[c], hi[c] = plo[c], phi[c]
                out.append((float(plo[c]), float(phi[c])))
        return out


def special_combine(
    nets: Sequence[ReluNetwork], coeffs: Sequence[float] | None = None, input_dim: int | None = None
) -> SpecialNetwork:
    """Stack ``nets`` in depth so that the output is ``sum_j coeffs[j] * nets[j](x)``.

    Inputs are assumed to lie in ``[0, 1]^d``; this is not checked at run
    time.  Member ``j`` occupies layers ``o_j + 1 .. o_j + L_j`` with
    ``o_j = L_0 + ... + L_{j-1}`` and reads ``x`` from the source channel.
    """
    d = _check_inputs(nets)
    if input_dim is not None and input_dim != d:
        raise ValueError(f"input_dim {input_dim} differs from the members' {d}")
    coeffs = [1.0] * len(nets) if coeffs is None else [float(c) for c in coeffs]
    if len(coeffs) != len(nets):
        raise ValueError("coeffs and nets differ in length")
    for i, n in enumerate(nets):
        if n.output_dim != 1:
            raise ValueError(f"network {i} is not scalar-output")
    depths = [n.depth() for n in nets]
    offsets = np.concatenate([[0], np.cumsum(depths)]).astype(int)
    total = int(offsets[-1])
    last_src = int(offsets[-2])  # layers 1..last_src carry the source channel
    first_col = depths[0]  # first layer holding a collation node

    # Per hidden layer: (number of source nodes, active member or -1, has collation)
    def active(l):
        for j, (o, L) in enumerate(zip(offsets[:-1], depths)):
            if o + 1 <= l <= o + L - 1:
                return j
        return -1

    layout = []
    for l in range(1, total):
        n_src = d if l <= last_src else 0
        j = active(l)
        n_blk = nets[j].dimension()[l - offsets[j]] if j >= 0 else 0
        has_col = first_col <= l <= total - 1
        layout.append((n_src, j, n_blk, has_col))

    def width(l):
        if l == 0:
            return d
        n_src, _, n_blk, has_col = layout[l - 1]
        return n_src + n_blk + int(has_col)

    layers = []
    collation = []
    for l in range(1, total + 1):
        rows, cols, vals, bias = [], [], [], []
        r = 0
        is_out = l == total
        n_src, j, n_blk, has_col = (0, -1, 0, True) if is_out else layout[l - 1]
        # source channel: x_i -> x_i
        for i in range(n_src):
            rows.append(r + i)
            cols.append(i)
            vals.append(1.0)
            bias.append(0.0)
        r += n_src
        # member hidden nodes
        if j >= 0:
            t = l - offsets[j]  # 1-based map index inside member j
            w, b = nets[j].layers[t - 1]
            coo = w.tocoo()
            col_shift = 0 if t == 1 else (layout[l - 2][0])
            rows.extend((coo.row + r).tolist())
            cols.extend((coo.col + col_shift).tolist())
            vals.extend(coo.data.tolist())
            bias.extend(b.tolist())
            r += n_blk
        # collation node (or the output)
        if has_col:
            cb = 0.0
            if l - 1 >= first_col:  # previous collation node
                prev_col = width(l - 1) - 1
                rows.append(r)
                cols.append(prev_col)
                vals.append(1.0)
            ending = [jj for jj, (o, L) in enumerate(zip(offsets[:-1], depths)) if o + L == l]
            for jj in ending:
                w, b = nets[jj].layers[-1]
                coo = w.tocoo()
                col_shift = layout[l - 2][0] if l >= 2 else 0
                if l - 1 >= 1 and coo.nnz:
                    rows.extend([r] * coo.nnz)
                    cols.extend((coo.col + col_shift).tolist())
                    vals.extend((coo.data * coeffs[jj]).tolist())
                cb += coeffs[jj] * b[0]
            bias.append(cb)
            collation.append(r if not is_out else -1)
            r += 1
        else:
            collation.append(-1)
        w = sparse.csr_matrix((vals, (rows, cols)), shape=(r, width(l - 1)))
        layers.append((w, np.asarray(bias, dtype=np.float64)))
    base = ReluNetwork(d, layers)
    snet = SpecialNetwork(base, d if len(nets) > 1 else 0, tuple(collation[:-1]))
    ACCOUNTING.add(
        AccountingRecord(
            "special_combine",
            snet.size(),
            snet.depth(),
            sum(n.size() for n in nets) + (d + 1) * total,
            sum(depths),
        )
    )
    return snet


def special_to_standard(snet: SpecialNetwork) -> ReluNetwork:
    """Equivalent standard network on ``[0, 1]^d``.

    The collation channel is lifted by a constant ``C`` (a power of two bounding
    its negative part) so it can pass through ReLUs; ``C`` is removed at the
    output.  At most two new nonzero parameters appear.
    """
    layers = [(w, b.copy()) for w, b in snet.base.layers]
    if snet.has_collation:
        lows = [lo for lo, _ in snet.collation_bounds()]
        shift = _offset(min(lows))
        if shift:
            first = next(i for i, c in enumerate(snet.collation) if c >= 0)
            layers[first][1][snet.collation[first]] += shift
            layers[-1][1][0] -= shift
    out = ReluNetwork(snet.base.input_dim, layers)
    ACCOUNTING.add(
        AccountingRecord(
            "special_to_standard",
            out.size(),
            out.depth(),
            snet.size() + snet.depth(),
            snet.depth(),
            {"check_2W": out.size() <= 2 * max(snet.size(), 1)},
        )
    )
    return out
