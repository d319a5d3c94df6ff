"""Node-level network assembly.

A :class:`Circuit` grows a layered ReLU network node by node.  Values that are
not yet passed through a ReLU are represented as :class:`Lin`, an affine form
over the nodes of one layer.  Creating a node applies the ReLU and places the
node in the next layer.  Node order inside a layer is creation order, and that
order fixes the left-to-right summation order used by the evaluator.  Several
constructions depend on this to cancel terms exactly.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .network import ReluNetwork


class Lin:
    """Affine form ``sum_i c_i * node_i + bias`` over the nodes of one layer."""

    __slots__ = ("layer", "terms", "bias", "raw")

    def __init__(self, layer: int, terms: dict[int, float] | None = None, bias: float = 0.0, raw: bool = False):
        self.layer = layer
        self.terms = terms if terms is not None else {}
        self.bias = float(bias)
        # raw: every referenced node is exactly zero whenever the value is zero
        self.raw = raw

    @classmethod
    def const(cls, layer: int, value: float) -> "Lin":
        return cls(layer, {}, value)

    def _check(self, other: "Lin"):
        if other.layer != self.layer:
            raise ValueError(f"cannot combine values of layers {self.layer} and {other.layer}")

    def __add__(self, other):
        if isinstance(other, Lin):
            self._check(other)
            terms = dict(self.terms)
            for i, c in other.terms.items():
                v = terms.get(i, 0.0) + c
                if v == 0.0:
                    terms.pop(i, None)
                else:
                    terms[i] = v
            return Lin(self.layer, terms, self.bias + other.bias)
        return Lin(self.layer, dict(self.terms), self.bias + float(other))

    __radd__ = __add__

    def __neg__(self):
        return Lin(self.layer, {i: -c for i, c in self.terms.items()}, -self.bias, self.raw)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c: float):
        c = float(c)
        if c == 0.0:
            return Lin(self.layer, {}, 0.0)
        return Lin(self.layer, {i: v * c for i, v in self.terms.items()}, self.bias * c, self.raw)

    __rmul__ = __mul__


class Circuit:
    """Incremental builder for a :class:`ReluNetwork` with ``input_dim`` inputs."""

    def __init__(self, input_dim: int):
        self.input_dim = int(input_dim)
        # rows[l] lists (terms, bias) for the nodes of hidden layer l (l >= 1)
        self.rows: list[list[tuple[dict[int, float], float]] | None] = [None]

    def inputs(self) -> list[Lin]:
        return [Lin(0, {i: 1.0}, raw=True) for i in range(self.input_dim)]

    def relu(self, lin: Lin) -> Lin:
        """Create the node ``max(lin, 0)`` in layer ``lin.layer + 1``."""
        layer = lin.layer + 1
        while len(self.rows) <= layer:
            self.rows.append([])
        nodes = self.rows[layer]
        nodes.append((dict(lin.terms), lin.bias))
        return Lin(layer, {len(nodes) - 1: 1.0}, raw=True)

    def relus(self, lins: Iterable[Lin]) -> list[Lin]:
        return [self.relu(v) for v in lins]

    # ------------------------------------------------------------- carrying
    def carry(self, lin: Lin, layer: int, nonneg: bool) -> Lin:
        """Forward ``lin`` unchanged to ``layer``.

        Nonnegative values ride on single ReLU nodes; signed values use the
        pair ``max(v, 0) - max(-v, 0)``.  A zero value stays an exact zero.
        """
        if layer < lin.layer:
            raise ValueError("cannot carry a value backwards")
        if layer == lin.layer:
            return lin
        if not lin.terms:
            return Lin.const(layer, lin.bias)
        if lin.raw and lin.layer > 0 and lin.bias == 0.0:
            # every referenced node is a nonnegative ReLU output: carry them one by one
            terms: dict[int, float] = {}
            for i, c in lin.terms.items():
                v = Lin(lin.layer, {i: 1.0})
                while v.layer < layer:
                    v = self.relu(v)
                (j,) = v.terms
                terms[j] = c
            return Lin(layer, terms, raw=True)
        if nonneg:
            v = lin
            while v.layer < layer:
                v = self.relu(v)
            v.raw = True
            return v
        p, n = self.relu(lin), self.relu(-lin)
        while p.layer < layer:
            p, n = self.relu(p), self.relu(n)
        out = p - n
        out.raw = True
        return out

    def hold(self, lin: Lin, nonneg: bool) -> Lin:
        """Return ``lin`` as raw nodes (one layer later) unless it already is.

        After holding, a value that is exactly zero is carried by nodes that are
        exactly zero, so it contributes nothing to later sums regardless of
        the summation order.
        """
        if lin.raw:
            return lin
        return self.carry(lin, lin.layer + 1, nonneg)

    # ------------------------------------------------------------- embedding
    def embed(self, net: ReluNetwork, inputs: Sequence[Lin]) -> list[Lin]:
        """Apply ``net`` to the values ``inputs`` (all in one layer).

        The first affine map of ``net`` is fused with the input forms, so the
        embedded copy occupies ``net.depth() - 1`` new layers and the returned
        outputs are forms over its last hidden layer.
        """
        if len(inputs) != net.input_dim:
            raise ValueError(f"net expects {net.input_dim} inputs, got {len(inputs)}")
        layer = inputs[0].layer
        if any(v.layer != layer for v in inputs):
            raise ValueError("embedded inputs must share a layer")
        current = list(inputs)
        for idx, (w, b) in enumerate(net.layers):
            forms = _apply(w, b, current)
            if idx == net.depth() - 1:
                return forms
            current = self.relus(forms)
        raise AssertionError("unreachable")

    # ------------------------------------------------------------- assembly
    def network(self, outputs: Sequence[Lin]) -> ReluNetwork:
        """Assemble the network whose last affine map produces ``outputs``."""
        outputs = list(outputs)
        top = outputs[0].layer
        if any(v.layer != top for v in outputs):
            raise ValueError("all outputs must live in the same layer")
        if top < 1:
            raise ValueError("outputs must depend on at least one hidden layer")
        widths = [self.input_dim] + [len(self.rows[l]) if l < len(self.rows) else 0 for l in range(1, top + 1)]
        layers = []
        for l in range(1, top + 1):
            rows = self.rows[l] if l < len(self.rows) else []
            layers.append(_assemble(rows, widths[l - 1]))
        layers.append(_assemble([(v.terms, v.bias) for v in outputs], widths[top]))
        return ReluNetwork(self.input_dim, layers)


def _apply(w: sparse.csr_matrix, b: np.ndarray, values: Sequence[Lin]) -> list[Lin]:
    forms = []
    layer = values[0].layer
    for r in range(w.shape[0]):
        acc = Lin.const(layer, b[r])
        for jj in range(w.indptr[r], w.indptr[r + 1]):
            c = w.data[jj]
            if c != 0.0:
                acc = acc + values[w.indices[jj]] * c
        forms.append(acc)
    return forms


def _assemble(rows, ncols: int):
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    bias = np.zeros(len(rows))
    for r, (terms, b) in enumerate(rows):
        for j, c in terms.items():
            indices.append(j)
            data.append(c)
        indptr.append(len(indices))
        bias[r] = b
    w = sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(rows), ncols),
    )
    return w, bias
