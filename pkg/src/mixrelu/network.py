"""Layered feed-forward ReLU networks with exact nonzero-weight accounting.

A network is a chain of affine maps ``z -> W z + b``; every layer except the
last is followed by ``max(., 0)``.  Weight matrices are kept as canonical CSR
matrices so that networks with hundreds of thousands of nodes stay cheap to
store and evaluate.  Explicitly stored zeros are allowed, but they never count
towards :meth:`ReluNetwork.size`.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

FORMAT_VERSION = 1

# Entries of the (nodes x points) work array allowed per evaluation chunk.
_EVAL_CHUNK_ENTRIES = 1 << 24


class NetworkShapeError(ValueError):
    """Raised when layer dimensions do not chain or an input has the wrong length."""


def _canonical_csr(w) -> sparse.csr_matrix:
    m = sparse.csr_matrix(w, dtype=np.float64)
    m.sum_duplicates()
    m.sort_indices()
    return m


class ReluNetwork:
    """Immutable ReLU network ``x -> W^L s(... s(W^1 x + b^1) ...) + b^L``.

    Parameters
    ----------
    input_dim:
        Dimension ``N_0`` of the input.
    layers:
        Sequence of ``(W, b)`` pairs.  ``W`` may be dense or any scipy sparse
        matrix of shape ``(N_l, N_{l-1})``; ``b`` has length ``N_l``.
    """

    __slots__ = ("_input_dim", "_weights", "_biases", "_size")

    def __init__(self, input_dim: int, layers: Iterable[tuple[object, Sequence[float]]]):
        input_dim = int(input_dim)
        if input_dim < 1:
            raise NetworkShapeError("input_dim must be positive")
        weights, biases = [], []
        prev = input_dim
        for idx, (w, b) in enumerate(layers, start=1):
            w = _canonical_csr(w)
            b = np.array(b, dtype=np.float64).reshape(-1)
            if w.shape[1] != prev:
                raise NetworkShapeError(
                    f"layer {idx}: weight matrix has {w.shape[1]} columns, expected {prev}"
                )
            if b.shape[0] != w.shape[0]:
                raise NetworkShapeError(
                    f"layer {idx}: bias has length {b.shape[0]}, expected {w.shape[0]}"
                )
            w.data.flags.writeable = False
            b.flags.writeable = False
            weights.append(w)
            biases.append(b)
            prev = w.shape[0]
        if len(weights) < 2:
            raise NetworkShapeError(f"a network needs at least 2 layers, got {len(weights)}")
        self._input_dim = input_dim
        self._weights = tuple(weights)
        self._biases = tuple(biases)
        self._size = None

    # ------------------------------------------------------------------ access
    @property
    def input_dim(self) -> int:
        return self._input_dim

    @property
    def output_dim(self) -> int:
        return self._weights[-1].shape[0]

    @property
    def layers(self) -> tuple[tuple[sparse.csr_matrix, np.ndarray], ...]:
        return tuple(zip(self._weights, self._biases))

    @property
    def weights(self) -> tuple[sparse.csr_matrix, ...]:
        return self._weights

    @property
    def biases(self) -> tuple[np.ndarray, ...]:
        return self._biases

    def depth(self) -> int:
        """Number of affine layers ``L``."""
        return len(self._weights)

    def dimension(self) -> tuple[int, ...]:
        """``(N_0, N_1, ..., N_L)``."""
        return (self._input_dim,) + tuple(w.shape[0] for w in self._weights)

    def width(self) -> int:
        """``max_l N_l`` over all layers, the input included."""
        return max(self.dimension())

    def hidden_nodes(self) -> int:
        return sum(self.dimension()[1:-1])

    def size(self) -> int:
        """Number of nonzero weights and biases."""
        if self._size is None:
            self._size = int(
                sum(np.count_nonzero(w.data) for w in self._weights)
                + sum(np.count_nonzero(b) for b in self._biases)
            )
        return self._size

    # -------------------------------------------------------------- evaluation
    def evaluate(self, x) -> np.ndarray:
        """Evaluate the network.

        ``x`` of shape ``(d,)`` gives an output of shape ``(N_L,)``; ``x`` of
        shape ``(n, d)`` gives ``(n, N_L)``.  Rows of each weight matrix are
        accumulated left to right in column order, so results are reproducible
        bit for bit.
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = x.reshape(1, -1) if single else x
        if pts.ndim != 2 or pts.shape[1] != self._input_dim:
            raise NetworkShapeError(
                f"layer 1: expected inputs of length {self._input_dim}, got shape {x.shape}"
            )
        out = np.empty((pts.shape[0], self.output_dim))
        chunk = max(1, _EVAL_CHUNK_ENTRIES // self.width())
        for start in range(0, pts.shape[0], chunk):
            z = np.ascontiguousarray(pts[start : start + chunk].T)
            last = len(self._weights) - 1
            for i, (w, b) in enumerate(zip(self._weights, self._biases)):
                z = w @ z
                z += b[:, None]
                if i < last:
                    np.maximum(z, 0.0, out=z)
            out[start : start + chunk] = z.T
        return out[0] if single else out

    __call__ = evaluate

    def scalar(self, x) -> np.ndarray:
        """Evaluate a scalar-output network on ``(n, d)`` points, returning ``(n,)``."""
        if self.output_dim != 1:
            raise NetworkShapeError("scalar() needs a single-output network")
        return self.evaluate(np.atleast_2d(x))[:, 0]

    # --------------------------------------------------------- transformations
    def with_layers(self, layers) -> "ReluNetwork":
        return ReluNetwork(self._input_dim, layers)

    def precompose_affine(self, scale: Sequence[float], shift: Sequence[float]) -> "ReluNetwork":
        """Network for ``x -> self(scale * x + shift)`` with a diagonal input map.

        The map is folded into the first layer, so depth is unchanged and the
        size grows by at most the number of first-layer rows.
        """
        scale = np.asarray(scale, dtype=np.float64)
        shift = np.asarray(shift, dtype=np.float64)
        w1 = self._weights[0]
        b1 = self._biases[0] + w1 @ shift
        w1 = w1 @ sparse.diags(scale)
        return ReluNetwork(self._input_dim, [(w1, b1)] + list(self.layers[1:]))

    def permute_inputs(self, perm: Sequence[int]) -> "ReluNetwork":
        """Network for ``y -> self(x)`` where ``x[i] = y[perm[i]]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self._input_dim)):
            raise ValueError("perm must be a permutation of the inputs")
        p = sparse.csr_matrix(
            (np.ones(self._input_dim), (np.arange(self._input_dim), perm)),
            shape=(self._input_dim, self._input_dim),
        )
        w1 = self._weights[0] @ p
        return ReluNetwork(self._input_dim, [(w1, self._biases[0])] + list(self.layers[1:]))

    def scaled(self, c: float) -> "ReluNetwork":
        """Network for ``c * self(x)`` (the factor is folded into the last layer)."""
        layers = list(self.layers)
        w, b = layers[-1]
        layers[-1] = (w * c, b * c)
        return ReluNetwork(self._input_dim, layers)

    # ------------------------------------------------------------ serialization
    def to_dict(self) -> dict:
        """Versioned document; floats are stored as exact hex strings.

        Each layer records its nonzero pattern as ``row``/``col`` index arrays
        with ``data`` values, which is the row-major order of the nonzero
        entries.
        """
        layers = []
        for w, b in self.layers:
            coo = w.tocoo()
            layers.append(
                {
                    "rows": int(w.shape[0]),
                    "cols": int(w.shape[1]),
                    "row": coo.row.tolist(),
                    "col": coo.col.tolist(),
                    "data": [float(v).hex() for v in coo.data],
                    "bias": [float(v).hex() for v in b],
                }
            )
        return {"version": FORMAT_VERSION, "input_dim": self._input_dim, "layers": layers}

    @classmethod
    def from_dict(cls, doc: dict) -> "ReluNetwork":
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported network document version {doc.get('version')!r}")
        layers = []
        for spec in doc["layers"]:
            shape = (int(spec["rows"]), int(spec["cols"]))
            if "weights" in spec:
                w = np.array([_parse_float(v) for v in spec["weights"]]).reshape(shape)
            else:
                data = np.array([_parse_float(v) for v in spec["data"]])
                w = sparse.csr_matrix(
                    (data, (np.asarray(spec["row"], dtype=np.int64), np.asarray(spec["col"], dtype=np.int64))),
                    shape=shape,
                )
            layers.append((w, [_parse_float(v) for v in spec["bias"]]))
        return cls(int(doc["input_dim"]), layers)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ReluNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dimension={self.dimension()}, size={self.size()})"


def _parse_float(v) -> float:
    return float.fromhex(v) if isinstance(v, str) else float(v)


class Architecture(ReluNetwork):
    """A network whose weights and biases are all 0 or 1."""

    __slots__ = ()

    def __init__(self, input_dim: int, layers):
        super().__init__(input_dim, layers)
        for idx, (w, b) in enumerate(self.layers, start=1):
            if not (np.isin(w.data, (0.0, 1.0)).all() and np.isin(b, (0.0, 1.0)).all()):
                raise ValueError(f"layer {idx}: architecture entries must be 0 or 1")

    def same_as(self, other: "Architecture") -> bool:
        """Exact structural equality of the one-patterns."""
        if self.dimension() != other.dimension():
            return False
        for (w1, b1), (w2, b2) in zip(self.layers, other.layers):
            if (w1 != w2).nnz or not np.array_equal(b1, b2):
                return False
        return True

    def __eq__(self, other):
        return isinstance(other, Architecture) and self.same_as(other)

    __hash__ = None


def zero_network(input_dim: int, output_dim: int = 1) -> ReluNetwork:
    """Two-layer network with one hidden node and all-zero parameters."""
    return ReluNetwork(
        input_dim,
        [(sparse.csr_matrix((1, input_dim)), [0.0]), (sparse.csr_matrix((output_dim, 1)), np.zeros(output_dim))],
    )


def _mask(w: sparse.csr_matrix) -> sparse.csr_matrix:
    m = w.copy()
    m.eliminate_zeros()
    m.data[:] = 1.0
    return m


def minimal_architecture(net: ReluNetwork) -> Architecture:
    """Binary mask with ones exactly at the nonzero weights and biases of ``net``."""
    return Architecture(
        net.input_dim,
        [(_mask(w), (b != 0).astype(np.float64)) for w, b in net.layers],
    )


def has_architecture(net: ReluNetwork, arch: ReluNetwork) -> bool:
    """True iff every zero entry of ``arch`` is also zero in ``net``."""
    if net.dimension() != arch.dimension():
        raise NetworkShapeError(
            f"dimension mismatch: network {net.dimension()} vs architecture {arch.dimension()}"
        )
    for (w, b), (aw, ab) in zip(net.layers, arch.layers):
        if np.any((b != 0) & (ab == 0)):
            return False
        nz = _mask(w)
        allowed = _mask(aw)
        # entries of nz outside allowed survive the subtraction with value 1
        if ((nz - nz.multiply(allowed)).count_nonzero()) > 0:
            return False
    return True


def interval_bounds(net: ReluNetwork, lower, upper) -> list[tuple[np.ndarray, np.ndarray]]:
    """Interval bounds of every layer's pre-activation over the box ``[lower, upper]``.

    Returns one ``(lo, hi)`` pair per layer; the last pair bounds the output.
    The bounds are padded by a relative 1e-12 so they stay valid under rounding.
    """
    lo = np.asarray(lower, dtype=np.float64) * np.ones(net.input_dim)
    hi = np.asarray(upper, dtype=np.float64) * np.ones(net.input_dim)
    out = []
    for i, (w, b) in enumerate(net.layers):
        wp = w.maximum(0)
        wn = w.minimum(0)
        plo = wp @ lo + wn @ hi + b
        phi = wp @ hi + wn @ lo + b
        mag = np.maximum(np.abs(lo), np.abs(hi))
        pad = 1e-12 * (abs(w) @ mag + np.abs(b) + 1.0)
        plo, phi = plo - pad, phi + pad
        out.append((plo, phi))
        lo, hi = np.maximum(plo, 0.0), np.maximum(phi, 0.0)
    return out
