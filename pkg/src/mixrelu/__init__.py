"""Explicit ReLU network constructions for functions of mixed Hoelder smoothness."""

from .network import (
    Architecture,
    NetworkShapeError,
    ReluNetwork,
    has_architecture,
    minimal_architecture,
    zero_network,
)

__version__ = "0.1.0"

from . import adaptive, combinators, faber, measure, nonadaptive, primitives, quantizer  # noqa: E402,F401
