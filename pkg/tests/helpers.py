"""Shared oracles for the test suite."""

import numpy as np

from mixrelu.faber import Certificate, TargetFunction, hat
from mixrelu.network import ReluNetwork


def grid(level: int, d: int) -> np.ndarray:
    a = np.arange(2**level + 1) / 2.0**level
    mesh = np.meshgrid(*[a] * d, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def linspace_grid(n: int, d: int) -> np.ndarray:
    a = np.linspace(0.0, 1.0, n)
    mesh = np.meshgrid(*[a] * d, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def hat_net() -> ReluNetwork:
    """s(t) - 2 s(t-1) + s(t-2), written out by hand."""
    return ReluNetwork(1, [([[1.0], [1.0], [1.0]], [0.0, -1.0, -2.0]), ([[1.0, -2.0, 1.0]], [0.0])])


def closed_hat(k: int, s: int, x):
    """phi_{k,s}(x) = phi(2^{k+1} x - 2 s) with phi(t) = (1 - |t - 1|)_+."""
    return np.maximum(1.0 - np.abs(2.0 ** (k + 1) * np.asarray(x) - 2 * s - 1.0), 0.0)


def rough_target(level: int = 2, seed: int = 0, d: int = 2, alpha: float = 1.0) -> TargetFunction:
    """Signed sum of level-``level`` tensor hats at the unit-ball amplitude.

    Far rougher than product-bump, so quantized residual patterns are nonzero.
    """
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(2**level,) * d)
    c = 2.0 ** (-alpha * d - alpha * level * d)

    def ev(x):
        t = x * 2.0**level
        s = np.clip(np.floor(t), 0, 2**level - 1).astype(int)
        return c * signs[tuple(s.T)] * np.prod(hat(2 * (t - s)), axis=1)

    return TargetFunction(ev, alpha, d, Certificate("sampled", "signed hat sum"), "rough")
