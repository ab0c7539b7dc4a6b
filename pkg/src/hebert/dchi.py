"""Metric-DP noising baseline: additive noise with density ∝ exp(-eta*||N||).

The noise is sampled as N = r*p with r ~ Gamma(shape=dim, scale=1/eta) and p
uniform on the unit hypersphere, so E[||N||] = dim/eta: larger eta means
less noise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class NoiseParams:
    eta: float
    dim: int
    rng_seed: int = 0

    def __post_init__(self):
        if self.eta <= 0:
            raise DataError("eta must be positive")
        if self.dim < 1:
            raise DataError("dim must be >= 1")

    def generator(self):
        return np.random.default_rng(np.random.PCG64(self.rng_seed))


def sample_noise(params, rng=None, count=None):
    """One noise vector (or `count` of them, rows)."""
    rng = params.generator() if rng is None else rng
    n = count if count is not None else 1
    r = rng.gamma(shape=params.dim, scale=1.0 / params.eta, size=n)
    p = rng.normal(size=(n, params.dim))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    out = r[:, None] * p
    return out if count is not None else out[0]


def privatize(y, params, rng=None):
    """P(y) = y + N. Accepts a vector or a matrix of row vectors."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        if y.shape[0] != params.dim:
            raise DataError(f"vector dim {y.shape[0]} != params dim {params.dim}")
        return y + sample_noise(params, rng)
    if y.shape[1] != params.dim:
        raise DataError(f"matrix dim {y.shape[1]} != params dim {params.dim}")
    return y + sample_noise(params, rng, count=y.shape[0])
