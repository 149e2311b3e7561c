"""Finite-sample constants: bounded differences, concentration, bias, MSE.

The deviation bound used throughout is the McDiarmid form for an estimator
that depends on ``k * n`` independent observations, each of which can move
the estimate by at most ``C_V / n``::

    P(|F - E F| > eps) <= 2 exp(-2 eps^2 n / (k C_V^2))

Bias constants are never known numerically; ``C_B`` defaults to 1 and every
bias figure is therefore only meaningful up to constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConfigError

__all__ = [
    "HolderParams",
    "BoundConstants",
    "variance_constant",
    "deviation_probability",
    "ci_halfwidth",
    "bias_bound",
    "variance_bound",
    "mse_bound",
    "bandwidth",
]


def _holder_floor(beta: float) -> int:
    # greatest integer strictly below beta
    return int(math.ceil(beta)) - 1


@dataclass(frozen=True)
class HolderParams:
    beta: float
    d: int
    L: float = 1.0
    r: float = 2.0
    ell: int = field(init=False)

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ConfigError(f"smoothness beta must be positive, got {self.beta}")
        if self.L <= 0:
            raise ConfigError(f"Holder constant L must be positive, got {self.L}")
        if self.r < 1:
            raise ConfigError(f"norm index r must be >= 1, got {self.r}")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"dimension must be a positive integer, got {self.d}")
        object.__setattr__(self, "ell", _holder_floor(self.beta))


@dataclass(frozen=True)
class BoundConstants:
    C_V: float
    k: int
    dims: tuple
    C_B: float = 1.0
    C: float = 1.0

    def __post_init__(self):
        for name in ("C_V", "C_B", "C"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")


def variance_constant(C_f: float, dims: Sequence[int], l1: float) -> float:
    """``2 C_f max_j l1^{d_j}``: the per-observation change is at most this over n."""
    if C_f <= 0 or l1 <= 0 or not dims:
        raise ConfigError("variance_constant needs C_f > 0, l1 > 0 and at least one dimension")
    return 2.0 * C_f * max(l1**d for d in dims)


def deviation_probability(eps: float, n: int, k: int, C_V: float) -> float:
    if eps < 0 or n < 1 or k < 1:
        raise ConfigError(f"invalid deviation query eps={eps}, n={n}, k={k}")
    return min(1.0, 2.0 * math.exp(-2.0 * eps * eps * n / (k * C_V * C_V)))


def ci_halfwidth(delta: float, n: int, k: int, C_V: float) -> float:
    """Half-width eps with ``deviation_probability(eps) == delta``."""
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    if n < 1 or k < 1:
        raise ConfigError(f"invalid n={n} or k={k}")
    return C_V * math.sqrt(k * math.log(2.0 / delta) / (2.0 * n))


def bias_bound(h: float, params: HolderParams, n: int, C_B: float = 1.0) -> float:
    """``C_B (h^beta + h^{2 beta} + 1/(n h^d))``."""
    if not (0.0 < h <= 1.0) or n < 1:
        raise ConfigError(f"bias_bound needs h in (0, 1] and n >= 1 (got h={h}, n={n})")
    b = params.beta
    return C_B * (h**b + h ** (2 * b) + 1.0 / (n * h**params.d))


def variance_bound(C_V: float, n: int) -> float:
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    return C_V * C_V / n


def mse_bound(C_V: float, C_B: float, h: float, params: HolderParams, n: int) -> float:
    return variance_bound(C_V, n) + bias_bound(h, params, n, C_B) ** 2


def bandwidth(n: int, beta: float, d: int, c: float = 1.0) -> float:
    """Functional-optimal bandwidth ``min(1, c n^{-1/(beta+d)})``."""
    if n < 1 or beta <= 0 or d < 1 or c <= 0:
        raise ConfigError(f"bandwidth rule needs n >= 1, beta > 0, d >= 1, c > 0 (got {n}, {beta}, {d}, {c})")
    return min(1.0, c * n ** (-1.0 / (beta + d)))
