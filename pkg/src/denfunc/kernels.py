"""One-dimensional polynomial kernels supported on [-1, 1].

A kernel of order ``ell`` integrates to one and has vanishing moments
``int u^j K(u) du = 0`` for ``j = 1..ell``.  For ``ell <= 1`` this is the
Epanechnikov kernel; higher orders use a symmetric Legendre expansion whose
even moments are cancelled by solving the moment equations directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as L
from numpy.polynomial import polynomial as P
from scipy import integrate

from .errors import ConfigError

__all__ = ["Kernel", "MAX_ORDER", "make_kernel", "eval_kernel", "kernel_l1_norm"]

MAX_ORDER = 10


def _monomial_integral(power: int) -> float:
    # int_{-1}^{1} u^p du
    return 0.0 if power % 2 else 2.0 / (power + 1)


def _l1_by_quadrature(coefficients) -> float:
    coef = np.asarray(coefficients, dtype=float)
    roots = P.polyroots(coef) if len(coef) > 1 else np.array([])
    breaks = sorted(
        float(r.real) for r in np.atleast_1d(roots)
        if abs(r.imag) < 1e-12 and -1.0 < r.real < 1.0
    )
    val, _ = integrate.quad(
        lambda u: abs(P.polyval(u, coef)), -1.0, 1.0,
        points=breaks or None, epsabs=1e-14, epsrel=1e-12, limit=200,
    )
    return float(val)


@dataclass(frozen=True)
class Kernel:
    """Polynomial kernel on [-1, 1], zero outside.

    ``coefficients`` are monomial coefficients in ascending degree.
    """

    order: int
    coefficients: tuple
    l1_norm: float = field(default=float("nan"))

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not np.isfinite(self.l1_norm):
            object.__setattr__(self, "l1_norm", _l1_by_quadrature(self.coefficients))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_nonnegative(self) -> bool:
        return self.l1_norm <= 1.0 + 1e-12

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        val = P.polyval(u, np.asarray(self.coefficients))
        out = np.where(np.abs(u) <= 1.0, val, 0.0)
        return out if out.ndim else float(out)

    def moment(self, j: int) -> float:
        """Exact ``int u^j K(u) du`` from the coefficients."""
        return float(sum(c * _monomial_integral(i + j) for i, c in enumerate(self.coefficients)))

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": list(self.coefficients),
            "l1_norm": self.l1_norm,
        }


def make_kernel(order: int) -> Kernel:
    """Build a kernel whose moments ``1..order`` vanish.

    >>> make_kernel(1)(0.0)
    0.75
    """
    if int(order) != order or order < 0:
        raise ConfigError(f"kernel order must be a non-negative integer, got {order!r}")
    order = int(order)
    if order > MAX_ORDER:
        raise ConfigError(f"kernel order {order} exceeds the supported maximum {MAX_ORDER}")
    if order <= 1:
        return Kernel(order=order, coefficients=(0.75, 0.0, -0.75), l1_norm=1.0)

    # Smallest even kernel order above ``order``: polynomial degree 2q with
    # q = order // 2.  Odd moments vanish by symmetry; the q+1 even moment
    # equations (mass one, moments 2..2q zero) fix the Legendre weights.
    q = order // 2
    legendre_in_powers = []
    for i in range(q + 1):
        c = np.zeros(2 * i + 1)
        c[-1] = 1.0
        legendre_in_powers.append(L.leg2poly(c))
    M = np.array([
        [sum(pc * _monomial_integral(p + 2 * j) for p, pc in enumerate(poly)) for poly in legendre_in_powers]
        for j in range(q + 1)
    ])
    rhs = np.zeros(q + 1)
    rhs[0] = 1.0
    if np.linalg.cond(M) > 1e12:
        raise ArithmeticError(f"moment system for order {order} is singular")
    weights = np.linalg.solve(M, rhs)

    coef = np.zeros(2 * q + 1)
    for w, poly in zip(weights, legendre_in_powers):
        coef[: len(poly)] += w * poly
    return Kernel(order=order, coefficients=tuple(coef))


def eval_kernel(k: Kernel, u):
    return k(u)


def kernel_l1_norm(k: Kernel) -> float:
    return k.l1_norm
