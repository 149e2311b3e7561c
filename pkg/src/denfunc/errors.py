"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid user-supplied configuration (bad range, missing option, ...)."""


class NonFiniteIntegrand(ArithmeticError):
    """An integrand produced NaN or inf at some quadrature node.

    ``point`` is the offending node and ``context`` carries whatever values
    fed the integrand there (e.g. the density estimates).
    """

    def __init__(self, message, point=None, context=None):
        super().__init__(message)
        self.point = None if point is None else [float(v) for v in point]
        self.context = dict(context or {})
